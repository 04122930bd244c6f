#include "flowcast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "flowcast/rng.hpp"
#include "flowcast/serialize_util.hpp"

namespace flowcast {

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("normal_quantile: p outside (0, 1)");
    }
    // Acklam's rational approximation.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    // One Halley step against the exact CDF.
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

void SynthScenario::validate() const {
    if (n_days < 30) throw std::invalid_argument("scenario: n_days must be at least 30");
    if (!(std::abs(ar1) < 1.0)) throw std::invalid_argument("scenario: |ar1| must be < 1");
    if (!(sigma > 0.0)) throw std::invalid_argument("scenario: sigma must be positive");
    if (weekly_amplitude < 0.0 || annual_amplitude < 0.0) {
        throw std::invalid_argument("scenario: amplitudes must be non-negative");
    }
    if (!std::isfinite(base_level) || !std::isfinite(trend) || !std::isfinite(covariate_gain) ||
        !std::isfinite(step_jump) || !std::isfinite(step_threshold)) {
        throw std::invalid_argument("scenario: non-finite field");
    }
    if (!(meteo_noise >= 0.0)) throw std::invalid_argument("scenario: meteo_noise must be >= 0");
}

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

MeteoTable generate_meteo(const SynthScenario& sc, Rng& rng) {
    MeteoTable meteo;
    meteo.start = sc.start;
    meteo.n_days = sc.n_days;
    for (auto& col : meteo.columns) col.resize(sc.n_days);
    const double nn = sc.meteo_noise;
    for (std::size_t d = 0; d < sc.n_days; ++d) {
        const double t = static_cast<double>(d);
        const double t_avg = sc.meteo_t_mean +
                             sc.meteo_t_annual * std::sin(kTwoPi * (t - 80.0) / 365.25) +
                             1.5 * nn * rng.next_gauss();
        const double t_high = t_avg + 4.0 + 0.5 * nn * std::abs(rng.next_gauss());
        const double t_low = t_avg - 4.0 - 0.5 * nn * std::abs(rng.next_gauss());
        const double d_avg = t_avg - 5.0 + nn * rng.next_gauss();
        const double d_high = d_avg + 3.0 + 0.3 * nn * std::abs(rng.next_gauss());
        const double d_low = d_avg - 3.0 - 0.3 * nn * std::abs(rng.next_gauss());
        const double h_avg = std::clamp(
            65.0 - 1.2 * (t_avg - sc.meteo_t_mean) + 5.0 * nn * rng.next_gauss(), 15.0, 100.0);
        const double h_high =
            std::clamp(h_avg + 12.0 + 2.0 * nn * std::abs(rng.next_gauss()), h_avg, 100.0);
        const double h_low =
            std::clamp(h_avg - 12.0 - 2.0 * nn * std::abs(rng.next_gauss()), 0.0, h_avg);
        const double s_avg = 2.5 + 1.2 * nn * std::abs(rng.next_gauss());
        const double s_high = s_avg + 1.5 + nn * std::abs(rng.next_gauss());
        const double s_low = std::max(0.0, s_avg - 1.5 - 0.5 * nn * std::abs(rng.next_gauss()));
        const double p_high = 1018.0 + 4.0 * std::sin(kTwoPi * (t + 120.0) / 365.25) +
                              2.0 * nn * rng.next_gauss();
        const double p_low = p_high - 5.0 - nn * std::abs(rng.next_gauss());
        double r_total = 0.0;
        if (rng.next_double() < 0.3) {
            r_total = -2.5 * std::log(std::max(rng.next_double(), 1e-12));
        }
        const double row[kMeteoVarCount] = {t_high, t_avg, t_low, d_high, d_avg,
                                            d_low,  h_high, h_avg, h_low,  s_high,
                                            s_avg,  s_low,  p_high, p_low, r_total};
        for (std::size_t var = 0; var < kMeteoVarCount; ++var) {
            meteo.columns[var][d] = row[var];
        }
    }
    return meteo;
}

}  // namespace

MeteoTable generate_meteo_table(const SynthScenario& sc) {
    sc.validate();
    Rng meteo_rng(derive_seed(sc.seed, 0));
    MeteoTable meteo = generate_meteo(sc, meteo_rng);
    meteo.validate();
    return meteo;
}

std::pair<DailySeries, OracleQuantiles> generate_flow(const SynthScenario& sc,
                                                      const MeteoTable& meteo) {
    sc.validate();
    if (!meteo.covers(sc.start) ||
        !meteo.covers(sc.start.plus(static_cast<std::int32_t>(sc.n_days) - 1))) {
        throw std::invalid_argument("generate_flow: meteo table does not cover the scenario span");
    }
    Rng flow_rng(derive_seed(sc.seed, 1));

    const auto t_avg_at = [&](std::size_t d) {
        return meteo.at(sc.start.plus(static_cast<std::int32_t>(d)), 1);
    };
    const auto deterministic = [&](std::size_t d) {
        const double t = static_cast<double>(d);
        double weekly = 0.0;
        if (sc.weekly_amplitude > 0.0) {
            if (sc.weekly_shape == WeeklyShape::sine) {
                weekly = sc.weekly_amplitude * std::sin(kTwoPi * t / 7.0);
            } else {
                const int dow = ((sc.start.serial + static_cast<std::int32_t>(d)) % 7 + 7) % 7;
                weekly = dow >= 5 ? -sc.weekly_amplitude : sc.weekly_amplitude;
            }
        }
        const double annual =
            sc.annual_amplitude > 0.0 ? sc.annual_amplitude * std::sin(kTwoPi * t / 365.25) : 0.0;
        return sc.base_level + sc.trend * t + weekly + annual;
    };
    const auto lagged_t_avg = [&](std::size_t d) { return t_avg_at(d > 0 ? d - 1 : 0); };
    const auto mean_at = [&](std::size_t d) {
        double m = deterministic(d);
        if (sc.step_jump != 0.0 && lagged_t_avg(d) > sc.step_threshold) m += sc.step_jump;
        return m;
    };
    const auto sigma_at = [&](std::size_t d) {
        if (sc.noise == NoiseScale::constant) return sc.sigma;
        const double scale =
            1.0 + sc.covariate_gain * (lagged_t_avg(d) - sc.meteo_t_mean) /
                      std::max(sc.meteo_t_annual, 1.0);
        return sc.sigma * std::max(0.25, scale);
    };

    OracleQuantiles oracle;
    oracle.start = sc.start;
    oracle.lognormal = sc.innovations == Innovations::lognormal;
    oracle.cond_mean.resize(sc.n_days);
    oracle.sigma.resize(sc.n_days);

    DailySeries flow;
    flow.gauge_id = sc.gauge_id;
    flow.start = sc.start;
    flow.values.resize(sc.n_days);
    flow.present.assign(sc.n_days, 1);

    double prev_y = 0.0, prev_mean = 0.0;
    for (std::size_t d = 0; d < sc.n_days; ++d) {
        const double m = mean_at(d);
        const double s = sigma_at(d);
        const double cond = d == 0 ? m : m + sc.ar1 * (prev_y - prev_mean);
        const double y = cond + s * flow_rng.next_gauss();
        oracle.cond_mean[d] = cond;
        oracle.sigma[d] = s;
        flow.values[d] = oracle.lognormal ? std::exp(y) : y;
        if (!oracle.lognormal && flow.values[d] < 0.0) {
            throw std::runtime_error(
                "generate: scenario produced negative flow; raise base_level or lower sigma");
        }
        prev_y = y;
        prev_mean = m;
    }
    flow.validate();
    return {std::move(flow), std::move(oracle)};
}

SynthData generate(const SynthScenario& sc) {
    SynthData out;
    out.meteo = generate_meteo_table(sc);
    auto [flow, oracle] = generate_flow(sc, out.meteo);
    out.flow = std::move(flow);
    out.oracle = std::move(oracle);
    return out;
}

double OracleQuantiles::quantile(Date d, double a) const {
    if (!covers(d)) throw std::invalid_argument("oracle: date outside generated range");
    const auto idx = static_cast<std::size_t>(d.serial - start.serial);
    const double q = cond_mean[idx] + sigma[idx] * normal_quantile(a);
    return lognormal ? std::exp(q) : q;
}

RegretCard oracle_score(const ProbabilisticForecast& forecast, const OracleQuantiles& oracle,
                        const DatedSeries& observed, QuantileLevel a) {
    const std::size_t col = forecast.level_index(a);
    if (forecast.n_dates() == 0) throw std::invalid_argument("oracle_score: empty forecast");
    double model_total = 0.0, oracle_total = 0.0;
    std::size_t oi = 0;
    for (std::size_t fi = 0; fi < forecast.n_dates(); ++fi) {
        const Date d = forecast.dates[fi];
        while (oi < observed.size() && observed.dates[oi] < d) ++oi;
        if (oi >= observed.size() || !(observed.dates[oi] == d) || !oracle.covers(d)) {
            throw std::runtime_error("oracle_score: forecast date " + to_string(d) +
                                     " not covered by observations and oracle");
        }
        const double x = observed.values[oi];
        model_total += pinball_loss(forecast.at(fi, col), x, a);
        oracle_total += pinball_loss(oracle.quantile(d, a.value()), x, a);
    }
    const double n = static_cast<double>(forecast.n_dates());
    RegretCard card;
    card.model_loss = model_total / n;
    card.oracle_loss = oracle_total / n;
    card.regret = card.model_loss - card.oracle_loss;
    return card;
}

void save_oracle(const std::string& path, const OracleQuantiles& oracle) {
    nlohmann::json j;
    j["start"] = to_string(oracle.start);
    j["lognormal"] = oracle.lognormal;
    j["cond_mean"] = oracle.cond_mean;
    j["sigma"] = oracle.sigma;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << j.dump(2) << '\n';
}

OracleQuantiles load_oracle(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    nlohmann::json j;
    in >> j;
    OracleQuantiles oracle;
    oracle.start = parse_date(j.at("start").get<std::string>());
    oracle.lognormal = j.at("lognormal").get<bool>();
    oracle.cond_mean = j.at("cond_mean").get<std::vector<double>>();
    oracle.sigma = j.at("sigma").get<std::vector<double>>();
    return oracle;
}

SynthScenario parse_scenario_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("scenario: bad JSON: ") + e.what());
    }
    static const std::vector<std::string> known = {
        "gauge_id",     "n_days",        "start",          "base_level",
        "trend",        "weekly_amplitude", "weekly_shape", "annual_amplitude",
        "ar1",          "noise",         "sigma",          "covariate_gain",
        "step_jump",    "step_threshold", "innovations",   "meteo_t_mean",
        "meteo_t_annual", "meteo_noise", "seed"};
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::invalid_argument("scenario: unknown key '" + key + "'");
        }
    }
    SynthScenario sc;
    if (j.contains("gauge_id")) sc.gauge_id = j["gauge_id"].get<std::string>();
    if (j.contains("n_days")) sc.n_days = j["n_days"].get<std::size_t>();
    if (j.contains("start")) sc.start = parse_date(j["start"].get<std::string>());
    if (j.contains("base_level")) sc.base_level = j["base_level"].get<double>();
    if (j.contains("trend")) sc.trend = j["trend"].get<double>();
    if (j.contains("weekly_amplitude")) sc.weekly_amplitude = j["weekly_amplitude"].get<double>();
    if (j.contains("weekly_shape")) {
        const std::string shape = j["weekly_shape"].get<std::string>();
        if (shape == "sine") sc.weekly_shape = WeeklyShape::sine;
        else if (shape == "square") sc.weekly_shape = WeeklyShape::square;
        else throw std::invalid_argument("scenario: weekly_shape must be 'sine' or 'square'");
    }
    if (j.contains("annual_amplitude")) sc.annual_amplitude = j["annual_amplitude"].get<double>();
    if (j.contains("ar1")) sc.ar1 = j["ar1"].get<double>();
    if (j.contains("noise")) {
        const std::string noise = j["noise"].get<std::string>();
        if (noise == "constant") sc.noise = NoiseScale::constant;
        else if (noise == "covariate_linear") sc.noise = NoiseScale::covariate_linear;
        else throw std::invalid_argument("scenario: noise must be 'constant' or 'covariate_linear'");
    }
    if (j.contains("sigma")) sc.sigma = j["sigma"].get<double>();
    if (j.contains("covariate_gain")) sc.covariate_gain = j["covariate_gain"].get<double>();
    if (j.contains("step_jump")) sc.step_jump = j["step_jump"].get<double>();
    if (j.contains("step_threshold")) sc.step_threshold = j["step_threshold"].get<double>();
    if (j.contains("innovations")) {
        const std::string inn = j["innovations"].get<std::string>();
        if (inn == "gaussian") sc.innovations = Innovations::gaussian;
        else if (inn == "lognormal") sc.innovations = Innovations::lognormal;
        else throw std::invalid_argument("scenario: innovations must be 'gaussian' or 'lognormal'");
    }
    if (j.contains("meteo_t_mean")) sc.meteo_t_mean = j["meteo_t_mean"].get<double>();
    if (j.contains("meteo_t_annual")) sc.meteo_t_annual = j["meteo_t_annual"].get<double>();
    if (j.contains("meteo_noise")) sc.meteo_noise = j["meteo_noise"].get<double>();
    if (j.contains("seed")) sc.seed = j["seed"].get<std::uint64_t>();
    sc.validate();
    return sc;
}

}  // namespace flowcast
