#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowcast/quantile.hpp"
#include "flowcast/series.hpp"

namespace flowcast {

/// Inverse standard normal CDF (Acklam's rational approximation polished
/// with one Halley step); good to ~1e-14 over (0, 1).
double normal_quantile(double p);

enum class WeeklyShape { sine, square };
enum class NoiseScale { constant, covariate_linear };
enum class Innovations { gaussian, lognormal };

/// Demand-like daily generator with analytically known conditional
/// quantiles. The deterministic part is base + trend + weekly + annual
/// (plus an optional mean step driven by the previous day's average
/// temperature); innovations follow an AR(1) with Gaussian noise whose
/// scale may be wired to the same temperature covariate. Lognormal mode
/// runs the identical process in log space.
struct SynthScenario {
    std::string gauge_id = "synth";
    std::size_t n_days = 730;
    Date start{16436};  // 2015-01-01

    double base_level = 8.0;
    double trend = 0.0;  // per day
    double weekly_amplitude = 0.0;
    WeeklyShape weekly_shape = WeeklyShape::sine;
    double annual_amplitude = 0.0;
    double ar1 = 0.0;

    NoiseScale noise = NoiseScale::constant;
    double sigma = 1.0;
    double covariate_gain = 0.0;  // noise-scale slope on lag-1 T_avg

    double step_jump = 0.0;       // mean shift when lag-1 T_avg > step_threshold
    double step_threshold = 0.0;

    Innovations innovations = Innovations::gaussian;

    // Meteo generator knobs.
    double meteo_t_mean = 18.0;
    double meteo_t_annual = 8.0;
    double meteo_noise = 1.0;

    std::uint64_t seed = 1;

    void validate() const;
};

/// True conditional quantile function of a generated series: for each date,
/// the conditional mean given the previous day plus the noise scale, with
/// an optional exp transform.
struct OracleQuantiles {
    Date start{0};
    std::vector<double> cond_mean;
    std::vector<double> sigma;
    bool lognormal = false;

    double quantile(Date d, double a) const;
    bool covers(Date d) const {
        return d >= start && d < start.plus(static_cast<std::int32_t>(cond_mean.size()));
    }
};

struct SynthData {
    DailySeries flow;
    MeteoTable meteo;
    OracleQuantiles oracle;
};

SynthData generate(const SynthScenario& scenario);

/// The meteo half of generate(); several gauges of one experiment share it.
MeteoTable generate_meteo_table(const SynthScenario& scenario);

/// The flow half of generate(), conditioned on an existing meteo table that
/// must cover the scenario span.
std::pair<DailySeries, OracleQuantiles> generate_flow(const SynthScenario& scenario,
                                                      const MeteoTable& meteo);

struct RegretCard {
    double model_loss = 0.0;
    double oracle_loss = 0.0;
    double regret = 0.0;  // model_loss - oracle_loss
};

/// Mean pinball loss of the forecast minus that of the true conditional
/// quantiles on the same realizations. Every forecast date must be covered
/// by both the observations and the oracle.
RegretCard oracle_score(const ProbabilisticForecast& forecast, const OracleQuantiles& oracle,
                        const DatedSeries& observed, QuantileLevel a);

void save_oracle(const std::string& path, const OracleQuantiles& oracle);
OracleQuantiles load_oracle(const std::string& path);

/// Parses a scenario description from JSON text. Unknown keys are rejected.
SynthScenario parse_scenario_json(const std::string& text);

}  // namespace flowcast
