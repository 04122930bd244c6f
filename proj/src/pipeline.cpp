#include "flowcast/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <json.hpp>

#include "flowcast/csv.hpp"
#include "flowcast/ensemble.hpp"
#include "flowcast/report.hpp"
#include "flowcast/rng.hpp"
#include "flowcast/synth.hpp"

namespace flowcast {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& algorithm_names() {
    static const std::vector<std::string> names = {
        "qr",   "linear_boost",  "quantile_forest", "gbm",
        "qrnn", "mean_combiner", "median_combiner"};
    return names;
}

namespace {

void require_keys(const json& j, const std::vector<std::string>& known,
                  const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument("config: " + where + " must be an object");
    for (const auto& [key, _] : j.items()) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw std::invalid_argument("config: unknown key '" + where + key + "'");
        }
    }
}

double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void ExperimentConfig::validate() const {
    if (flow_dir.empty()) throw std::invalid_argument("config: inputs.flow_dir is required");
    if (meteo_file.empty()) throw std::invalid_argument("config: inputs.meteo_file is required");
    if (levels.empty()) throw std::invalid_argument("config: levels must be non-empty");
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (!(levels[i] > 0.0 && levels[i] < 1.0)) {
            throw std::invalid_argument("config: levels must lie in (0, 1)");
        }
        if (i > 0 && !(levels[i - 1] < levels[i])) {
            throw std::invalid_argument("config: levels must be strictly increasing");
        }
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw std::invalid_argument("config: train_fraction must lie in (0, 1)");
    }
    if (!(max_missing_fraction >= 0.0 && max_missing_fraction <= 1.0)) {
        throw std::invalid_argument("config: max_missing_fraction must lie in [0, 1]");
    }
    if (workers == 0) throw std::invalid_argument("config: workers must be at least 1");
    for (const DateRangeExclusion& e : exclusions) {
        if (e.end < e.start) throw std::invalid_argument("config: exclusion range end < start");
    }
}

std::string ExperimentConfig::canonical_json() const {
    json j;
    j["inputs"]["flow_dir"] = flow_dir;
    j["inputs"]["meteo_file"] = meteo_file;
    j["output_dir"] = output_dir;
    j["gauges"]["include"] = include;
    j["gauges"]["exclude"] = exclude;
    j["exclusions"] = json::array();
    for (const DateRangeExclusion& e : exclusions) {
        j["exclusions"].push_back({{"gauge", e.gauge},
                                   {"start", to_string(e.start)},
                                   {"end", to_string(e.end)}});
    }
    j["levels"] = levels;
    j["train_fraction"] = train_fraction;
    j["max_missing_fraction"] = max_missing_fraction;
    j["seed"] = seed;
    j["workers"] = workers;
    json& a = j["algorithms"];
    a["qr"] = {{"enabled", algorithms.qr}};
    a["linear_boost"] = {{"enabled", algorithms.linear_boost},
                         {"iterations", algorithms.linear_boost_options.iterations},
                         {"shrinkage", algorithms.linear_boost_options.shrinkage}};
    a["quantile_forest"] = {{"enabled", algorithms.quantile_forest},
                            {"trees", algorithms.forest_options.n_trees},
                            {"subsample_fraction", algorithms.forest_options.subsample_fraction},
                            {"min_leaf", algorithms.forest_options.min_leaf},
                            {"mtry", algorithms.forest_options.mtry},
                            {"honest", algorithms.forest_options.honest}};
    a["gbm"] = {{"enabled", algorithms.gbm},
                {"trees", algorithms.gbm_options.n_trees},
                {"max_depth", algorithms.gbm_options.max_depth},
                {"min_leaf", algorithms.gbm_options.min_leaf},
                {"learning_rate", algorithms.gbm_options.learning_rate},
                {"bag_fraction", algorithms.gbm_options.bag_fraction}};
    a["qrnn"] = {{"enabled", algorithms.qrnn},
                 {"restarts", algorithms.qrnn_options.restarts},
                 {"schedule_length", algorithms.qrnn_options.schedule_length},
                 {"max_iterations_per_stage", algorithms.qrnn_options.max_iterations_per_stage}};
    a["combiners"] = {{"enabled", algorithms.combiners}};
    return j.dump(2);
}

ExperimentConfig parse_config_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config: bad JSON: ") + e.what());
    }
    require_keys(j, {"inputs", "output_dir", "gauges", "exclusions", "levels", "train_fraction",
                     "max_missing_fraction", "seed", "workers", "algorithms"},
                 "");

    ExperimentConfig cfg;
    if (j.contains("inputs")) {
        require_keys(j["inputs"], {"flow_dir", "meteo_file"}, "inputs.");
        if (j["inputs"].contains("flow_dir")) cfg.flow_dir = j["inputs"]["flow_dir"];
        if (j["inputs"].contains("meteo_file")) cfg.meteo_file = j["inputs"]["meteo_file"];
    }
    if (j.contains("output_dir")) cfg.output_dir = j["output_dir"];
    if (j.contains("gauges")) {
        require_keys(j["gauges"], {"include", "exclude"}, "gauges.");
        if (j["gauges"].contains("include")) {
            cfg.include = j["gauges"]["include"].get<std::vector<std::string>>();
        }
        if (j["gauges"].contains("exclude")) {
            cfg.exclude = j["gauges"]["exclude"].get<std::vector<std::string>>();
        }
    }
    if (j.contains("exclusions")) {
        for (const json& e : j["exclusions"]) {
            require_keys(e, {"gauge", "start", "end"}, "exclusions[].");
            DateRangeExclusion x;
            if (e.contains("gauge")) x.gauge = e["gauge"];
            x.start = parse_date(e.at("start").get<std::string>());
            x.end = parse_date(e.at("end").get<std::string>());
            cfg.exclusions.push_back(x);
        }
    }
    if (j.contains("levels")) cfg.levels = j["levels"].get<std::vector<double>>();
    if (j.contains("train_fraction")) cfg.train_fraction = j["train_fraction"];
    if (j.contains("max_missing_fraction")) cfg.max_missing_fraction = j["max_missing_fraction"];
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("workers")) cfg.workers = j["workers"].get<std::size_t>();

    if (j.contains("algorithms")) {
        const json& a = j["algorithms"];
        require_keys(a, {"qr", "linear_boost", "quantile_forest", "gbm", "qrnn", "combiners"},
                     "algorithms.");
        if (a.contains("qr")) {
            require_keys(a["qr"], {"enabled"}, "algorithms.qr.");
            if (a["qr"].contains("enabled")) cfg.algorithms.qr = a["qr"]["enabled"];
        }
        if (a.contains("linear_boost")) {
            const json& b = a["linear_boost"];
            require_keys(b, {"enabled", "iterations", "shrinkage"}, "algorithms.linear_boost.");
            if (b.contains("enabled")) cfg.algorithms.linear_boost = b["enabled"];
            if (b.contains("iterations")) {
                cfg.algorithms.linear_boost_options.iterations = b["iterations"].get<std::size_t>();
            }
            if (b.contains("shrinkage")) {
                cfg.algorithms.linear_boost_options.shrinkage = b["shrinkage"];
            }
        }
        if (a.contains("quantile_forest")) {
            const json& b = a["quantile_forest"];
            require_keys(b, {"enabled", "trees", "subsample_fraction", "min_leaf", "mtry",
                             "honest"},
                         "algorithms.quantile_forest.");
            ForestOptions& o = cfg.algorithms.forest_options;
            if (b.contains("enabled")) cfg.algorithms.quantile_forest = b["enabled"];
            if (b.contains("trees")) o.n_trees = b["trees"].get<std::size_t>();
            if (b.contains("subsample_fraction")) o.subsample_fraction = b["subsample_fraction"];
            if (b.contains("min_leaf")) o.min_leaf = b["min_leaf"].get<std::size_t>();
            if (b.contains("mtry")) o.mtry = b["mtry"].get<std::size_t>();
            if (b.contains("honest")) o.honest = b["honest"];
        }
        if (a.contains("gbm")) {
            const json& b = a["gbm"];
            require_keys(b, {"enabled", "trees", "max_depth", "min_leaf", "learning_rate",
                             "bag_fraction"},
                         "algorithms.gbm.");
            GbmOptions& o = cfg.algorithms.gbm_options;
            if (b.contains("enabled")) cfg.algorithms.gbm = b["enabled"];
            if (b.contains("trees")) o.n_trees = b["trees"].get<std::size_t>();
            if (b.contains("max_depth")) o.max_depth = b["max_depth"].get<int>();
            if (b.contains("min_leaf")) o.min_leaf = b["min_leaf"].get<std::size_t>();
            if (b.contains("learning_rate")) o.learning_rate = b["learning_rate"];
            if (b.contains("bag_fraction")) o.bag_fraction = b["bag_fraction"];
        }
        if (a.contains("qrnn")) {
            const json& b = a["qrnn"];
            require_keys(b, {"enabled", "restarts", "schedule_length",
                             "max_iterations_per_stage"},
                         "algorithms.qrnn.");
            QrnnOptions& o = cfg.algorithms.qrnn_options;
            if (b.contains("enabled")) cfg.algorithms.qrnn = b["enabled"];
            if (b.contains("restarts")) o.restarts = b["restarts"].get<std::size_t>();
            if (b.contains("schedule_length")) {
                o.schedule_length = b["schedule_length"].get<std::size_t>();
            }
            if (b.contains("max_iterations_per_stage")) {
                o.max_iterations_per_stage = b["max_iterations_per_stage"].get<std::size_t>();
            }
        }
        if (a.contains("combiners")) {
            require_keys(a["combiners"], {"enabled"}, "algorithms.combiners.");
            if (a["combiners"].contains("enabled")) {
                cfg.algorithms.combiners = a["combiners"]["enabled"];
            }
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_json(text);
}

namespace {

struct GaugeOutcome {
    std::string gauge_id;
    bool ok = false;
    std::string error;
    GaugeEvaluation evaluation;
    SupervisedSet samples;
    std::size_t n_samples = 0, n_train = 0, n_test = 0;
    std::size_t days_total = 0, days_missing = 0, days_excluded = 0, outliers_removed = 0;
    std::size_t qrnn_abandoned_restarts = 0;
    std::vector<std::pair<std::string, std::size_t>> crossing_repairs;
    std::vector<std::pair<std::string, double>> fit_seconds;
    std::vector<std::string> notes;
};

struct RunPlan {
    std::vector<std::string> included;  // algorithm ids in canonical order
    std::vector<bool> ranked;
    bool with_boost = false, with_forest = false, with_gbm = false, with_qrnn = false;
    bool with_combiners = false;
};

RunPlan make_plan(const AlgorithmSettings& a, std::vector<std::string>& warnings) {
    RunPlan plan;
    plan.with_boost = a.linear_boost;
    plan.with_forest = a.quantile_forest;
    plan.with_gbm = a.gbm;
    plan.with_qrnn = a.qrnn;
    const bool all_individual = a.linear_boost && a.quantile_forest && a.gbm && a.qrnn;
    plan.with_combiners = a.combiners && all_individual;
    if (a.combiners && !all_individual) {
        warnings.push_back(
            "combiners disabled: they need all five individual algorithms enabled");
    }
    // The benchmark is always fit; disabling it only drops it from ranks.
    plan.included.push_back("qr");
    plan.ranked.push_back(a.qr);
    if (plan.with_boost) {
        plan.included.push_back("linear_boost");
        plan.ranked.push_back(true);
    }
    if (plan.with_forest) {
        plan.included.push_back("quantile_forest");
        plan.ranked.push_back(true);
    }
    if (plan.with_gbm) {
        plan.included.push_back("gbm");
        plan.ranked.push_back(true);
    }
    if (plan.with_qrnn) {
        plan.included.push_back("qrnn");
        plan.ranked.push_back(true);
    }
    if (plan.with_combiners) {
        plan.included.push_back("mean_combiner");
        plan.ranked.push_back(true);
        plan.included.push_back("median_combiner");
        plan.ranked.push_back(true);
    }
    return plan;
}

DailySeries apply_exclusions(DailySeries daily, const std::vector<DateRangeExclusion>& exclusions,
                             std::size_t& excluded_days) {
    for (const DateRangeExclusion& e : exclusions) {
        if (!e.gauge.empty() && e.gauge != daily.gauge_id) continue;
        for (Date d = e.start; d <= e.end; d = d.next()) {
            if (!daily.covers(d)) continue;
            const std::size_t i = daily.index_of(d);
            if (daily.present[i]) {
                daily.present[i] = 0;
                daily.values[i] = std::numeric_limits<double>::quiet_NaN();
                ++excluded_days;
            }
        }
    }
    return daily;
}

GaugeOutcome evaluate_gauge(const ExperimentConfig& cfg, const RunPlan& plan,
                            const std::string& gauge_id, const std::string& path,
                            const MeteoTable& meteo,
                            const std::vector<QuantileLevel>& levels) {
    GaugeOutcome out;
    out.gauge_id = gauge_id;
    try {
        const RawFlowSeries raw = read_flow_csv(path, gauge_id);
        DailySeries daily = aggregate_daily(raw, cfg.max_missing_fraction);
        out.days_total = daily.size();
        out.days_missing = daily.size() - daily.present_count();
        daily = apply_exclusions(std::move(daily), cfg.exclusions, out.days_excluded);
        auto [cleaned, outliers] = remove_outliers(daily);
        out.outliers_removed = outliers.dates.size();

        SupervisedSet samples = build_supervised(cleaned, meteo);
        out.n_samples = samples.size();
        auto [train, test] = chronological_split(samples, cfg.train_fraction);
        out.n_train = train.size();
        out.n_test = test.size();
        const DatedSeries observed = test.targets();
        const std::uint64_t gauge_seed = derive_seed(cfg.seed, fnv1a64(gauge_id));
        const std::size_t n_levels = levels.size();
        const std::size_t n_test = test.size();

        std::vector<std::pair<std::string, ProbabilisticForecast>> forecasts;
        const auto repair_and_store = [&](const std::string& name, std::vector<double> raw_matrix) {
            CrossingRepair repaired =
                repair_crossing(test.dates, levels, std::move(raw_matrix));
            out.crossing_repairs.emplace_back(name, repaired.repaired_rows);
            forecasts.emplace_back(name, std::move(repaired.forecast));
        };

        {
            const auto t0 = std::chrono::steady_clock::now();
            std::vector<double> matrix(n_test * n_levels);
            for (std::size_t l = 0; l < n_levels; ++l) {
                const LinearQuantileModel model =
                    fit_linear_qr(train.data, levels[l], cfg.algorithms.qr_options);
                for (std::size_t i = 0; i < n_test; ++i) {
                    matrix[i * n_levels + l] = predict(model, test.data.row(i));
                }
            }
            out.fit_seconds.emplace_back("qr", elapsed_seconds(t0));
            repair_and_store("qr", std::move(matrix));
        }
        if (plan.with_boost) {
            const auto t0 = std::chrono::steady_clock::now();
            std::vector<double> matrix(n_test * n_levels);
            for (std::size_t l = 0; l < n_levels; ++l) {
                const LinearBoostModel model =
                    fit_linear_boost(train.data, levels[l], cfg.algorithms.linear_boost_options);
                for (std::size_t i = 0; i < n_test; ++i) {
                    matrix[i * n_levels + l] = predict(model, test.data.row(i));
                }
            }
            out.fit_seconds.emplace_back("linear_boost", elapsed_seconds(t0));
            repair_and_store("linear_boost", std::move(matrix));
        }
        if (plan.with_forest) {
            const auto t0 = std::chrono::steady_clock::now();
            const QuantileForestModel forest = fit_quantile_forest(
                train.data, cfg.algorithms.forest_options, derive_seed(gauge_seed, 200));
            std::vector<double> matrix(n_test * n_levels);
            for (std::size_t i = 0; i < n_test; ++i) {
                const std::vector<double> q =
                    predict_forest_quantiles(forest, test.data.row(i), levels);
                std::copy(q.begin(), q.end(), matrix.begin() + static_cast<std::ptrdiff_t>(i * n_levels));
            }
            out.fit_seconds.emplace_back("quantile_forest", elapsed_seconds(t0));
            repair_and_store("quantile_forest", std::move(matrix));
            out.evaluation.importance = forest_variable_importance(forest);
        }
        if (plan.with_gbm) {
            const auto t0 = std::chrono::steady_clock::now();
            std::vector<double> matrix(n_test * n_levels);
            for (std::size_t l = 0; l < n_levels; ++l) {
                const GbmQuantileModel model =
                    fit_gbm_quantile(train.data, levels[l], cfg.algorithms.gbm_options,
                                     derive_seed(gauge_seed, 100 + l));
                for (std::size_t i = 0; i < n_test; ++i) {
                    matrix[i * n_levels + l] = predict(model, test.data.row(i));
                }
            }
            out.fit_seconds.emplace_back("gbm", elapsed_seconds(t0));
            repair_and_store("gbm", std::move(matrix));
        }
        if (plan.with_qrnn) {
            const auto t0 = std::chrono::steady_clock::now();
            std::vector<double> matrix(n_test * n_levels);
            for (std::size_t l = 0; l < n_levels; ++l) {
                const QrnnModel model =
                    fit_qrnn(train.data, levels[l], cfg.algorithms.qrnn_options,
                             derive_seed(gauge_seed, 300 + l));
                out.qrnn_abandoned_restarts += model.trace.restarts_abandoned;
                for (std::size_t i = 0; i < n_test; ++i) {
                    matrix[i * n_levels + l] = predict(model, test.data.row(i));
                }
            }
            out.fit_seconds.emplace_back("qrnn", elapsed_seconds(t0));
            repair_and_store("qrnn", std::move(matrix));
        }
        if (plan.with_combiners) {
            ForecastPanel panel;
            panel.gauge_id = gauge_id;
            for (const auto& [name, forecast] : forecasts) {
                panel.algorithms.push_back(name);
                panel.forecasts.push_back(forecast);
            }
            CrossingRepair mean_combined = combine(panel, CombineRule::mean);
            out.crossing_repairs.emplace_back("mean_combiner", mean_combined.repaired_rows);
            forecasts.emplace_back("mean_combiner", std::move(mean_combined.forecast));
            CrossingRepair median_combined = combine(panel, CombineRule::median);
            out.crossing_repairs.emplace_back("median_combiner", median_combined.repaired_rows);
            forecasts.emplace_back("median_combiner", std::move(median_combined.forecast));
        }

        out.evaluation.gauge_id = gauge_id;
        out.evaluation.scores.assign(plan.included.size() * n_levels, 0.0);
        out.evaluation.n_scored.assign(plan.included.size() * n_levels, 0);
        out.evaluation.n_skipped.assign(plan.included.size() * n_levels, 0);
        for (std::size_t a = 0; a < plan.included.size(); ++a) {
            if (forecasts[a].first != plan.included[a]) {
                throw std::logic_error("internal: forecast order mismatch");
            }
            for (std::size_t l = 0; l < n_levels; ++l) {
                const ScoreCard card =
                    average_quantile_score(forecasts[a].second, observed, levels[l]);
                out.evaluation.scores[a * n_levels + l] = card.average_score;
                out.evaluation.n_scored[a * n_levels + l] = card.n;
                out.evaluation.n_skipped[a * n_levels + l] = card.skipped;
            }
        }
        out.samples = std::move(samples);
        out.ok = true;
    } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> list_gauges(const ExperimentConfig& cfg,
                                                             std::vector<std::string>& warnings) {
    std::vector<std::pair<std::string, std::string>> gauges;  // (id, path)
    if (!fs::is_directory(cfg.flow_dir)) {
        throw std::runtime_error("flow directory not found: " + cfg.flow_dir);
    }
    std::error_code ec;
    const fs::path meteo_path = fs::weakly_canonical(cfg.meteo_file, ec);
    for (const auto& entry : fs::directory_iterator(cfg.flow_dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".csv") continue;
        if (!ec && fs::weakly_canonical(entry.path(), ec) == meteo_path) continue;
        gauges.emplace_back(entry.path().stem().string(), entry.path().string());
    }
    std::sort(gauges.begin(), gauges.end());
    if (!cfg.include.empty()) {
        std::vector<std::pair<std::string, std::string>> filtered;
        for (const std::string& want : cfg.include) {
            bool found = false;
            for (const auto& g : gauges) {
                if (g.first == want) {
                    filtered.push_back(g);
                    found = true;
                    break;
                }
            }
            if (!found) warnings.push_back("included gauge not found: " + want);
        }
        std::sort(filtered.begin(), filtered.end());
        gauges = std::move(filtered);
    }
    if (!cfg.exclude.empty()) {
        std::erase_if(gauges, [&](const auto& g) {
            return std::find(cfg.exclude.begin(), cfg.exclude.end(), g.first) !=
                   cfg.exclude.end();
        });
    }
    return gauges;
}

json manifest_gauge_entry(const GaugeOutcome& o) {
    json g;
    g["gauge"] = o.gauge_id;
    g["status"] = o.ok ? "ok" : "skipped";
    if (!o.ok) {
        g["error"] = o.error;
        return g;
    }
    g["n_samples"] = o.n_samples;
    g["n_train"] = o.n_train;
    g["n_test"] = o.n_test;
    g["days_total"] = o.days_total;
    g["days_missing"] = o.days_missing;
    g["days_excluded"] = o.days_excluded;
    g["outliers_removed"] = o.outliers_removed;
    g["qrnn_abandoned_restarts"] = o.qrnn_abandoned_restarts;
    for (const auto& [name, count] : o.crossing_repairs) {
        g["crossing_repairs"][name] = count;
    }
    for (const auto& [name, seconds] : o.fit_seconds) {
        g["fit_seconds"][name] = seconds;
    }
    return g;
}

std::vector<GaugeOutcome> run_gauges(
    const ExperimentConfig& cfg, const RunPlan& plan,
    const std::vector<std::pair<std::string, std::string>>& gauges, const MeteoTable& meteo,
    const std::vector<QuantileLevel>& levels) {
    std::vector<GaugeOutcome> outcomes(gauges.size());
    const std::size_t workers = std::min<std::size_t>(std::max<std::size_t>(cfg.workers, 1),
                                                      std::max<std::size_t>(gauges.size(), 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < gauges.size(); ++i) {
            outcomes[i] =
                evaluate_gauge(cfg, plan, gauges[i].first, gauges[i].second, meteo, levels);
        }
        return outcomes;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= gauges.size()) break;
                outcomes[i] =
                    evaluate_gauge(cfg, plan, gauges[i].first, gauges[i].second, meteo, levels);
            }
        });
    }
    for (auto& t : pool) t.join();
    return outcomes;
}

void write_manifest(const ExperimentConfig& cfg, const std::vector<GaugeOutcome>& outcomes,
                    const std::vector<std::string>& warnings, double wall_seconds) {
    json manifest;
    manifest["code_version"] = kVersion;
    const std::string canonical = cfg.canonical_json();
    char hash[24];
    std::snprintf(hash, sizeof hash, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(canonical)));
    manifest["config_hash"] = hash;
    manifest["config"] = json::parse(canonical);
    manifest["wall_seconds"] = wall_seconds;
    for (const GaugeOutcome& o : outcomes) manifest["gauges"].push_back(manifest_gauge_entry(o));
    json jwarn = json::array();
    for (const std::string& w : warnings) jwarn.push_back(w);
    for (const GaugeOutcome& o : outcomes) {
        if (!o.ok) {
            jwarn.push_back("gauge " + o.gauge_id + " skipped: " + o.error);
            continue;
        }
        if (o.days_missing > 0) {
            jwarn.push_back("gauge " + o.gauge_id + ": " + std::to_string(o.days_missing) +
                            " day(s) missing after aggregation");
        }
        if (o.days_excluded > 0) {
            jwarn.push_back("gauge " + o.gauge_id + ": " + std::to_string(o.days_excluded) +
                            " day(s) excluded by configuration");
        }
        if (o.outliers_removed > 0) {
            jwarn.push_back("gauge " + o.gauge_id + ": " + std::to_string(o.outliers_removed) +
                            " outlier(s) removed");
        }
        if (o.qrnn_abandoned_restarts > 0) {
            jwarn.push_back("gauge " + o.gauge_id + ": " +
                            std::to_string(o.qrnn_abandoned_restarts) +
                            " abandoned qrnn restart(s)");
        }
        std::size_t repaired = 0;
        for (const auto& [name, count] : o.crossing_repairs) repaired += count;
        if (repaired > 0) {
            jwarn.push_back("gauge " + o.gauge_id + ": " + std::to_string(repaired) +
                            " crossing row(s) repaired across algorithms");
        }
    }
    manifest["warnings"] = jwarn;
    fs::create_directories(cfg.output_dir);
    std::ofstream out(fs::path(cfg.output_dir) / "manifest.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write manifest in " + cfg.output_dir);
    out << manifest.dump(2) << '\n';
}

}  // namespace

int cmd_run(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    std::vector<std::string> warnings;
    MeteoTable meteo;
    std::vector<std::pair<std::string, std::string>> gauges;
    try {
        meteo = read_meteo_csv(cfg.meteo_file);
        gauges = list_gauges(cfg, warnings);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    if (gauges.empty()) {
        std::cerr << "error: no gauge files selected in " << cfg.flow_dir << '\n';
        return 2;
    }
    std::vector<QuantileLevel> levels;
    for (double a : cfg.levels) levels.emplace_back(a);

    const RunPlan plan = make_plan(cfg.algorithms, warnings);
    std::vector<GaugeOutcome> outcomes = run_gauges(cfg, plan, gauges, meteo, levels);

    std::vector<GaugeEvaluation> evaluations;
    std::size_t skipped = 0;
    for (const GaugeOutcome& o : outcomes) {
        if (o.ok) {
            evaluations.push_back(o.evaluation);
        } else {
            ++skipped;
        }
    }
    write_manifest(cfg, outcomes, warnings, elapsed_seconds(t0));
    if (evaluations.empty()) {
        std::cerr << "error: every gauge was skipped\n";
        for (const GaugeOutcome& o : outcomes) {
            std::cerr << "  " << o.gauge_id << ": " << o.error << '\n';
        }
        return 1;
    }

    const EvaluationReport report = aggregate_report(evaluations, plan.included, levels, 0,
                                                     predictor_names(), plan.ranked);
    std::vector<std::size_t> order = report.importance_order();
    std::vector<CorrelationReport> correlations;
    for (const GaugeOutcome& o : outcomes) {
        if (o.ok) correlations.push_back(correlation_report(o.samples, order));
    }
    write_report_files(report, correlations, (fs::path(cfg.output_dir) / "reports").string());

    std::cout << "evaluated " << evaluations.size() << " gauge(s)";
    if (skipped > 0) std::cout << ", skipped " << skipped;
    std::cout << "; reports in " << (fs::path(cfg.output_dir) / "reports").string() << '\n';
    return skipped > 0 ? 1 : 0;
}

int cmd_importance(const ExperimentConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    cfg.validate();
    std::vector<std::string> warnings;
    MeteoTable meteo;
    std::vector<std::pair<std::string, std::string>> gauges;
    try {
        meteo = read_meteo_csv(cfg.meteo_file);
        gauges = list_gauges(cfg, warnings);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    if (gauges.empty()) {
        std::cerr << "error: no gauge files selected in " << cfg.flow_dir << '\n';
        return 2;
    }

    std::vector<GaugeOutcome> outcomes(gauges.size());
    std::vector<std::vector<double>> importances;
    std::vector<std::string> ok_ids;
    for (std::size_t i = 0; i < gauges.size(); ++i) {
        GaugeOutcome& out = outcomes[i];
        out.gauge_id = gauges[i].first;
        try {
            const RawFlowSeries raw = read_flow_csv(gauges[i].second, gauges[i].first);
            DailySeries daily = aggregate_daily(raw, cfg.max_missing_fraction);
            out.days_total = daily.size();
            out.days_missing = daily.size() - daily.present_count();
            daily = apply_exclusions(std::move(daily), cfg.exclusions, out.days_excluded);
            auto [cleaned, outliers] = remove_outliers(daily);
            out.outliers_removed = outliers.dates.size();
            SupervisedSet samples = build_supervised(cleaned, meteo);
            out.n_samples = samples.size();
            auto [train, test] = chronological_split(samples, cfg.train_fraction);
            out.n_train = train.size();
            out.n_test = test.size();
            const std::uint64_t gauge_seed = derive_seed(cfg.seed, fnv1a64(gauges[i].first));
            const auto tf = std::chrono::steady_clock::now();
            const QuantileForestModel forest = fit_quantile_forest(
                train.data, cfg.algorithms.forest_options, derive_seed(gauge_seed, 200));
            out.fit_seconds.emplace_back("quantile_forest", elapsed_seconds(tf));
            importances.push_back(forest_variable_importance(forest));
            ok_ids.push_back(gauges[i].first);
            out.ok = true;
        } catch (const std::exception& e) {
            out.ok = false;
            out.error = e.what();
        }
    }
    write_manifest(cfg, outcomes, warnings, elapsed_seconds(t0));
    if (ok_ids.empty()) {
        std::cerr << "error: every gauge was skipped\n";
        return 1;
    }
    const ImportanceTable table = build_importance_table(ok_ids, predictor_names(), importances);
    write_importance_files(table, (fs::path(cfg.output_dir) / "reports").string());
    std::cout << "importance for " << ok_ids.size() << " gauge(s) in "
              << (fs::path(cfg.output_dir) / "reports").string() << '\n';
    return ok_ids.size() < gauges.size() ? 1 : 0;
}

int cmd_synth(const std::string& scenario_path, const std::string& out_dir) {
    try {
        std::ifstream in(scenario_path);
        if (!in) throw std::invalid_argument("cannot open scenario file " + scenario_path);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        json j;
        try {
            j = json::parse(text);
        } catch (const json::exception& e) {
            throw std::invalid_argument(std::string("scenario: bad JSON: ") + e.what());
        }

        json base = j;
        base.erase("gauges");
        std::vector<SynthScenario> scenarios;
        if (j.contains("gauges")) {
            if (!j["gauges"].is_array() || j["gauges"].empty()) {
                throw std::invalid_argument("scenario: gauges must be a non-empty array");
            }
            for (const json& overrides : j["gauges"]) {
                json merged = base;
                merged.update(overrides);
                scenarios.push_back(parse_scenario_json(merged.dump()));
            }
        } else {
            scenarios.push_back(parse_scenario_json(base.dump()));
        }

        fs::create_directories(out_dir);
        const SynthScenario base_scenario = parse_scenario_json(base.dump());
        const MeteoTable meteo = generate_meteo_table(base_scenario);
        write_meteo_csv((fs::path(out_dir) / "meteo.csv").string(), meteo);
        for (const SynthScenario& sc : scenarios) {
            const auto [flow, oracle] = generate_flow(sc, meteo);
            write_daily_as_minute_csv((fs::path(out_dir) / (sc.gauge_id + ".csv")).string(),
                                      flow);
            save_oracle((fs::path(out_dir) / ("oracle_" + sc.gauge_id + ".json")).string(),
                        oracle);
        }
        std::cout << "wrote " << scenarios.size() << " gauge(s) + meteo.csv to " << out_dir
                  << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

int cmd_plotdata(const std::string& reports_dir, const std::string& out_dir) {
    try {
        write_plotdata(reports_dir, out_dir);
        std::cout << "plot data in " << out_dir << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace flowcast
