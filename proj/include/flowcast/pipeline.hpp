#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flowcast/dates.hpp"
#include "flowcast/linear.hpp"
#include "flowcast/qrnn.hpp"
#include "flowcast/trees.hpp"

namespace flowcast {

inline constexpr const char* kVersion = "flowcast 0.1.0";

/// Inclusive date range marked missing before outlier removal; an empty
/// gauge id applies to every gauge.
struct DateRangeExclusion {
    std::string gauge;
    Date start{0};
    Date end{0};
};

struct AlgorithmSettings {
    bool qr = true;
    bool linear_boost = true;
    bool quantile_forest = true;
    bool gbm = true;
    bool qrnn = true;
    bool combiners = true;
    LinearQrOptions qr_options;
    LinearBoostOptions linear_boost_options;
    GbmOptions gbm_options;
    ForestOptions forest_options;
    QrnnOptions qrnn_options;
};

struct ExperimentConfig {
    std::string flow_dir;
    std::string meteo_file;
    std::string output_dir = "out";
    std::vector<std::string> include;  // empty = every gauge in flow_dir
    std::vector<std::string> exclude;
    std::vector<DateRangeExclusion> exclusions;
    std::vector<double> levels = {0.025, 0.10, 0.50, 0.90, 0.975};
    double train_fraction = 0.5;
    double max_missing_fraction = 0.20;
    std::uint64_t seed = 1;
    std::size_t workers = 1;
    AlgorithmSettings algorithms;

    /// Canonical JSON echo of every effective field; hashed into the
    /// manifest and byte-stable across runs.
    std::string canonical_json() const;
    void validate() const;
};

/// Parses the experiment configuration; unknown keys anywhere are rejected
/// with a message naming the key.
ExperimentConfig parse_config_json(const std::string& text);
ExperimentConfig load_config_file(const std::string& path);

/// Canonical algorithm ids in report order (benchmark first).
const std::vector<std::string>& algorithm_names();

/// Full experiment: ingest, clean, build features, fit the seven systems
/// per gauge, forecast the test half, score and emit reports under
/// <output_dir>/reports plus <output_dir>/manifest.json.
/// Returns 0 on success, 1 when any gauge was skipped, 2 on unusable inputs.
int cmd_run(const ExperimentConfig& config);

/// Forest fitting and variable importance only.
int cmd_importance(const ExperimentConfig& config);

/// Generates synthetic gauge CSVs (1-minute flow + daily meteo + oracle
/// parameter files) from a scenario JSON into out_dir.
int cmd_synth(const std::string& scenario_path, const std::string& out_dir);

/// Reshapes written reports into plot-ready long tables.
int cmd_plotdata(const std::string& reports_dir, const std::string& out_dir);

}  // namespace flowcast
