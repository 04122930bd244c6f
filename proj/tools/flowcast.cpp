#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "flowcast/pipeline.hpp"

int main(int argc, char** argv) {
    CLI::App app{"flowcast: probabilistic one-day-ahead water demand forecasting"};
    app.require_subcommand(1);

    std::string config_path, out_dir, reports_dir;
    std::size_t workers = 0;
    std::uint64_t seed = 0;
    bool seed_set = false, workers_set = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "experiment configuration (JSON)")->required();
        sub->add_option("--out", out_dir, "output directory (overrides config)");
        sub->add_option("--workers", workers, "worker threads (overrides config)")
            ->each([&](const std::string&) { workers_set = true; });
        sub->add_option("--seed", seed, "master seed (overrides config)")
            ->each([&](const std::string&) { seed_set = true; });
    };

    CLI::App* run = app.add_subcommand("run", "run the full experiment and emit reports");
    add_common(run);
    CLI::App* importance =
        app.add_subcommand("importance", "fit forests only and emit predictor importance");
    add_common(importance);

    CLI::App* synth = app.add_subcommand("synth", "generate synthetic gauge data");
    synth->add_option("--config", config_path, "scenario description (JSON)")->required();
    synth->add_option("--out", out_dir, "output directory")->required();

    CLI::App* plotdata = app.add_subcommand("plotdata", "reshape reports into long tables");
    plotdata->add_option("--reports", reports_dir, "reports directory from a run")->required();
    plotdata->add_option("--out", out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed() || importance->parsed()) {
            flowcast::ExperimentConfig cfg = flowcast::load_config_file(config_path);
            if (!out_dir.empty()) cfg.output_dir = out_dir;
            if (workers_set) cfg.workers = workers;
            if (seed_set) cfg.seed = seed;
            return run->parsed() ? flowcast::cmd_run(cfg) : flowcast::cmd_importance(cfg);
        }
        if (synth->parsed()) return flowcast::cmd_synth(config_path, out_dir);
        if (plotdata->parsed()) return flowcast::cmd_plotdata(reports_dir, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
