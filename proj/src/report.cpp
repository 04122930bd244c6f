#include "flowcast/report.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "flowcast/csv.hpp"

namespace flowcast {

namespace fs = std::filesystem;

std::string format_report_float(double v) {
    if (std::isnan(v)) return "NA";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

namespace {

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

nlohmann::json json_or_null(double v) {
    if (std::isnan(v)) return nullptr;
    return v;
}

}  // namespace

void write_report_files(const EvaluationReport& report,
                        const std::vector<CorrelationReport>& correlations,
                        const std::string& dir) {
    fs::create_directories(dir);
    const std::size_t n_gauges = report.gauges.size();
    const std::size_t n_algos = report.algorithms.size();
    const std::size_t n_levels = report.levels.size();
    nlohmann::json summary;
    summary["benchmark"] = report.algorithms[report.benchmark];
    summary["algorithms"] = report.algorithms;
    summary["gauges"] = report.gauges;
    summary["levels"] = report.levels;

    {
        auto out = open_out(fs::path(dir) / "scores.csv");
        out << "gauge,algorithm,level,avg_quantile_score,n,skipped\n";
        auto& rows = summary["scores"];
        for (std::size_t g = 0; g < n_gauges; ++g) {
            for (std::size_t a = 0; a < n_algos; ++a) {
                for (std::size_t l = 0; l < n_levels; ++l) {
                    const std::size_t i = report.cube_index(g, a, l);
                    out << report.gauges[g] << ',' << report.algorithms[a] << ','
                        << format_report_float(report.levels[l]) << ','
                        << format_report_float(report.scores[i]) << ',' << report.n_scored[i]
                        << ',' << report.n_skipped[i] << '\n';
                    rows.push_back({{"gauge", report.gauges[g]},
                                    {"algorithm", report.algorithms[a]},
                                    {"level", report.levels[l]},
                                    {"score", report.scores[i]},
                                    {"n", report.n_scored[i]},
                                    {"skipped", report.n_skipped[i]}});
                }
            }
        }
    }

    {
        auto out = open_out(fs::path(dir) / "improvements.csv");
        out << "gauge,algorithm,level,improvement_pct\n";
        auto& rows = summary["improvements"];
        for (std::size_t g = 0; g < n_gauges; ++g) {
            for (std::size_t a = 0; a < n_algos; ++a) {
                for (std::size_t l = 0; l < n_levels; ++l) {
                    const double v = report.improvements[report.cube_index(g, a, l)];
                    out << report.gauges[g] << ',' << report.algorithms[a] << ','
                        << format_report_float(report.levels[l]) << ','
                        << format_report_float(v) << '\n';
                    rows.push_back({{"gauge", report.gauges[g]},
                                    {"algorithm", report.algorithms[a]},
                                    {"level", report.levels[l]},
                                    {"improvement_pct", v}});
                }
            }
        }
    }

    {
        auto out = open_out(fs::path(dir) / "ranks.csv");
        out << "gauge,level,algorithm,rank\n";
        auto& rows = summary["ranks"];
        for (std::size_t g = 0; g < n_gauges; ++g) {
            for (std::size_t l = 0; l < n_levels; ++l) {
                for (std::size_t a = 0; a < n_algos; ++a) {
                    if (!report.ranked[a]) continue;
                    const double v = report.ranks[report.cube_index(g, a, l)];
                    out << report.gauges[g] << ',' << format_report_float(report.levels[l])
                        << ',' << report.algorithms[a] << ',' << format_report_float(v) << '\n';
                    rows.push_back({{"gauge", report.gauges[g]},
                                    {"level", report.levels[l]},
                                    {"algorithm", report.algorithms[a]},
                                    {"rank", v}});
                }
            }
        }
    }

    {
        auto out = open_out(fs::path(dir) / "improvements_summary.csv");
        out << "algorithm,level,mean,median\n";
        auto& rows = summary["improvements_summary"];
        for (std::size_t a = 0; a < n_algos; ++a) {
            for (std::size_t l = 0; l < n_levels; ++l) {
                const std::size_t i = report.agg_index(a, l);
                out << report.algorithms[a] << ',' << format_report_float(report.levels[l])
                    << ',' << format_report_float(report.mean_improvement[i]) << ','
                    << format_report_float(report.median_improvement[i]) << '\n';
                rows.push_back({{"algorithm", report.algorithms[a]},
                                {"level", report.levels[l]},
                                {"mean", report.mean_improvement[i]},
                                {"median", report.median_improvement[i]}});
            }
        }
    }

    {
        auto out = open_out(fs::path(dir) / "ranks_summary.csv");
        out << "algorithm,level,mean_rank\n";
        auto& rows = summary["ranks_summary"];
        for (std::size_t a = 0; a < n_algos; ++a) {
            if (!report.ranked[a]) continue;
            for (std::size_t l = 0; l < n_levels; ++l) {
                const double v = report.mean_rank[report.agg_index(a, l)];
                out << report.algorithms[a] << ',' << format_report_float(report.levels[l])
                    << ',' << format_report_float(v) << '\n';
                rows.push_back({{"algorithm", report.algorithms[a]},
                                {"level", report.levels[l]},
                                {"mean_rank", v}});
            }
        }
    }

    {
        // Whether levels or gauges collapse first is ambiguous for medians;
        // both orderings are emitted, labeled.
        auto out = open_out(fs::path(dir) / "improvements_overall.csv");
        out << "algorithm,statistic,ordering,value\n";
        auto& rows = summary["improvements_overall"];
        const auto emit = [&](std::size_t a, const char* stat, const char* ordering, double v) {
            out << report.algorithms[a] << ',' << stat << ',' << ordering << ','
                << format_report_float(v) << '\n';
            rows.push_back({{"algorithm", report.algorithms[a]},
                            {"statistic", stat},
                            {"ordering", ordering},
                            {"value", v}});
        };
        for (std::size_t a = 0; a < n_algos; ++a) {
            emit(a, "mean", "levels_first", report.overall_mean_levels_first[a]);
            emit(a, "mean", "gauges_first", report.overall_mean_gauges_first[a]);
            emit(a, "median", "levels_first", report.overall_median_levels_first[a]);
            emit(a, "median", "gauges_first", report.overall_median_gauges_first[a]);
        }
    }

    ImportanceTable table;
    table.features = report.features;
    table.mean_rank = report.importance_mean_rank;
    table.mean_value = report.importance_mean_value;
    for (std::size_t g = 0; g < n_gauges; ++g) {
        const std::size_t base = g * report.features.size();
        if (report.features.empty() || std::isnan(report.importance[base])) continue;
        table.gauges.push_back(report.gauges[g]);
        table.importance.insert(table.importance.end(), report.importance.begin() + base,
                                report.importance.begin() + base + report.features.size());
        table.rank.insert(table.rank.end(), report.importance_rank.begin() + base,
                          report.importance_rank.begin() + base + report.features.size());
    }
    write_importance_files(table, dir);
    {
        auto& rows = summary["importance"];
        const std::vector<std::size_t> order = table.order_most_important_first();
        for (std::size_t g = 0; g < table.gauges.size(); ++g) {
            for (std::size_t j : order) {
                rows.push_back({{"gauge", table.gauges[g]},
                                {"feature", table.features[j]},
                                {"importance", table.importance[g * table.features.size() + j]},
                                {"rank", table.rank[g * table.features.size() + j]}});
            }
        }
        auto& mean_rows = summary["importance_mean_rank"];
        for (std::size_t j : order) {
            mean_rows.push_back({{"feature", table.features[j]},
                                 {"mean_rank", table.mean_rank[j]},
                                 {"mean_importance", table.mean_value[j]}});
        }
    }

    for (const CorrelationReport& corr : correlations) {
        auto out = open_out(fs::path(dir) / ("spearman_" + corr.gauge_id + ".csv"));
        out << "variable";
        for (const std::string& v : corr.variables) out << ',' << v;
        out << '\n';
        const std::size_t v = corr.variables.size();
        for (std::size_t i = 0; i < v; ++i) {
            out << corr.variables[i];
            for (std::size_t j = 0; j < v; ++j) {
                out << ',' << format_report_float(corr.at(i, j));
            }
            out << '\n';
        }
        auto& entry = summary["spearman"][corr.gauge_id];
        entry["variables"] = corr.variables;
        auto& matrix = entry["matrix"];
        for (std::size_t i = 0; i < v; ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t j = 0; j < v; ++j) row.push_back(json_or_null(corr.at(i, j)));
            matrix.push_back(std::move(row));
        }
    }

    auto out = open_out(fs::path(dir) / "summary.json");
    out << summary.dump(2) << '\n';
}

void write_importance_files(const ImportanceTable& table, const std::string& dir) {
    fs::create_directories(dir);
    const std::vector<std::size_t> order = table.order_most_important_first();
    {
        auto out = open_out(fs::path(dir) / "importance.csv");
        out << "gauge,feature,importance,rank\n";
        for (std::size_t g = 0; g < table.gauges.size(); ++g) {
            for (std::size_t j : order) {
                out << table.gauges[g] << ',' << table.features[j] << ','
                    << format_report_float(table.importance[g * table.features.size() + j])
                    << ','
                    << format_report_float(table.rank[g * table.features.size() + j]) << '\n';
            }
        }
    }
    {
        auto out = open_out(fs::path(dir) / "importance_mean_rank.csv");
        out << "feature,mean_rank,mean_importance\n";
        for (std::size_t j : order) {
            out << table.features[j] << ',' << format_report_float(table.mean_rank[j]) << ','
                << format_report_float(table.mean_value[j]) << '\n';
        }
    }
}

void write_plotdata(const std::string& reports_dir, const std::string& out_dir) {
    const fs::path reports(reports_dir);
    if (!fs::exists(reports / "improvements_summary.csv") ||
        !fs::exists(reports / "ranks.csv")) {
        throw std::runtime_error("plotdata: reports not found in " + reports_dir);
    }
    fs::create_directories(out_dir);

    {
        const auto rows = read_csv_rows((reports / "improvements_summary.csv").string(),
                                        "algorithm,level,mean,median");
        auto out = open_out(fs::path(out_dir) / "improvements_long.csv");
        out << "algorithm,level,statistic,value\n";
        for (const auto& row : rows) {
            out << row[0] << ',' << row[1] << ",mean," << row[2] << '\n';
        }
        for (const auto& row : rows) {
            out << row[0] << ',' << row[1] << ",median," << row[3] << '\n';
        }
    }

    {
        const auto rows =
            read_csv_rows((reports / "ranks.csv").string(), "gauge,level,algorithm,rank");
        auto out = open_out(fs::path(out_dir) / "ranks_long.csv");
        out << "gauge,level,algorithm,rank\n";
        for (const auto& row : rows) {
            out << row[0] << ',' << row[1] << ',' << row[2] << ',' << row[3] << '\n';
        }
    }

    if (fs::exists(reports / "importance_mean_rank.csv")) {
        const auto rows = read_csv_rows((reports / "importance_mean_rank.csv").string(),
                                        "feature,mean_rank,mean_importance");
        auto out = open_out(fs::path(out_dir) / "importance_mean_rank_long.csv");
        out << "feature,statistic,value\n";
        for (const auto& row : rows) {
            out << row[0] << ",mean_rank," << row[1] << '\n';
        }
        for (const auto& row : rows) {
            out << row[0] << ",mean_importance," << row[2] << '\n';
        }
    }
}

}  // namespace flowcast
