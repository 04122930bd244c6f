#include "flowcast/ensemble.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "flowcast/stats.hpp"

namespace flowcast {

CrossingRepair combine(const ForecastPanel& panel, CombineRule rule) {
    if (panel.forecasts.size() != 5) {
        throw std::invalid_argument("combine: expected exactly five individual forecasts");
    }
    const ProbabilisticForecast& first = panel.forecasts.front();
    for (const ProbabilisticForecast& f : panel.forecasts) {
        if (f.dates != first.dates ||
            !std::equal(f.levels.begin(), f.levels.end(), first.levels.begin(),
                        first.levels.end(),
                        [](QuantileLevel l, QuantileLevel r) { return l == r; })) {
            throw std::invalid_argument("combine: forecasts are not aligned");
        }
    }
    std::vector<double> raw(first.values.size());
    std::array<double, 5> cell{};
    for (std::size_t k = 0; k < raw.size(); ++k) {
        for (std::size_t m = 0; m < 5; ++m) cell[m] = panel.forecasts[m].values[k];
        if (rule == CombineRule::mean) {
            raw[k] = (cell[0] + cell[1] + cell[2] + cell[3] + cell[4]) / 5.0;
        } else {
            std::sort(cell.begin(), cell.end());
            raw[k] = cell[2];
        }
    }
    return repair_crossing(first.dates, first.levels, std::move(raw));
}

double relative_improvement(double score_alg, double score_bench) {
    if (!(score_bench > 0.0)) {
        throw std::runtime_error(
            "relative_improvement: benchmark score is zero (improvement undefined)");
    }
    return 100.0 * (score_bench - score_alg) / score_bench;
}

std::vector<double> rank_algorithms(std::span<const double> scores) {
    for (double s : scores) {
        if (!std::isfinite(s)) throw std::invalid_argument("rank_algorithms: non-finite score");
    }
    return mid_ranks(scores);
}

std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("spearman: length mismatch");
    if (x.size() < 3) throw std::invalid_argument("spearman: needs at least 3 pairs");
    const std::vector<double> rx = mid_ranks(x);
    const std::vector<double> ry = mid_ranks(y);
    const double mx = mean(rx);
    const double my = mean(ry);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        const double dx = rx[i] - mx;
        const double dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

std::vector<std::size_t> EvaluationReport::importance_order() const {
    std::vector<std::size_t> order(features.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        if (importance_mean_rank[l] != importance_mean_rank[r]) {
            return importance_mean_rank[l] < importance_mean_rank[r];
        }
        return l < r;
    });
    return order;
}

EvaluationReport aggregate_report(const std::vector<GaugeEvaluation>& gauges,
                                  const std::vector<std::string>& algorithms,
                                  const std::vector<QuantileLevel>& levels,
                                  std::size_t benchmark_index,
                                  const std::vector<std::string>& features,
                                  const std::vector<bool>& ranked) {
    if (gauges.empty()) throw std::invalid_argument("aggregate_report: no gauges");
    if (benchmark_index >= algorithms.size()) {
        throw std::invalid_argument("aggregate_report: bad benchmark index");
    }
    const std::size_t n_gauges = gauges.size();
    const std::size_t n_algos = algorithms.size();
    const std::size_t n_levels = levels.size();
    constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

    EvaluationReport report;
    report.algorithms = algorithms;
    report.benchmark = benchmark_index;
    report.features = features;
    report.ranked = ranked.empty() ? std::vector<bool>(n_algos, true) : ranked;
    if (report.ranked.size() != n_algos) {
        throw std::invalid_argument("aggregate_report: ranked mask length mismatch");
    }
    for (QuantileLevel a : levels) report.levels.push_back(a.value());
    for (const GaugeEvaluation& g : gauges) {
        report.gauges.push_back(g.gauge_id);
        if (g.scores.size() != n_algos * n_levels) {
            throw std::invalid_argument("aggregate_report: score table shape mismatch");
        }
    }

    const std::size_t cube = n_gauges * n_algos * n_levels;
    report.scores.resize(cube);
    report.improvements.resize(cube);
    report.ranks.assign(cube, kNaN);
    report.n_scored.assign(cube, 0);
    report.n_skipped.assign(cube, 0);

    std::vector<std::size_t> ranked_indices;
    for (std::size_t a = 0; a < n_algos; ++a) {
        if (report.ranked[a]) ranked_indices.push_back(a);
    }

    std::vector<double> level_scores(ranked_indices.size());
    for (std::size_t g = 0; g < n_gauges; ++g) {
        for (std::size_t l = 0; l < n_levels; ++l) {
            const double bench = gauges[g].scores[benchmark_index * n_levels + l];
            for (std::size_t a = 0; a < n_algos; ++a) {
                const std::size_t flat = a * n_levels + l;
                const double s = gauges[g].scores[flat];
                report.scores[report.cube_index(g, a, l)] = s;
                report.improvements[report.cube_index(g, a, l)] =
                    relative_improvement(s, bench);
                if (!gauges[g].n_scored.empty()) {
                    report.n_scored[report.cube_index(g, a, l)] = gauges[g].n_scored[flat];
                }
                if (!gauges[g].n_skipped.empty()) {
                    report.n_skipped[report.cube_index(g, a, l)] = gauges[g].n_skipped[flat];
                }
            }
            for (std::size_t k = 0; k < ranked_indices.size(); ++k) {
                level_scores[k] = gauges[g].scores[ranked_indices[k] * n_levels + l];
            }
            const std::vector<double> r = rank_algorithms(level_scores);
            for (std::size_t k = 0; k < ranked_indices.size(); ++k) {
                report.ranks[report.cube_index(g, ranked_indices[k], l)] = r[k];
            }
        }
    }

    report.mean_improvement.resize(n_algos * n_levels);
    report.median_improvement.resize(n_algos * n_levels);
    report.mean_rank.assign(n_algos * n_levels, kNaN);
    std::vector<double> column(n_gauges);
    for (std::size_t a = 0; a < n_algos; ++a) {
        for (std::size_t l = 0; l < n_levels; ++l) {
            for (std::size_t g = 0; g < n_gauges; ++g) {
                column[g] = report.improvements[report.cube_index(g, a, l)];
            }
            report.mean_improvement[report.agg_index(a, l)] = mean(column);
            report.median_improvement[report.agg_index(a, l)] = quantile_type7(column, 0.5);
            if (report.ranked[a]) {
                for (std::size_t g = 0; g < n_gauges; ++g) {
                    column[g] = report.ranks[report.cube_index(g, a, l)];
                }
                report.mean_rank[report.agg_index(a, l)] = mean(column);
            }
        }
    }

    // Overall per-algorithm summaries under both collapse orders.
    report.overall_mean_levels_first.resize(n_algos);
    report.overall_mean_gauges_first.resize(n_algos);
    report.overall_median_levels_first.resize(n_algos);
    report.overall_median_gauges_first.resize(n_algos);
    std::vector<double> gauge_means(n_gauges);
    for (std::size_t a = 0; a < n_algos; ++a) {
        for (std::size_t g = 0; g < n_gauges; ++g) {
            double s = 0.0;
            for (std::size_t l = 0; l < n_levels; ++l) {
                s += report.improvements[report.cube_index(g, a, l)];
            }
            gauge_means[g] = s / static_cast<double>(n_levels);
        }
        report.overall_mean_levels_first[a] = mean(gauge_means);
        report.overall_median_levels_first[a] = quantile_type7(gauge_means, 0.5);

        double mean_of_level_stats = 0.0;
        double median_sum = 0.0;
        for (std::size_t l = 0; l < n_levels; ++l) {
            mean_of_level_stats += report.mean_improvement[report.agg_index(a, l)];
            median_sum += report.median_improvement[report.agg_index(a, l)];
        }
        report.overall_mean_gauges_first[a] = mean_of_level_stats / static_cast<double>(n_levels);
        report.overall_median_gauges_first[a] = median_sum / static_cast<double>(n_levels);
    }

    // Importance: per-gauge ranks (1 = most important), then means.
    const std::size_t n_features = features.size();
    report.importance.assign(n_gauges * n_features, std::numeric_limits<double>::quiet_NaN());
    report.importance_rank.assign(n_gauges * n_features,
                                  std::numeric_limits<double>::quiet_NaN());
    std::vector<std::string> with_importance_ids;
    std::vector<std::vector<double>> with_importance;
    std::vector<std::size_t> gauge_slot;
    for (std::size_t g = 0; g < n_gauges; ++g) {
        if (gauges[g].importance.empty()) continue;
        if (gauges[g].importance.size() != n_features) {
            throw std::invalid_argument("aggregate_report: importance length mismatch");
        }
        with_importance_ids.push_back(gauges[g].gauge_id);
        with_importance.push_back(gauges[g].importance);
        gauge_slot.push_back(g);
    }
    const ImportanceTable table =
        build_importance_table(with_importance_ids, features, with_importance);
    report.importance_mean_rank = table.mean_rank;
    report.importance_mean_value = table.mean_value;
    for (std::size_t k = 0; k < gauge_slot.size(); ++k) {
        for (std::size_t j = 0; j < n_features; ++j) {
            report.importance[gauge_slot[k] * n_features + j] = table.importance[k * n_features + j];
            report.importance_rank[gauge_slot[k] * n_features + j] = table.rank[k * n_features + j];
        }
    }
    return report;
}

std::vector<std::size_t> ImportanceTable::order_most_important_first() const {
    std::vector<std::size_t> order(features.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        if (mean_rank[l] != mean_rank[r]) return mean_rank[l] < mean_rank[r];
        return l < r;
    });
    return order;
}

ImportanceTable build_importance_table(const std::vector<std::string>& gauge_ids,
                                       const std::vector<std::string>& features,
                                       const std::vector<std::vector<double>>& importances) {
    if (gauge_ids.size() != importances.size()) {
        throw std::invalid_argument("importance table: gauges/importances length mismatch");
    }
    const std::size_t n_features = features.size();
    ImportanceTable table;
    table.gauges = gauge_ids;
    table.features = features;
    table.mean_rank.assign(n_features, 0.0);
    table.mean_value.assign(n_features, 0.0);
    std::vector<double> negated(n_features);
    for (const std::vector<double>& imp : importances) {
        if (imp.size() != n_features) {
            throw std::invalid_argument("importance table: importance length mismatch");
        }
        for (std::size_t j = 0; j < n_features; ++j) negated[j] = -imp[j];
        const std::vector<double> r = mid_ranks(negated);
        table.importance.insert(table.importance.end(), imp.begin(), imp.end());
        table.rank.insert(table.rank.end(), r.begin(), r.end());
        for (std::size_t j = 0; j < n_features; ++j) {
            table.mean_rank[j] += r[j];
            table.mean_value[j] += imp[j];
        }
    }
    if (!importances.empty()) {
        for (std::size_t j = 0; j < n_features; ++j) {
            table.mean_rank[j] /= static_cast<double>(importances.size());
            table.mean_value[j] /= static_cast<double>(importances.size());
        }
    }
    return table;
}

CorrelationReport correlation_report(const SupervisedSet& samples,
                                     const std::vector<std::size_t>& predictor_order) {
    const std::size_t n = samples.size();
    const std::size_t p = samples.data.n_features();
    if (predictor_order.size() != p) {
        throw std::invalid_argument("correlation_report: bad predictor order");
    }
    if (n < 3) throw std::invalid_argument("correlation_report: needs at least 3 samples");

    CorrelationReport report;
    report.gauge_id = samples.gauge_id;
    report.variables.push_back("target");
    for (std::size_t j : predictor_order) {
        report.variables.push_back(samples.data.feature_names[j]);
    }

    const std::size_t v = p + 1;
    std::vector<std::vector<double>> ranked(v);
    std::vector<double> column(n);
    ranked[0] = mid_ranks(samples.data.y);
    for (std::size_t k = 0; k < p; ++k) {
        for (std::size_t i = 0; i < n; ++i) column[i] = samples.data.at(i, predictor_order[k]);
        ranked[k + 1] = mid_ranks(column);
    }

    std::vector<double> centered_means(v);
    for (std::size_t k = 0; k < v; ++k) centered_means[k] = mean(ranked[k]);

    report.matrix.assign(v * v, std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < v; ++i) {
        report.matrix[i * v + i] = 1.0;
        for (std::size_t j = i + 1; j < v; ++j) {
            double sxy = 0.0, sxx = 0.0, syy = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                const double dx = ranked[i][s] - centered_means[i];
                const double dy = ranked[j][s] - centered_means[j];
                sxy += dx * dy;
                sxx += dx * dx;
                syy += dy * dy;
            }
            const double rho = (sxx > 0.0 && syy > 0.0)
                                   ? sxy / std::sqrt(sxx * syy)
                                   : std::numeric_limits<double>::quiet_NaN();
            report.matrix[i * v + j] = rho;
            report.matrix[j * v + i] = rho;
        }
    }
    return report;
}

}  // namespace flowcast
