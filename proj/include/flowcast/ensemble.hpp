#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "flowcast/quantile.hpp"
#include "flowcast/series.hpp"

namespace flowcast {

/// The forecasts of the five individual algorithms for one gauge, aligned
/// on dates and levels.
struct ForecastPanel {
    std::string gauge_id;
    std::vector<std::string> algorithms;
    std::vector<ProbabilisticForecast> forecasts;
};

enum class CombineRule { mean, median };

/// Per (date, level) arithmetic mean or median of the five individual
/// forecasts, crossing-repaired afterwards. Requires exactly five aligned
/// forecasts.
CrossingRepair combine(const ForecastPanel& panel, CombineRule rule);

/// Percentage reduction in average quantile score against the benchmark:
/// 100 * (bench - alg) / bench. Positive means better than the benchmark;
/// a perfect benchmark (score 0) leaves the improvement undefined.
double relative_improvement(double score_alg, double score_bench);

/// Competition ranks, 1 = lowest score; ties share the mean of the tied
/// positions. All scores must be finite.
std::vector<double> rank_algorithms(std::span<const double> scores);

/// Spearman rank correlation (Pearson on mid-ranks). Returns nullopt when
/// either side has zero rank variance.
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);

/// One gauge's scored experiment: scores laid out [algorithm][level],
/// plus the forest's predictor importance when available.
struct GaugeEvaluation {
    std::string gauge_id;
    std::vector<double> scores;
    std::vector<std::size_t> n_scored;
    std::vector<std::size_t> n_skipped;
    std::vector<double> importance;  // per predictor; empty if not computed
};

/// Cross-gauge evaluation tables. Cubes are row-major [gauge][algo][level];
/// aggregates are [algo][level].
struct EvaluationReport {
    std::vector<std::string> gauges;
    std::vector<std::string> algorithms;
    std::vector<double> levels;
    std::size_t benchmark = 0;       // index into algorithms
    std::vector<bool> ranked;        // benchmark fits even when unranked

    std::vector<double> scores;
    std::vector<double> improvements;
    std::vector<double> ranks;       // NaN for unranked algorithms
    std::vector<std::size_t> n_scored;
    std::vector<std::size_t> n_skipped;

    std::vector<double> mean_improvement;
    std::vector<double> median_improvement;
    std::vector<double> mean_rank;

    // Per-algorithm overall improvement, both collapse orders, both stats.
    std::vector<double> overall_mean_levels_first;
    std::vector<double> overall_mean_gauges_first;
    std::vector<double> overall_median_levels_first;   // median over gauges of level means
    std::vector<double> overall_median_gauges_first;   // mean over levels of gauge medians

    std::vector<std::string> features;
    std::vector<double> importance;            // [gauge][feature]
    std::vector<double> importance_rank;       // [gauge][feature], 1 = most important
    std::vector<double> importance_mean_rank;  // [feature]
    std::vector<double> importance_mean_value; // [feature]

    std::size_t cube_index(std::size_t g, std::size_t a, std::size_t l) const {
        return (g * algorithms.size() + a) * levels.size() + l;
    }
    std::size_t agg_index(std::size_t a, std::size_t l) const {
        return a * levels.size() + l;
    }

    /// Predictor indices sorted most-important-first by mean rank.
    std::vector<std::size_t> importance_order() const;
};

/// `ranked` selects the algorithms entering rank vectors (all when empty);
/// the benchmark always participates in improvements regardless.
EvaluationReport aggregate_report(const std::vector<GaugeEvaluation>& gauges,
                                  const std::vector<std::string>& algorithms,
                                  const std::vector<QuantileLevel>& levels,
                                  std::size_t benchmark_index,
                                  const std::vector<std::string>& features,
                                  const std::vector<bool>& ranked = {});

/// Per-gauge importance vectors with their ranks and cross-gauge means.
struct ImportanceTable {
    std::vector<std::string> gauges;
    std::vector<std::string> features;
    std::vector<double> importance;  // [gauge][feature]
    std::vector<double> rank;        // [gauge][feature], 1 = most important
    std::vector<double> mean_rank;   // [feature]
    std::vector<double> mean_value;  // [feature]

    std::vector<std::size_t> order_most_important_first() const;
};

ImportanceTable build_importance_table(const std::vector<std::string>& gauge_ids,
                                       const std::vector<std::string>& features,
                                       const std::vector<std::vector<double>>& importances);

/// Spearman correlations between the target and every predictor, ordered by
/// the supplied variable order (most important predictors first). NaN cells
/// mark undefined correlations.
struct CorrelationReport {
    std::string gauge_id;
    std::vector<std::string> variables;  // "target" then predictors
    std::vector<double> matrix;          // row-major, symmetric, unit diagonal

    double at(std::size_t i, std::size_t j) const { return matrix[i * variables.size() + j]; }
};

CorrelationReport correlation_report(const SupervisedSet& samples,
                                     const std::vector<std::size_t>& predictor_order);

}  // namespace flowcast
