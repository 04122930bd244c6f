#pragma once

#include <string>
#include <vector>

#include "flowcast/ensemble.hpp"

namespace flowcast {

/// Report float convention: 6 significant digits, "NA" for NaN, fixed
/// C-locale formatting so reruns are byte-stable.
std::string format_report_float(double v);

/// Writes every evaluation table into `dir` (created if needed):
/// scores.csv, improvements.csv, ranks.csv, improvements_summary.csv,
/// ranks_summary.csv, improvements_overall.csv, importance.csv,
/// importance_mean_rank.csv, spearman_<gauge>.csv and summary.json.
void write_report_files(const EvaluationReport& report,
                        const std::vector<CorrelationReport>& correlations,
                        const std::string& dir);

/// Writes importance.csv and importance_mean_rank.csv, predictors ordered
/// most-important-first by mean rank.
void write_importance_files(const ImportanceTable& table, const std::string& dir);

/// Reshapes the written reports into tidy long-format tables
/// (improvements_long.csv, ranks_long.csv, importance_mean_rank_long.csv)
/// for external plotting.
void write_plotdata(const std::string& reports_dir, const std::string& out_dir);

}  // namespace flowcast
