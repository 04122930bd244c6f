#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowcast/dataset.hpp"
#include "flowcast/quantile.hpp"
#include "flowcast/stats.hpp"

namespace flowcast {

/// Thrown when a fit runs out of iteration budget while still improving.
struct ConvergenceError : std::runtime_error {
    explicit ConvergenceError(const std::string& what, double loss)
        : std::runtime_error(what), last_loss(loss) {}
    double last_loss;
};

struct LinearQrOptions {
    double loss_tolerance = 1e-8;            // relative loss change counted as converged
    double epsilon_floor = 1e-10;            // smoothing anneals down to here (sd-relative)
    std::size_t max_stage_iterations = 200;
    double grad_tolerance = 1e-9;
};

/// Linear-in-parameters quantile regression: coefficients minimizing the
/// mean pinball loss at one level. Reported in original units; the
/// standardization used during fitting is kept for audit.
struct LinearQuantileModel {
    QuantileLevel level{0.5};
    double intercept = 0.0;
    std::vector<double> coefficients;
    Standardizer standardizer;
    double train_loss = 0.0;  // mean pinball loss on the training set
};

/// Minimizes the mean pinball loss over an affine model by annealing a
/// Huber-smoothed surrogate down to epsilon <= 1e-10 of the target sd,
/// solving each stage to gradient tolerance. Requires n > p + 1. A design
/// with no varying feature degrades to the intercept-only fit (the
/// empirical quantile of the targets).
LinearQuantileModel fit_linear_qr(const Dataset& train, QuantileLevel a,
                                  const LinearQrOptions& options = {});

double predict(const LinearQuantileModel& model, std::span<const double> features);

struct BoostStep {
    std::uint32_t feature;
    double intercept;  // standardized space
    double slope;
};

struct LinearBoostOptions {
    std::size_t iterations = 2000;
    double shrinkage = 0.1;
    bool record_loss_trace = false;
};

/// Componentwise linear boosting: starts from the empirical target quantile
/// and repeatedly adds a shrunken single-feature least-squares fit to the
/// pinball negative gradient, choosing the feature with the lowest residual
/// sum of squares (ties to the lowest index). The step log replays to the
/// exact training-time fit.
struct LinearBoostModel {
    QuantileLevel level{0.5};
    double offset = 0.0;  // standardized-target units
    double shrinkage = 0.1;
    std::vector<BoostStep> steps;
    Standardizer feature_standardizer;
    double target_mean = 0.0;
    double target_sd = 1.0;
    std::vector<double> train_loss_trace;  // original units; offset-only first
};

LinearBoostModel fit_linear_boost(const Dataset& train, QuantileLevel a,
                                  const LinearBoostOptions& options = {});

/// Replays the step log; bit-identical to the training-time fit on
/// training rows.
double predict(const LinearBoostModel& model, std::span<const double> features);

void save_linear_qr(const std::string& path, const LinearQuantileModel& model);
LinearQuantileModel load_linear_qr(const std::string& path);
void save_linear_boost(const std::string& path, const LinearBoostModel& model);
LinearBoostModel load_linear_boost(const std::string& path);

}  // namespace flowcast
