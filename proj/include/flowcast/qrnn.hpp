#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowcast/dataset.hpp"
#include "flowcast/quantile.hpp"
#include "flowcast/stats.hpp"

namespace flowcast {

/// Pinball loss with the kink replaced by a Huber ramp of half-width
/// epsilon: the |u| term becomes u^2/(2 eps) inside [-eps, eps] and
/// |u| - eps/2 outside. Continuous, once-differentiable in the prediction,
/// and exactly the pinball loss at epsilon = 0.
double smoothed_pinball(double predicted, double observed, QuantileLevel a, double epsilon);

/// Derivative of smoothed_pinball with respect to the prediction.
double smoothed_pinball_grad(double predicted, double observed, QuantileLevel a,
                             double epsilon);

/// Mean smoothed pinball loss of the one-node network on pre-standardized
/// data, with its analytic gradient. Parameter layout:
/// [w_1..w_p, hidden_bias, output_weight, output_bias]. Exposed so the
/// gradient can be verified against finite differences.
double qrnn_loss_and_gradient(std::span<const double> z, std::span<const double> targets,
                              std::size_t n, std::size_t p, QuantileLevel a, double epsilon,
                              std::span<const double> theta, std::span<double> grad);

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct QrnnOptions {
    std::size_t restarts = 5;
    std::size_t schedule_length = 12;          // epsilon = sd * 2^-1 .. 2^-12
    std::size_t max_iterations_per_stage = 500;
    double grad_tolerance = 1e-6;
    double init_range = 0.5;                   // weights start in +-init_range
};

struct QrnnTrace {
    double final_smoothed_loss = 0.0;
    std::vector<double> epsilon_schedule;
    std::size_t restarts_used = 0;
    std::size_t restarts_abandoned = 0;
};

/// One hidden sigmoid node, linear output, trained on standardized inputs
/// and targets by annealed minimization of the smoothed pinball loss.
struct QrnnModel {
    QuantileLevel level{0.5};
    std::vector<double> input_weights;  // one per feature, standardized space
    double hidden_bias = 0.0;
    double output_weight = 0.0;
    double output_bias = 0.0;
    Standardizer feature_standardizer;
    double target_mean = 0.0;
    double target_sd = 1.0;
    QrnnTrace trace;
};

/// Fits with `restarts` seeded initializations; each restart anneals epsilon
/// down the schedule, warm-starting every stage, and the restart with the
/// lowest final-stage loss wins (ties to the earliest restart). A restart
/// whose loss goes non-finite is abandoned and counted; all abandoned is an
/// error.
QrnnModel fit_qrnn(const Dataset& train, QuantileLevel a, const QrnnOptions& options = {},
                   std::uint64_t seed = 1);

double predict(const QrnnModel& model, std::span<const double> features);

void save_qrnn(const std::string& path, const QrnnModel& model);
QrnnModel load_qrnn(const std::string& path);

}  // namespace flowcast
