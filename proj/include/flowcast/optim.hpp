#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace flowcast {

/// Objective callback: fills grad (same length as x) and returns f(x).
using Objective = std::function<double(const std::vector<double>& x, std::vector<double>& grad)>;

struct OptimOptions {
    std::size_t max_iterations = 500;
    double grad_tolerance = 1e-6;  // on the euclidean gradient norm
    std::size_t memory = 8;        // L-BFGS history pairs
    bool record_trace = false;
};

struct OptimResult {
    std::vector<double> x;
    double fx = 0.0;
    std::size_t iterations = 0;
    bool converged = false;        // gradient tolerance reached
    bool finite = true;            // false if the objective went non-finite
    std::vector<double> trace;     // f at x0 and after each accepted step
};

/// Limited-memory BFGS with Armijo backtracking. Accepted steps strictly
/// decrease f; the search direction falls back to steepest descent whenever
/// the curvature history is unusable. Deterministic for a deterministic
/// objective.
OptimResult lbfgs_minimize(const Objective& objective, std::vector<double> x0,
                           const OptimOptions& options = {});

}  // namespace flowcast
