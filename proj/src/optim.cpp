#include "flowcast/optim.hpp"

#include <cmath>
#include <deque>

namespace flowcast {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

struct Pair {
    std::vector<double> s;  // x_{k+1} - x_k
    std::vector<double> y;  // g_{k+1} - g_k
    double rho;             // 1 / (y . s)
};

// Two-loop recursion; returns the descent direction -H g.
std::vector<double> lbfgs_direction(const std::deque<Pair>& history,
                                    const std::vector<double>& grad) {
    std::vector<double> q = grad;
    std::vector<double> alpha(history.size());
    for (std::size_t k = history.size(); k-- > 0;) {
        alpha[k] = history[k].rho * dot(history[k].s, q);
        for (std::size_t i = 0; i < q.size(); ++i) q[i] -= alpha[k] * history[k].y[i];
    }
    if (!history.empty()) {
        const auto& last = history.back();
        const double yy = dot(last.y, last.y);
        if (yy > 0.0) {
            const double gamma = dot(last.s, last.y) / yy;
            for (double& v : q) v *= gamma;
        }
    }
    for (std::size_t k = 0; k < history.size(); ++k) {
        const double beta = history[k].rho * dot(history[k].y, q);
        for (std::size_t i = 0; i < q.size(); ++i) {
            q[i] += (alpha[k] - beta) * history[k].s[i];
        }
    }
    for (double& v : q) v = -v;
    return q;
}

}  // namespace

OptimResult lbfgs_minimize(const Objective& objective, std::vector<double> x0,
                           const OptimOptions& options) {
    OptimResult result;
    const std::size_t dim = x0.size();
    std::vector<double> grad(dim, 0.0);
    double fx = objective(x0, grad);
    if (!std::isfinite(fx)) {
        result.x = std::move(x0);
        result.fx = fx;
        result.finite = false;
        return result;
    }
    if (options.record_trace) result.trace.push_back(fx);

    std::deque<Pair> history;
    std::vector<double> x = std::move(x0);
    std::vector<double> x_new(dim), grad_new(dim);

    std::size_t iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        const double gnorm = norm2(grad);
        if (gnorm <= options.grad_tolerance) {
            result.converged = true;
            break;
        }
        std::vector<double> direction = lbfgs_direction(history, grad);
        double descent = dot(grad, direction);
        if (!(descent < 0.0) || !std::isfinite(descent)) {
            // Unusable curvature history; restart from steepest descent.
            history.clear();
            for (std::size_t i = 0; i < dim; ++i) direction[i] = -grad[i];
            descent = -gnorm * gnorm;
        }

        // Armijo backtracking.
        constexpr double c1 = 1e-4;
        double step = 1.0;
        bool accepted = false;
        double f_new = fx;
        for (int half = 0; half < 50; ++half) {
            for (std::size_t i = 0; i < dim; ++i) x_new[i] = x[i] + step * direction[i];
            f_new = objective(x_new, grad_new);
            if (std::isfinite(f_new) && f_new <= fx + c1 * step * descent) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // no further progress at this scale

        Pair pair;
        pair.s.resize(dim);
        pair.y.resize(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            pair.s[i] = x_new[i] - x[i];
            pair.y[i] = grad_new[i] - grad[i];
        }
        const double sy = dot(pair.s, pair.y);
        if (sy > 1e-12 * norm2(pair.s) * norm2(pair.y)) {
            pair.rho = 1.0 / sy;
            history.push_back(std::move(pair));
            if (history.size() > options.memory) history.pop_front();
        }

        x.swap(x_new);
        grad.swap(grad_new);
        fx = f_new;
        if (options.record_trace) result.trace.push_back(fx);
        if (!std::isfinite(fx)) {
            result.finite = false;
            break;
        }
    }

    result.x = std::move(x);
    result.fx = fx;
    result.iterations = iter;
    result.finite = result.finite && std::isfinite(fx);
    return result;
}

}  // namespace flowcast
