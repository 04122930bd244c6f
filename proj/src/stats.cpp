#include "flowcast/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace flowcast {

double mean(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean: empty input");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double stdev(std::span<const double> v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size()));
}

double quantile_type7_sorted(std::span<const double> sorted, double a) {
    const std::size_t n = sorted.size();
    if (n == 0) throw std::invalid_argument("quantile: empty input");
    if (n == 1) return sorted[0];
    const double h = a * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(std::clamp(std::floor(h), 0.0,
                                                        static_cast<double>(n - 1)));
    if (lo >= n - 1) return sorted[n - 1];
    const double frac = h - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile_type7(std::vector<double> values, double a) {
    std::sort(values.begin(), values.end());
    return quantile_type7_sorted(values, a);
}

double pinball_minimizer_quantile(std::vector<double> values, double a) {
    const std::size_t n = values.size();
    if (n == 0) throw std::invalid_argument("quantile: empty input");
    std::sort(values.begin(), values.end());
    const double na = a * static_cast<double>(n);
    const double k = std::round(na);
    if (std::abs(na - k) <= 1e-9 && k >= 1.0 && k <= static_cast<double>(n - 1)) {
        // Flat minimizer interval [x_(k), x_(k+1)]; type-7 lies inside it.
        return quantile_type7_sorted(values, a);
    }
    const auto idx = static_cast<std::size_t>(std::clamp(
        std::ceil(na), 1.0, static_cast<double>(n)));
    return values[idx - 1];
}

double weighted_quantile_type7(std::span<const double> values,
                               std::span<const double> weights, double a) {
    if (values.size() != weights.size()) {
        throw std::invalid_argument("weighted quantile: length mismatch");
    }
    std::vector<std::size_t> order;
    order.reserve(values.size());
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (weights[i] < 0.0) throw std::invalid_argument("weighted quantile: negative weight");
        if (weights[i] > 0.0) {
            order.push_back(i);
            total += weights[i];
        }
    }
    if (order.empty()) throw std::invalid_argument("weighted quantile: all weights zero");
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        if (values[l] != values[r]) return values[l] < values[r];
        return l < r;
    });
    const std::size_t m = order.size();
    if (m == 1) return values[order[0]];

    // Plotting positions p_i = (C_i - w_i) / (S - w_i) with C_i the cumulative
    // weight through sample i. For uniform weights this is i/(m-1), i.e. the
    // type-7 positions; positions are strictly increasing for positive weights.
    double cum = 0.0;
    double prev_pos = 0.0;
    double prev_val = values[order[0]];
    for (std::size_t k = 0; k < m; ++k) {
        const double w = weights[order[k]];
        const double val = values[order[k]];
        cum += w;
        const double pos = (cum - w) / (total - w);
        if (k == 0) {
            if (a <= pos) return val;
        } else {
            if (a <= pos) {
                const double span = pos - prev_pos;
                const double t = span > 0.0 ? (a - prev_pos) / span : 1.0;
                return prev_val + t * (val - prev_val);
            }
        }
        prev_pos = pos;
        prev_val = val;
    }
    return prev_val;
}

std::vector<double> mid_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
        if (values[l] != values[r]) return values[l] < values[r];
        return l < r;
    });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double shared = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = shared;
        i = j + 1;
    }
    return ranks;
}

void Standardizer::fit(std::span<const double> x, std::size_t n, std::size_t p) {
    if (n == 0 || x.size() != n * p) throw std::invalid_argument("standardizer: bad shape");
    mean.assign(p, 0.0);
    sd.assign(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) mean[j] += x[i * p + j];
    }
    for (std::size_t j = 0; j < p; ++j) mean[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < p; ++j) {
            const double d = x[i * p + j] - mean[j];
            sd[j] += d * d;
        }
    }
    for (std::size_t j = 0; j < p; ++j) {
        sd[j] = std::sqrt(sd[j] / static_cast<double>(n));
    }
}

void Standardizer::transform_row(std::span<const double> row, std::span<double> out) const {
    if (row.size() != mean.size() || out.size() != mean.size()) {
        throw std::invalid_argument("standardizer: dimension mismatch");
    }
    for (std::size_t j = 0; j < mean.size(); ++j) out[j] = transform(j, row[j]);
}

}  // namespace flowcast
