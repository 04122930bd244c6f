#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowcast {

/// Dense supervised learning table: row-major feature matrix plus targets.
/// Learners consume this directly; the pipeline wraps it in a SupervisedSet
/// that carries dates and the gauge id.
struct Dataset {
    std::vector<std::string> feature_names;
    std::vector<double> x;  // row-major n x p
    std::vector<double> y;  // length n

    std::size_t n_rows() const { return y.size(); }
    std::size_t n_features() const { return feature_names.size(); }

    std::span<const double> row(std::size_t i) const {
        const std::size_t p = n_features();
        return {x.data() + i * p, p};
    }

    double at(std::size_t i, std::size_t j) const { return x[i * n_features() + j]; }

    void validate() const {
        if (x.size() != n_rows() * n_features()) {
            throw std::invalid_argument("dataset: feature matrix shape mismatch");
        }
    }

    /// Rows [begin, end) as a new dataset.
    Dataset slice(std::size_t begin, std::size_t end) const {
        const std::size_t p = n_features();
        Dataset out;
        out.feature_names = feature_names;
        out.x.assign(x.begin() + static_cast<std::ptrdiff_t>(begin * p),
                     x.begin() + static_cast<std::ptrdiff_t>(end * p));
        out.y.assign(y.begin() + static_cast<std::ptrdiff_t>(begin),
                     y.begin() + static_cast<std::ptrdiff_t>(end));
        return out;
    }
};

}  // namespace flowcast
