#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace flowcast {

double mean(std::span<const double> v);

/// Population standard deviation (divide by n).
double stdev(std::span<const double> v);

/// Empirical quantile with type-7 linear interpolation of order statistics
/// (the R default). This is the house convention for every empirical
/// quantile: combiner medians, boosting offsets, report aggregates.
double quantile_type7(std::vector<double> values, double a);
double quantile_type7_sorted(std::span<const double> sorted, double a);

/// Empirical quantile guaranteed to minimize mean pinball loss at level a.
/// When n*a is an integer the minimizer set is the flat interval between
/// two order statistics and the type-7 value (which lies inside it) is
/// returned; otherwise the unique minimizing order statistic is returned.
double pinball_minimizer_quantile(std::vector<double> values, double a);

/// Quantile of the weighted empirical distribution sum_i w_i * delta(y_i),
/// interpolated so that uniform weights reproduce quantile_type7 exactly.
/// Zero-weight samples are ignored; weights need not be normalized.
double weighted_quantile_type7(std::span<const double> values,
                               std::span<const double> weights, double a);

/// Mid-ranks, 1-based: smallest value gets rank 1; ties share the mean of
/// the positions they occupy.
std::vector<double> mid_ranks(std::span<const double> values);

/// Per-feature affine normalization to zero mean / unit population sd.
/// Zero-variance features transform to 0 and are reported as inert.
struct Standardizer {
    std::vector<double> mean;
    std::vector<double> sd;

    /// x is row-major n x p.
    void fit(std::span<const double> x, std::size_t n, std::size_t p);

    std::size_t n_features() const { return mean.size(); }
    bool inert(std::size_t j) const { return sd[j] <= 0.0; }

    double transform(std::size_t j, double value) const {
        return inert(j) ? 0.0 : (value - mean[j]) / sd[j];
    }

    void transform_row(std::span<const double> row, std::span<double> out) const;
};

}  // namespace flowcast
