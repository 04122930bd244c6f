#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "flowcast/dataset.hpp"
#include "flowcast/quantile.hpp"

namespace flowcast {

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // go left when x[feature] <= threshold
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;                  // scalar payload (boosting)
    std::vector<std::uint32_t> samples;  // index payload (forest)

    bool is_leaf() const { return feature < 0; }
};

/// Binary CART grown by variance-reduction splits at midpoints between
/// consecutive distinct feature values. Nodes are stored in DFS preorder
/// with nodes[0] the root.
struct RegressionTree {
    std::vector<TreeNode> nodes;

    std::size_t leaf_index(std::span<const double> features) const;
    double predict_value(std::span<const double> features) const {
        return nodes[leaf_index(features)].value;
    }
    std::size_t n_splits() const;
};

struct GbmOptions {
    std::size_t n_trees = 2000;
    int max_depth = 3;
    std::size_t min_leaf = 10;
    double learning_rate = 0.05;
    double bag_fraction = 0.5;
    bool record_loss_trace = false;
};

/// Gradient-boosted quantile trees: the initial prediction is the empirical
/// target quantile; each iteration bags samples without replacement, grows
/// a depth-capped tree on the pinball negative gradients, then replaces
/// each leaf value with the loss-minimizing empirical quantile of the
/// current residuals in that leaf.
struct GbmQuantileModel {
    QuantileLevel level{0.5};
    double initial = 0.0;
    double learning_rate = 0.05;
    GbmOptions options;
    std::uint64_t seed = 0;
    std::vector<RegressionTree> trees;
    std::vector<double> train_loss_trace;  // when recorded: before and after each iteration
};

GbmQuantileModel fit_gbm_quantile(const Dataset& train, QuantileLevel a,
                                  const GbmOptions& options = {}, std::uint64_t seed = 1);
double predict(const GbmQuantileModel& model, std::span<const double> features);

struct ForestOptions {
    std::size_t n_trees = 2000;
    double subsample_fraction = 0.5;
    std::size_t min_leaf = 5;
    std::size_t mtry = 0;  // 0 = ceil(sqrt(p))
    bool honest = false;   // disjoint split/estimation halves per tree
    std::size_t n_threads = 1;
};

/// Weighted-neighbor quantile forest: leaves store training-sample indices;
/// a query's neighbor weights average each tree's uniform distribution over
/// its co-leaf samples, and predicted quantiles come from the weighted
/// empirical target distribution. One fitted forest serves every level.
struct QuantileForestModel {
    ForestOptions options;
    std::uint64_t seed = 0;
    std::size_t n_features = 0;
    std::vector<double> targets;  // training targets, by sample index
    std::vector<RegressionTree> trees;
};

QuantileForestModel fit_quantile_forest(const Dataset& train, const ForestOptions& options = {},
                                        std::uint64_t seed = 1);

/// Per-training-sample weights alpha_i(x); they sum to 1.
std::vector<double> neighbor_weights(const QuantileForestModel& model,
                                     std::span<const double> features);

/// Quantiles of the weighted neighbor distribution; non-decreasing across
/// levels by construction.
std::vector<double> predict_forest_quantiles(const QuantileForestModel& model,
                                             std::span<const double> features,
                                             const std::vector<QuantileLevel>& levels);

/// Depth-weighted split-frequency importance: splits at depths 1..4 count
/// with weight depth^-2, normalized per tree, averaged over trees. Sums to
/// one; a forest with no splits reports the uniform vector.
std::vector<double> forest_variable_importance(const QuantileForestModel& model);

void save_gbm(const std::string& path, const GbmQuantileModel& model);
GbmQuantileModel load_gbm(const std::string& path);
void save_forest(const std::string& path, const QuantileForestModel& model);
QuantileForestModel load_forest(const std::string& path);

}  // namespace flowcast
