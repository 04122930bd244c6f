#include "flowcast/trees.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "flowcast/rng.hpp"
#include "flowcast/serialize_util.hpp"
#include "flowcast/stats.hpp"

namespace flowcast {

std::size_t RegressionTree::leaf_index(std::span<const double> features) const {
    std::size_t node = 0;
    while (!nodes[node].is_leaf()) {
        const TreeNode& n = nodes[node];
        node = features[static_cast<std::size_t>(n.feature)] <= n.threshold
                   ? static_cast<std::size_t>(n.left)
                   : static_cast<std::size_t>(n.right);
    }
    return node;
}

std::size_t RegressionTree::n_splits() const {
    std::size_t count = 0;
    for (const TreeNode& n : nodes) count += n.is_leaf() ? 0 : 1;
    return count;
}

namespace {

struct GrowSpec {
    int max_depth = -1;  // -1 = unbounded
    std::size_t min_leaf = 5;
    std::size_t mtry = 0;  // 0 = all features
};

// Recursive CART builder. Responses are centered per node so the split
// gain reduces to S_L^2/n_L + S_R^2/n_R; candidate thresholds sit at
// midpoints between consecutive distinct values, ties in gain resolving to
// the lowest feature index and then the lowest threshold.
class TreeGrower {
public:
    TreeGrower(const Dataset& data, std::span<const double> response, const GrowSpec& spec,
               Rng& rng)
        : data_(data), response_(response), spec_(spec), rng_(rng) {}

    RegressionTree grow(std::vector<std::uint32_t> samples) {
        tree_.nodes.clear();
        build(std::move(samples), 0);
        return std::move(tree_);
    }

private:
    std::size_t build(std::vector<std::uint32_t> samples, int depth) {
        const std::size_t index = tree_.nodes.size();
        tree_.nodes.emplace_back();

        bool stop = samples.size() < 2 * spec_.min_leaf ||
                    (spec_.max_depth >= 0 && depth >= spec_.max_depth);
        if (!stop) {
            const double first = response_[samples[0]];
            bool pure = true;
            for (std::uint32_t i : samples) {
                if (response_[i] != first) {
                    pure = false;
                    break;
                }
            }
            stop = pure;
        }

        std::int32_t best_feature = -1;
        double best_threshold = 0.0;
        double best_gain = 0.0;
        if (!stop) {
            find_best_split(samples, best_feature, best_threshold, best_gain);
            stop = best_feature < 0;
        }
        if (stop) {
            tree_.nodes[index].samples = std::move(samples);
            return index;
        }

        std::vector<std::uint32_t> left, right;
        left.reserve(samples.size());
        right.reserve(samples.size());
        for (std::uint32_t i : samples) {
            (data_.at(i, static_cast<std::size_t>(best_feature)) <= best_threshold ? left
                                                                                   : right)
                .push_back(i);
        }
        samples.clear();
        samples.shrink_to_fit();

        const std::size_t left_index = build(std::move(left), depth + 1);
        const std::size_t right_index = build(std::move(right), depth + 1);
        TreeNode& node = tree_.nodes[index];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = static_cast<std::int32_t>(left_index);
        node.right = static_cast<std::int32_t>(right_index);
        return index;
    }

    void find_best_split(const std::vector<std::uint32_t>& samples, std::int32_t& best_feature,
                         double& best_threshold, double& best_gain) {
        const std::size_t m = samples.size();
        const std::size_t p = data_.n_features();

        double rbar = 0.0;
        for (std::uint32_t i : samples) rbar += response_[i];
        rbar /= static_cast<double>(m);

        std::vector<std::uint32_t> candidates;
        if (spec_.mtry > 0 && spec_.mtry < p) {
            candidates = rng_.sample_without_replacement(p, spec_.mtry);
        } else {
            candidates.resize(p);
            for (std::size_t j = 0; j < p; ++j) candidates[j] = static_cast<std::uint32_t>(j);
        }

        best_feature = -1;
        best_gain = 0.0;
        for (std::uint32_t j : candidates) {
            pairs_.resize(m);
            for (std::size_t k = 0; k < m; ++k) {
                pairs_[k] = {data_.at(samples[k], j), response_[samples[k]] - rbar};
            }
            std::sort(pairs_.begin(), pairs_.end(),
                      [](const auto& l, const auto& r) { return l.first < r.first; });

            double left_sum = 0.0;
            for (std::size_t k = 1; k < m; ++k) {
                left_sum += pairs_[k - 1].second;
                if (pairs_[k - 1].first == pairs_[k].first) continue;
                if (k < spec_.min_leaf || m - k < spec_.min_leaf) continue;
                const double right_sum = -left_sum;  // responses are centered
                const double gain =
                    left_sum * left_sum / static_cast<double>(k) +
                    right_sum * right_sum / static_cast<double>(m - k);
                if (gain > best_gain) {
                    double threshold = 0.5 * (pairs_[k - 1].first + pairs_[k].first);
                    if (!(threshold < pairs_[k].first)) threshold = pairs_[k - 1].first;
                    best_gain = gain;
                    best_feature = static_cast<std::int32_t>(j);
                    best_threshold = threshold;
                }
            }
        }
    }

    const Dataset& data_;
    std::span<const double> response_;
    GrowSpec spec_;
    Rng& rng_;
    RegressionTree tree_;
    std::vector<std::pair<double, double>> pairs_;
};

std::vector<std::uint32_t> draw_bag(Rng& rng, std::size_t n, double fraction) {
    const auto k = std::max<std::size_t>(
        1, static_cast<std::size_t>(fraction * static_cast<double>(n)));
    return rng.sample_without_replacement(n, k);
}

}  // namespace

GbmQuantileModel fit_gbm_quantile(const Dataset& train, QuantileLevel a,
                                  const GbmOptions& options, std::uint64_t seed) {
    train.validate();
    const std::size_t n = train.n_rows();
    if (n < 2 * options.min_leaf) {
        throw std::invalid_argument("fit_gbm_quantile: insufficient samples");
    }
    if (!(options.bag_fraction > 0.0 && options.bag_fraction <= 1.0)) {
        throw std::invalid_argument("fit_gbm_quantile: bag_fraction outside (0, 1]");
    }

    GbmQuantileModel model;
    model.level = a;
    model.learning_rate = options.learning_rate;
    model.options = options;
    model.seed = seed;

    const bool constant_target =
        std::all_of(train.y.begin(), train.y.end(), [&](double v) { return v == train.y[0]; });
    model.initial = constant_target ? train.y[0] : quantile_type7(train.y, a.value());

    std::vector<double> fit(n, model.initial);
    const auto mean_loss = [&] {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) total += pinball_loss(fit[i], train.y[i], a);
        return total / static_cast<double>(n);
    };
    if (options.record_loss_trace) model.train_loss_trace.push_back(mean_loss());
    if (constant_target) return model;  // zero-valued trees would be skipped anyway

    std::vector<double> gradients(n, 0.0);
    std::vector<double> residuals;
    for (std::size_t m = 0; m < options.n_trees; ++m) {
        Rng rng(derive_seed(seed, m));
        std::vector<std::uint32_t> bag = draw_bag(rng, n, options.bag_fraction);
        for (std::uint32_t i : bag) {
            gradients[i] = train.y[i] > fit[i] ? a.value() : a.value() - 1.0;
        }

        GrowSpec spec{options.max_depth, options.min_leaf, 0};
        TreeGrower grower(train, gradients, spec, rng);
        RegressionTree tree = grower.grow(std::move(bag));

        // Quantile line-search: each leaf moves to the loss-minimizing
        // empirical quantile of its current residuals.
        bool all_zero = true;
        for (TreeNode& node : tree.nodes) {
            if (!node.is_leaf()) continue;
            residuals.clear();
            for (std::uint32_t i : node.samples) residuals.push_back(train.y[i] - fit[i]);
            node.value = pinball_minimizer_quantile(residuals, a.value());
            node.samples.clear();
            node.samples.shrink_to_fit();
            if (node.value != 0.0) all_zero = false;
        }
        if (!all_zero) {
            for (std::size_t i = 0; i < n; ++i) {
                fit[i] += options.learning_rate * tree.predict_value(train.row(i));
            }
            model.trees.push_back(std::move(tree));
        }
        if (options.record_loss_trace) model.train_loss_trace.push_back(mean_loss());
    }
    return model;
}

double predict(const GbmQuantileModel& model, std::span<const double> features) {
    double f = model.initial;
    for (const RegressionTree& tree : model.trees) {
        f += model.learning_rate * tree.predict_value(features);
    }
    return f;
}

QuantileForestModel fit_quantile_forest(const Dataset& train, const ForestOptions& options,
                                        std::uint64_t seed) {
    train.validate();
    const std::size_t n = train.n_rows();
    const std::size_t p = train.n_features();
    if (n < 2 * options.min_leaf) {
        throw std::invalid_argument("fit_quantile_forest: insufficient samples");
    }
    if (!(options.subsample_fraction > 0.0 && options.subsample_fraction <= 1.0)) {
        throw std::invalid_argument("fit_quantile_forest: subsample_fraction outside (0, 1]");
    }

    QuantileForestModel model;
    model.options = options;
    model.options.mtry = options.mtry > 0
                             ? options.mtry
                             : static_cast<std::size_t>(
                                   std::ceil(std::sqrt(static_cast<double>(p))));
    model.seed = seed;
    model.n_features = p;
    model.targets = train.y;
    model.trees.resize(options.n_trees);

    const auto fit_one = [&](std::size_t t) {
        Rng rng(derive_seed(seed, t));
        std::vector<std::uint32_t> subsample = draw_bag(rng, n, options.subsample_fraction);
        GrowSpec spec{-1, options.min_leaf, model.options.mtry};

        if (!options.honest || subsample.size() < 4) {
            TreeGrower grower(train, train.y, spec, rng);
            model.trees[t] = grower.grow(std::move(subsample));
            return;
        }
        // Honest mode: structure from one half, leaf contents from the other.
        rng.shuffle(subsample);
        const std::size_t half = subsample.size() / 2;
        std::vector<std::uint32_t> split_half(subsample.begin(),
                                              subsample.begin() + static_cast<std::ptrdiff_t>(half));
        std::vector<std::uint32_t> estimate_half(
            subsample.begin() + static_cast<std::ptrdiff_t>(half), subsample.end());
        std::sort(split_half.begin(), split_half.end());
        std::sort(estimate_half.begin(), estimate_half.end());

        TreeGrower grower(train, train.y, spec, rng);
        RegressionTree tree = grower.grow(std::move(split_half));
        for (TreeNode& node : tree.nodes) {
            if (node.is_leaf()) node.samples.clear();
        }
        for (std::uint32_t i : estimate_half) {
            tree.nodes[tree.leaf_index(train.row(i))].samples.push_back(i);
        }
        model.trees[t] = std::move(tree);
    };

    const std::size_t n_threads = std::max<std::size_t>(1, options.n_threads);
    if (n_threads == 1 || options.n_trees < 2) {
        for (std::size_t t = 0; t < options.n_trees; ++t) fit_one(t);
    } else {
        std::vector<std::thread> workers;
        std::size_t chunk = (options.n_trees + n_threads - 1) / n_threads;
        for (std::size_t w = 0; w < n_threads; ++w) {
            const std::size_t begin = w * chunk;
            const std::size_t end = std::min(options.n_trees, begin + chunk);
            if (begin >= end) break;
            workers.emplace_back([&, begin, end] {
                for (std::size_t t = begin; t < end; ++t) fit_one(t);
            });
        }
        for (auto& worker : workers) worker.join();
    }
    return model;
}

std::vector<double> neighbor_weights(const QuantileForestModel& model,
                                     std::span<const double> features) {
    if (features.size() != model.n_features) {
        throw std::invalid_argument("forest: feature dimension mismatch");
    }
    std::vector<double> weights(model.targets.size(), 0.0);
    std::size_t contributing = 0;
    for (const RegressionTree& tree : model.trees) {
        const TreeNode& leaf = tree.nodes[tree.leaf_index(features)];
        if (leaf.samples.empty()) continue;  // honest leaf with no estimation samples
        ++contributing;
        const double w = 1.0 / static_cast<double>(leaf.samples.size());
        for (std::uint32_t i : leaf.samples) weights[i] += w;
    }
    if (contributing == 0) {
        throw std::runtime_error("forest: no tree contributes estimation samples");
    }
    const double scale = 1.0 / static_cast<double>(contributing);
    for (double& w : weights) w *= scale;
    return weights;
}

std::vector<double> predict_forest_quantiles(const QuantileForestModel& model,
                                             std::span<const double> features,
                                             const std::vector<QuantileLevel>& levels) {
    const std::vector<double> weights = neighbor_weights(model, features);
    std::vector<double> out;
    out.reserve(levels.size());
    for (QuantileLevel a : levels) {
        out.push_back(weighted_quantile_type7(model.targets, weights, a.value()));
    }
    return out;
}

std::vector<double> forest_variable_importance(const QuantileForestModel& model) {
    const std::size_t p = model.n_features;
    std::vector<double> importance(p, 0.0);
    std::vector<double> per_tree(p, 0.0);
    std::size_t trees_with_splits = 0;

    std::vector<std::pair<std::int32_t, int>> stack;  // node, depth of its split
    for (const RegressionTree& tree : model.trees) {
        std::fill(per_tree.begin(), per_tree.end(), 0.0);
        double total = 0.0;
        stack.clear();
        stack.push_back({0, 1});
        while (!stack.empty()) {
            const auto [idx, depth] = stack.back();
            stack.pop_back();
            const TreeNode& node = tree.nodes[static_cast<std::size_t>(idx)];
            if (node.is_leaf()) continue;
            if (depth <= 4) {
                const double w = 1.0 / static_cast<double>(depth * depth);
                per_tree[static_cast<std::size_t>(node.feature)] += w;
                total += w;
            }
            stack.push_back({node.left, depth + 1});
            stack.push_back({node.right, depth + 1});
        }
        if (total > 0.0) {
            ++trees_with_splits;
            for (std::size_t j = 0; j < p; ++j) importance[j] += per_tree[j] / total;
        }
    }
    if (trees_with_splits == 0) {
        return std::vector<double>(p, 1.0 / static_cast<double>(p));
    }
    for (double& v : importance) v /= static_cast<double>(trees_with_splits);
    return importance;
}

namespace {

void write_tree(std::ostream& out, std::size_t index, const RegressionTree& tree,
                bool with_samples) {
    out << "tree " << index << ' ' << tree.nodes.size() << '\n';
    for (const TreeNode& node : tree.nodes) {
        out << node.feature << ' ' << detail::fmt(node.threshold) << ' ' << node.left << ' '
            << node.right;
        if (with_samples) {
            out << ' ' << node.samples.size();
            for (std::uint32_t s : node.samples) out << ' ' << s;
        } else {
            out << ' ' << detail::fmt(node.value);
        }
        out << '\n';
    }
}

RegressionTree read_tree(std::istream& in, std::size_t expected_index, bool with_samples,
                         const std::string& path) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": truncated tree block");
    std::istringstream header(line);
    std::string tag;
    std::size_t index = 0, n_nodes = 0;
    if (!(header >> tag >> index >> n_nodes) || tag != "tree" || index != expected_index) {
        throw std::runtime_error(path + ": bad tree header '" + line + "'");
    }
    RegressionTree tree;
    tree.nodes.resize(n_nodes);
    for (std::size_t k = 0; k < n_nodes; ++k) {
        if (!std::getline(in, line)) throw std::runtime_error(path + ": truncated node list");
        std::istringstream fields(line);
        TreeNode& node = tree.nodes[k];
        std::string threshold;
        if (!(fields >> node.feature >> threshold >> node.left >> node.right)) {
            throw std::runtime_error(path + ": bad node line '" + line + "'");
        }
        node.threshold = detail::parse_num(threshold, path);
        if (with_samples) {
            std::size_t count = 0;
            fields >> count;
            node.samples.resize(count);
            for (std::size_t s = 0; s < count; ++s) fields >> node.samples[s];
        } else {
            std::string value;
            fields >> value;
            node.value = detail::parse_num(value, path);
        }
    }
    return tree;
}

}  // namespace

void save_gbm(const std::string& path, const GbmQuantileModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "flowcast-gbm v1\n";
    out << "level " << detail::fmt(model.level.value()) << '\n';
    out << "initial " << detail::fmt(model.initial) << '\n';
    out << "learning_rate " << detail::fmt(model.learning_rate) << '\n';
    out << "n_trees " << model.trees.size() << '\n';
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
        write_tree(out, t, model.trees[t], /*with_samples=*/false);
    }
}

GbmQuantileModel load_gbm(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    detail::expect_line(in, "flowcast-gbm v1", path);
    GbmQuantileModel model;
    model.level = QuantileLevel(detail::read_scalar(in, "level", path));
    model.initial = detail::read_scalar(in, "initial", path);
    model.learning_rate = detail::read_scalar(in, "learning_rate", path);
    const auto n_trees = static_cast<std::size_t>(detail::read_scalar(in, "n_trees", path));
    model.trees.reserve(n_trees);
    for (std::size_t t = 0; t < n_trees; ++t) {
        model.trees.push_back(read_tree(in, t, /*with_samples=*/false, path));
    }
    return model;
}

void save_forest(const std::string& path, const QuantileForestModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "flowcast-forest v1\n";
    out << "n_features " << model.n_features << '\n';
    out << "n_targets " << model.targets.size() << '\n';
    detail::write_vector(out, "targets", model.targets);
    out << "n_trees " << model.trees.size() << '\n';
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
        write_tree(out, t, model.trees[t], /*with_samples=*/true);
    }
}

QuantileForestModel load_forest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    detail::expect_line(in, "flowcast-forest v1", path);
    QuantileForestModel model;
    model.n_features = static_cast<std::size_t>(detail::read_scalar(in, "n_features", path));
    const auto n_targets = static_cast<std::size_t>(detail::read_scalar(in, "n_targets", path));
    model.targets = detail::read_vector(in, "targets", n_targets, path);
    const auto n_trees = static_cast<std::size_t>(detail::read_scalar(in, "n_trees", path));
    model.trees.reserve(n_trees);
    for (std::size_t t = 0; t < n_trees; ++t) {
        model.trees.push_back(read_tree(in, t, /*with_samples=*/true, path));
    }
    return model;
}

}  // namespace flowcast
