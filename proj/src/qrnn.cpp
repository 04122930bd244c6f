#include "flowcast/qrnn.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "flowcast/optim.hpp"
#include "flowcast/rng.hpp"
#include "flowcast/serialize_util.hpp"

namespace flowcast {

double smoothed_pinball(double predicted, double observed, QuantileLevel a, double epsilon) {
    if (!std::isfinite(predicted) || !std::isfinite(observed)) {
        throw std::invalid_argument("smoothed_pinball: non-finite input");
    }
    if (epsilon < 0.0) throw std::invalid_argument("smoothed_pinball: negative epsilon");
    const double u = observed - predicted;
    const double weight = u >= 0.0 ? a.value() : 1.0 - a.value();
    const double au = std::abs(u);
    if (epsilon == 0.0) return weight * au;
    if (au <= epsilon) return weight * au * au / (2.0 * epsilon);
    return weight * (au - epsilon / 2.0);
}

double smoothed_pinball_grad(double predicted, double observed, QuantileLevel a,
                             double epsilon) {
    if (!std::isfinite(predicted) || !std::isfinite(observed)) {
        throw std::invalid_argument("smoothed_pinball_grad: non-finite input");
    }
    if (epsilon < 0.0) throw std::invalid_argument("smoothed_pinball_grad: negative epsilon");
    const double u = observed - predicted;
    const double weight = u >= 0.0 ? a.value() : 1.0 - a.value();
    if (epsilon == 0.0) {
        return u <= 0.0 ? (1.0 - a.value()) : -a.value();
    }
    if (std::abs(u) <= epsilon) return -weight * u / epsilon;
    return u > 0.0 ? -weight : weight;
}

double qrnn_loss_and_gradient(std::span<const double> z, std::span<const double> targets,
                              std::size_t n, std::size_t p, QuantileLevel a, double epsilon,
                              std::span<const double> theta, std::span<double> grad) {
    if (z.size() != n * p || targets.size() != n || theta.size() != p + 3 ||
        grad.size() != p + 3) {
        throw std::invalid_argument("qrnn_loss_and_gradient: shape mismatch");
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    const double b_h = theta[p];
    const double w_out = theta[p + 1];
    const double b_out = theta[p + 2];
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* zi = z.data() + i * p;
        double act = b_h;
        for (std::size_t j = 0; j < p; ++j) act += theta[j] * zi[j];
        const double s = sigmoid(act);
        const double f = w_out * s + b_out;
        loss += smoothed_pinball(f, targets[i], a, epsilon);
        const double g = smoothed_pinball_grad(f, targets[i], a, epsilon);
        grad[p + 2] += g;
        grad[p + 1] += g * s;
        const double chain = g * w_out * s * (1.0 - s);
        grad[p] += chain;
        for (std::size_t j = 0; j < p; ++j) grad[j] += chain * zi[j];
    }
    const double inv_n = 1.0 / static_cast<double>(n);
    for (double& v : grad) v *= inv_n;
    return loss * inv_n;
}

QrnnModel fit_qrnn(const Dataset& train, QuantileLevel a, const QrnnOptions& options,
                   std::uint64_t seed) {
    train.validate();
    const std::size_t n = train.n_rows();
    const std::size_t p = train.n_features();
    if (n == 0) throw std::invalid_argument("fit_qrnn: empty training set");
    if (options.restarts == 0 || options.schedule_length == 0) {
        throw std::invalid_argument("fit_qrnn: restarts and schedule must be non-empty");
    }

    QrnnModel model;
    model.level = a;
    model.feature_standardizer.fit(train.x, n, p);
    model.target_mean = mean(train.y);
    model.target_sd = stdev(train.y);
    model.input_weights.assign(p, 0.0);

    // Constant target: the output bias alone reproduces it exactly.
    if (model.target_sd <= 0.0) {
        model.trace.restarts_used = 0;
        return model;
    }

    std::vector<double> z(n * p);
    for (std::size_t i = 0; i < n; ++i) {
        model.feature_standardizer.transform_row(train.row(i),
                                                 {z.data() + i * p, p});
    }
    std::vector<double> ty(n);
    for (std::size_t i = 0; i < n; ++i) {
        ty[i] = (train.y[i] - model.target_mean) / model.target_sd;
    }

    std::vector<double> schedule(options.schedule_length);
    for (std::size_t k = 0; k < options.schedule_length; ++k) {
        schedule[k] = std::ldexp(1.0, -static_cast<int>(k) - 1);  // sd-relative
    }
    model.trace.epsilon_schedule = schedule;

    const std::size_t dim = p + 3;
    bool have_best = false;
    std::vector<double> best_theta;
    double best_loss = std::numeric_limits<double>::infinity();

    for (std::size_t restart = 0; restart < options.restarts; ++restart) {
        Rng rng(derive_seed(seed, restart));
        std::vector<double> theta(dim);
        for (double& v : theta) v = rng.next_double(-options.init_range, options.init_range);

        bool abandoned = false;
        double stage_loss = std::numeric_limits<double>::infinity();
        for (double eps : schedule) {
            const auto objective = [&, eps](const std::vector<double>& th,
                                            std::vector<double>& g) {
                return qrnn_loss_and_gradient(z, ty, n, p, a, eps, th, g);
            };
            OptimOptions opt;
            opt.max_iterations = options.max_iterations_per_stage;
            opt.grad_tolerance = options.grad_tolerance;
            OptimResult res = lbfgs_minimize(objective, std::move(theta), opt);
            if (!res.finite) {
                abandoned = true;
                break;
            }
            theta = std::move(res.x);
            stage_loss = res.fx;
        }
        ++model.trace.restarts_used;
        if (abandoned) {
            ++model.trace.restarts_abandoned;
            continue;
        }
        if (stage_loss < best_loss) {
            best_loss = stage_loss;
            best_theta = theta;
            have_best = true;
        }
    }
    if (!have_best) {
        throw std::runtime_error("fit_qrnn: every restart was abandoned (non-finite loss)");
    }

    model.input_weights.assign(best_theta.begin(),
                               best_theta.begin() + static_cast<std::ptrdiff_t>(p));
    model.hidden_bias = best_theta[p];
    model.output_weight = best_theta[p + 1];
    model.output_bias = best_theta[p + 2];
    model.trace.final_smoothed_loss = best_loss;
    return model;
}

double predict(const QrnnModel& model, std::span<const double> features) {
    const std::size_t p = model.input_weights.size();
    if (features.size() != p) throw std::invalid_argument("qrnn predict: dimension mismatch");
    double act = model.hidden_bias;
    for (std::size_t j = 0; j < p; ++j) {
        act += model.input_weights[j] * model.feature_standardizer.transform(j, features[j]);
    }
    const double f = model.output_weight * sigmoid(act) + model.output_bias;
    return model.target_mean + model.target_sd * f;
}

void save_qrnn(const std::string& path, const QrnnModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "flowcast-qrnn v1\n";
    out << "level " << detail::fmt(model.level.value()) << '\n';
    out << "n_features " << model.input_weights.size() << '\n';
    detail::write_vector(out, "input_weights", model.input_weights);
    out << "hidden_bias " << detail::fmt(model.hidden_bias) << '\n';
    out << "output_weight " << detail::fmt(model.output_weight) << '\n';
    out << "output_bias " << detail::fmt(model.output_bias) << '\n';
    detail::write_vector(out, "feature_mean", model.feature_standardizer.mean);
    detail::write_vector(out, "feature_sd", model.feature_standardizer.sd);
    out << "target_mean " << detail::fmt(model.target_mean) << '\n';
    out << "target_sd " << detail::fmt(model.target_sd) << '\n';
}

QrnnModel load_qrnn(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    detail::expect_line(in, "flowcast-qrnn v1", path);
    QrnnModel model;
    model.level = QuantileLevel(detail::read_scalar(in, "level", path));
    const auto p = static_cast<std::size_t>(detail::read_scalar(in, "n_features", path));
    model.input_weights = detail::read_vector(in, "input_weights", p, path);
    model.hidden_bias = detail::read_scalar(in, "hidden_bias", path);
    model.output_weight = detail::read_scalar(in, "output_weight", path);
    model.output_bias = detail::read_scalar(in, "output_bias", path);
    model.feature_standardizer.mean = detail::read_vector(in, "feature_mean", p, path);
    model.feature_standardizer.sd = detail::read_vector(in, "feature_sd", p, path);
    model.target_mean = detail::read_scalar(in, "target_mean", path);
    model.target_sd = detail::read_scalar(in, "target_sd", path);
    return model;
}

}  // namespace flowcast
