#include "flowcast/linear.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "flowcast/optim.hpp"
#include "flowcast/qrnn.hpp"
#include "flowcast/serialize_util.hpp"

namespace flowcast {

namespace {

double mean_pinball_original(const Dataset& data, QuantileLevel a,
                             const std::function<double(std::span<const double>)>& predictor) {
    double total = 0.0;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        total += pinball_loss(predictor(data.row(i)), data.y[i], a);
    }
    return total / static_cast<double>(data.n_rows());
}

}  // namespace

LinearQuantileModel fit_linear_qr(const Dataset& train, QuantileLevel a,
                                  const LinearQrOptions& options) {
    train.validate();
    const std::size_t n = train.n_rows();
    const std::size_t p = train.n_features();
    if (n <= p + 1) {
        throw std::invalid_argument("fit_linear_qr: needs more samples than features + 1");
    }

    LinearQuantileModel model;
    model.level = a;
    model.coefficients.assign(p, 0.0);
    model.standardizer.fit(train.x, n, p);

    const double ym = mean(train.y);
    const double ys = stdev(train.y);
    if (ys <= 0.0) {
        model.intercept = train.y[0];
        model.train_loss = 0.0;
        return model;
    }

    std::vector<std::size_t> active;
    for (std::size_t j = 0; j < p; ++j) {
        if (!model.standardizer.inert(j)) active.push_back(j);
    }

    if (active.empty()) {
        model.intercept = quantile_type7(train.y, a.value());
        model.train_loss = mean_pinball_original(
            train, a, [&](std::span<const double>) { return model.intercept; });
        return model;
    }

    const std::size_t pa = active.size();
    std::vector<double> z(n * pa);
    std::vector<double> ty(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = train.row(i);
        for (std::size_t k = 0; k < pa; ++k) {
            z[i * pa + k] = model.standardizer.transform(active[k], row[active[k]]);
        }
        ty[i] = (train.y[i] - ym) / ys;
    }

    // theta = [intercept, coefficients...] in standardized space.
    std::vector<double> theta(pa + 1, 0.0);
    theta[0] = quantile_type7(ty, a.value());

    const auto objective = [&](double eps) {
        return [&, eps](const std::vector<double>& th, std::vector<double>& grad) {
            std::fill(grad.begin(), grad.end(), 0.0);
            double loss = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double* zi = z.data() + i * pa;
                double f = th[0];
                for (std::size_t k = 0; k < pa; ++k) f += th[k + 1] * zi[k];
                loss += smoothed_pinball(f, ty[i], a, eps);
                const double g = smoothed_pinball_grad(f, ty[i], a, eps);
                grad[0] += g;
                for (std::size_t k = 0; k < pa; ++k) grad[k + 1] += g * zi[k];
            }
            const double inv_n = 1.0 / static_cast<double>(n);
            for (double& v : grad) v *= inv_n;
            return loss * inv_n;
        };
    };

    double eps = 0.5;
    double prev_stage_loss = std::numeric_limits<double>::infinity();
    std::size_t settled_stages = 0;
    OptimResult res;
    while (true) {
        OptimOptions opt;
        opt.max_iterations = options.max_stage_iterations;
        opt.grad_tolerance = options.grad_tolerance;
        opt.record_trace = true;
        res = lbfgs_minimize(objective(eps), std::move(theta), opt);
        theta = res.x;
        if (!res.finite) {
            throw ConvergenceError("fit_linear_qr: objective went non-finite", res.fx * ys);
        }
        const double rel_change = prev_stage_loss == std::numeric_limits<double>::infinity()
                                      ? 1.0
                                      : std::abs(prev_stage_loss - res.fx) /
                                            std::max(std::abs(res.fx), 1e-30);
        settled_stages = rel_change <= options.loss_tolerance ? settled_stages + 1 : 0;
        prev_stage_loss = res.fx;
        if (eps <= options.epsilon_floor) break;
        // Remaining smoothing bias is below eps/2; stop once it is
        // negligible and the loss has settled across stages.
        if (eps <= 1e-8 && settled_stages >= 2) break;
        eps = std::max(eps * 0.5, options.epsilon_floor);
    }

    // Out of budget while still improving counts as non-convergence.
    if (!res.converged && res.iterations >= options.max_stage_iterations &&
        res.trace.size() >= 2) {
        const double last = res.trace[res.trace.size() - 1];
        const double before = res.trace[res.trace.size() - 2];
        if ((before - last) / std::max(std::abs(last), 1e-30) > options.loss_tolerance) {
            throw ConvergenceError("fit_linear_qr: iteration budget exhausted", last * ys);
        }
    }

    model.intercept = ym + ys * theta[0];
    for (std::size_t k = 0; k < pa; ++k) {
        const std::size_t j = active[k];
        const double coef_std = theta[k + 1];
        model.coefficients[j] = ys * coef_std / model.standardizer.sd[j];
        model.intercept -= model.coefficients[j] * model.standardizer.mean[j];
    }
    model.train_loss = mean_pinball_original(
        train, a, [&](std::span<const double> row) { return predict(model, row); });
    return model;
}

double predict(const LinearQuantileModel& model, std::span<const double> features) {
    if (features.size() != model.coefficients.size()) {
        throw std::invalid_argument("linear predict: dimension mismatch");
    }
    double f = model.intercept;
    for (std::size_t j = 0; j < features.size(); ++j) {
        f += model.coefficients[j] * features[j];
    }
    return f;
}

LinearBoostModel fit_linear_boost(const Dataset& train, QuantileLevel a,
                                  const LinearBoostOptions& options) {
    train.validate();
    const std::size_t n = train.n_rows();
    const std::size_t p = train.n_features();
    if (n == 0) throw std::invalid_argument("fit_linear_boost: empty training set");
    if (!(options.shrinkage > 0.0 && options.shrinkage <= 1.0)) {
        throw std::invalid_argument("fit_linear_boost: shrinkage outside (0, 1]");
    }

    LinearBoostModel model;
    model.level = a;
    model.shrinkage = options.shrinkage;
    model.feature_standardizer.fit(train.x, n, p);
    model.target_mean = mean(train.y);
    model.target_sd = stdev(train.y);
    const double ys = model.target_sd > 0.0 ? model.target_sd : 1.0;

    std::vector<double> ty(n);
    for (std::size_t i = 0; i < n; ++i) ty[i] = (train.y[i] - model.target_mean) / ys;

    // Column-major standardized features plus their centering moments.
    std::vector<std::vector<double>> zcol(p, std::vector<double>(n));
    std::vector<double> zbar(p, 0.0), szz(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            zcol[j][i] = model.feature_standardizer.transform(j, train.at(i, j));
            zbar[j] += zcol[j][i];
        }
        zbar[j] /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = zcol[j][i] - zbar[j];
            szz[j] += d * d;
        }
    }

    model.offset = quantile_type7(ty, a.value());
    std::vector<double> fit(n, model.offset);

    const auto trace_loss = [&] {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            total += pinball_loss(model.target_mean + ys * fit[i], train.y[i], a);
        }
        return total / static_cast<double>(n);
    };
    if (options.record_loss_trace) model.train_loss_trace.push_back(trace_loss());
    if (model.target_sd <= 0.0) {
        // All-equal targets: the offset already has zero loss and the tied
        // subgradient would only drift away from it.
        return model;
    }

    std::vector<double> u(n);
    model.steps.reserve(options.iterations);
    for (std::size_t m = 0; m < options.iterations; ++m) {
        // Negative pinball gradient at the current fit.
        double ubar = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            u[i] = ty[i] > fit[i] ? a.value() : a.value() - 1.0;
            ubar += u[i];
        }
        ubar /= static_cast<double>(n);
        double suu = 0.0;
        for (std::size_t i = 0; i < n; ++i) suu += (u[i] - ubar) * (u[i] - ubar);

        std::uint32_t best_feature = 0;
        double best_rss = std::numeric_limits<double>::infinity();
        double best_slope = 0.0;
        bool found = false;
        for (std::size_t j = 0; j < p; ++j) {
            if (szz[j] <= 0.0) continue;
            double szu = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                szu += (zcol[j][i] - zbar[j]) * (u[i] - ubar);
            }
            const double slope = szu / szz[j];
            const double rss = suu - slope * szu;
            if (rss < best_rss) {
                best_rss = rss;
                best_feature = static_cast<std::uint32_t>(j);
                best_slope = slope;
                found = true;
            }
        }

        BoostStep step;
        if (found) {
            step = BoostStep{best_feature, ubar - best_slope * zbar[best_feature], best_slope};
        } else {
            step = BoostStep{0, ubar, 0.0};  // no varying feature: intercept-only learner
        }
        const auto& zj = zcol[step.feature];
        for (std::size_t i = 0; i < n; ++i) {
            fit[i] += options.shrinkage * (step.intercept + step.slope * zj[i]);
        }
        model.steps.push_back(step);
        if (options.record_loss_trace) model.train_loss_trace.push_back(trace_loss());
    }
    return model;
}

double predict(const LinearBoostModel& model, std::span<const double> features) {
    const std::size_t p = model.feature_standardizer.n_features();
    if (features.size() != p) {
        throw std::invalid_argument("linear boost predict: dimension mismatch");
    }
    std::vector<double> z(p);
    model.feature_standardizer.transform_row(features, z);
    double f = model.offset;
    for (const BoostStep& step : model.steps) {
        f += model.shrinkage * (step.intercept + step.slope * z[step.feature]);
    }
    const double ys = model.target_sd > 0.0 ? model.target_sd : 1.0;
    return model.target_mean + ys * f;
}

void save_linear_qr(const std::string& path, const LinearQuantileModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "flowcast-linear-qr v1\n";
    out << "level " << detail::fmt(model.level.value()) << '\n';
    out << "n_features " << model.coefficients.size() << '\n';
    out << "intercept " << detail::fmt(model.intercept) << '\n';
    detail::write_vector(out, "coefficients", model.coefficients);
    detail::write_vector(out, "feature_mean", model.standardizer.mean);
    detail::write_vector(out, "feature_sd", model.standardizer.sd);
    out << "train_loss " << detail::fmt(model.train_loss) << '\n';
}

LinearQuantileModel load_linear_qr(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    detail::expect_line(in, "flowcast-linear-qr v1", path);
    LinearQuantileModel model;
    model.level = QuantileLevel(detail::read_scalar(in, "level", path));
    const auto p = static_cast<std::size_t>(detail::read_scalar(in, "n_features", path));
    model.intercept = detail::read_scalar(in, "intercept", path);
    model.coefficients = detail::read_vector(in, "coefficients", p, path);
    model.standardizer.mean = detail::read_vector(in, "feature_mean", p, path);
    model.standardizer.sd = detail::read_vector(in, "feature_sd", p, path);
    model.train_loss = detail::read_scalar(in, "train_loss", path);
    return model;
}

void save_linear_boost(const std::string& path, const LinearBoostModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "flowcast-linear-boost v1\n";
    out << "level " << detail::fmt(model.level.value()) << '\n';
    out << "n_features " << model.feature_standardizer.n_features() << '\n';
    out << "offset " << detail::fmt(model.offset) << '\n';
    out << "shrinkage " << detail::fmt(model.shrinkage) << '\n';
    out << "target_mean " << detail::fmt(model.target_mean) << '\n';
    out << "target_sd " << detail::fmt(model.target_sd) << '\n';
    detail::write_vector(out, "feature_mean", model.feature_standardizer.mean);
    detail::write_vector(out, "feature_sd", model.feature_standardizer.sd);
    out << "steps " << model.steps.size() << '\n';
    for (const BoostStep& s : model.steps) {
        out << s.feature << ' ' << detail::fmt(s.intercept) << ' ' << detail::fmt(s.slope)
            << '\n';
    }
}

LinearBoostModel load_linear_boost(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path);
    detail::expect_line(in, "flowcast-linear-boost v1", path);
    LinearBoostModel model;
    model.level = QuantileLevel(detail::read_scalar(in, "level", path));
    const auto p = static_cast<std::size_t>(detail::read_scalar(in, "n_features", path));
    model.offset = detail::read_scalar(in, "offset", path);
    model.shrinkage = detail::read_scalar(in, "shrinkage", path);
    model.target_mean = detail::read_scalar(in, "target_mean", path);
    model.target_sd = detail::read_scalar(in, "target_sd", path);
    model.feature_standardizer.mean = detail::read_vector(in, "feature_mean", p, path);
    model.feature_standardizer.sd = detail::read_vector(in, "feature_sd", p, path);
    const auto n_steps = static_cast<std::size_t>(detail::read_scalar(in, "steps", path));
    model.steps.reserve(n_steps);
    for (std::size_t k = 0; k < n_steps; ++k) {
        std::string line;
        if (!std::getline(in, line)) throw std::runtime_error(path + ": truncated step log");
        std::istringstream fields(line);
        std::string f, b, s;
        if (!(fields >> f >> b >> s)) throw std::runtime_error(path + ": bad step line");
        model.steps.push_back(BoostStep{static_cast<std::uint32_t>(std::stoul(f)),
                                        detail::parse_num(b, path), detail::parse_num(s, path)});
    }
    return model;
}

}  // namespace flowcast
