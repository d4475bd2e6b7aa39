#include "fairpost/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fairpost {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow
double softplus(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

struct Objective {
    const Matrix& x;
    std::span<const std::uint8_t> y;
    double lambda;

    // point = [weights..., intercept]
    double value(std::span<const double> p) const {
        const std::size_t n = x.rows(), w = x.cols();
        const double b = p[w];
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = x.row(i);
            double z = b;
            for (std::size_t j = 0; j < w; ++j) z += p[j] * row[j];
            // nll = softplus(z) - y*z
            loss += softplus(z) - (y[i] ? z : 0.0);
        }
        double reg = 0.0;
        for (std::size_t j = 0; j < w; ++j) reg += p[j] * p[j];
        return loss / static_cast<double>(n) + 0.5 * lambda * reg / static_cast<double>(n);
    }

    void gradient(std::span<const double> p, std::span<double> g) const {
        const std::size_t n = x.rows(), w = x.cols();
        const double b = p[w];
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto row = x.row(i);
            double z = b;
            for (std::size_t j = 0; j < w; ++j) z += p[j] * row[j];
            const double r = sigmoid(z) - (y[i] ? 1.0 : 0.0);
            for (std::size_t j = 0; j < w; ++j) g[j] += r * row[j];
            g[w] += r;
        }
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t j = 0; j < w; ++j) g[j] = g[j] * inv_n + lambda * inv_n * p[j];
        g[w] *= inv_n;
    }
};

double inf_norm(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

}  // namespace

double LogisticModel::score(std::span<const double> x, int protected_value) const {
    const std::size_t p = input_width();
    if (x.size() != p) throw std::invalid_argument("logistic: feature row width mismatch");
    double z = intercept;
    for (std::size_t j = 0; j < p; ++j) z += weights[j] * x[j];
    if (has_protected_input) z += weights[p] * static_cast<double>(protected_value);
    return sigmoid(z);
}

double LogisticModel::score_raw(std::span<const double> x_full) const {
    if (x_full.size() != weights.size()) throw std::invalid_argument("logistic: input width mismatch");
    double z = intercept;
    for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * x_full[j];
    return sigmoid(z);
}

nlohmann::json LogisticModel::to_json() const {
    return {{"schema_version", 1},
            {"type", "logistic"},
            {"weights", weights},
            {"intercept", intercept},
            {"l2_strength", l2_strength},
            {"has_protected_input", has_protected_input}};
}

LogisticModel LogisticModel::from_json(const nlohmann::json& j) {
    if (j.at("type").get<std::string>() != "logistic") {
        throw std::invalid_argument("not a logistic model document");
    }
    LogisticModel m;
    m.weights = j.at("weights").get<std::vector<double>>();
    m.intercept = j.at("intercept").get<double>();
    m.l2_strength = j.at("l2_strength").get<double>();
    m.has_protected_input = j.at("has_protected_input").get<bool>();
    return m;
}

double logistic_objective(const Matrix& inputs, std::span<const std::uint8_t> labels,
                          double l2_strength, std::span<const double> point) {
    return Objective{inputs, labels, l2_strength}.value(point);
}

std::vector<double> logistic_gradient(const Matrix& inputs, std::span<const std::uint8_t> labels,
                                      double l2_strength, std::span<const double> point) {
    std::vector<double> g(point.size());
    Objective{inputs, labels, l2_strength}.gradient(point, g);
    return g;
}

LogisticModel train_logistic_matrix(const Matrix& inputs, std::span<const std::uint8_t> labels,
                                    const LogisticOptions& options, bool has_protected_input) {
    const std::size_t n = inputs.rows(), w = inputs.cols();
    if (n == 0) throw std::invalid_argument("train_logistic: empty training set");
    if (labels.size() != n) throw std::invalid_argument("train_logistic: label count mismatch");
    bool has0 = false, has1 = false;
    for (std::uint8_t v : labels) (v ? has1 : has0) = true;
    if (!has0 || !has1) throw std::invalid_argument("train_logistic: single-class training labels");
    for (double v : inputs.data()) {
        if (!std::isfinite(v)) throw std::invalid_argument("train_logistic: non-finite feature value");
    }

    const Objective obj{inputs, labels, options.l2_strength};

    std::vector<double> point(w + 1, 0.0), grad(w + 1), prev_point, prev_grad, trial(w + 1);
    obj.gradient(point, grad);
    double value = obj.value(point);

    LogisticDiagnostics diag;
    double step = 1.0;
    constexpr double kArmijo = 1e-4;

    int iter = 0;
    for (; iter < options.max_iterations; ++iter) {
        const double gnorm = inf_norm(grad);
        if (gnorm < options.tolerance) break;

        // Barzilai-Borwein initial step, then backtrack until the Armijo
        // condition holds; descent direction is always -gradient, so the
        // objective never increases.
        if (!prev_point.empty()) {
            double sy = 0.0, ss = 0.0;
            for (std::size_t j = 0; j <= w; ++j) {
                const double s = point[j] - prev_point[j];
                const double dg = grad[j] - prev_grad[j];
                sy += s * dg;
                ss += s * s;
            }
            if (sy > 0.0 && ss > 0.0) step = std::clamp(ss / sy, 1e-12, 1e12);
        }

        double g2 = 0.0;
        for (double g : grad) g2 += g * g;

        double trial_value = 0.0;
        bool accepted = false;
        for (int bt = 0; bt < 64; ++bt) {
            for (std::size_t j = 0; j <= w; ++j) trial[j] = point[j] - step * grad[j];
            trial_value = obj.value(trial);
            if (trial_value <= value - kArmijo * step * g2) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) break;  // step underflow: gradient direction exhausted

        prev_point = point;
        prev_grad.assign(grad.begin(), grad.end());
        point.swap(trial);
        value = trial_value;
        obj.gradient(point, grad);
    }

    diag.iterations = iter;
    diag.gradient_norm = inf_norm(grad);
    diag.converged = diag.gradient_norm < options.tolerance;

    LogisticModel model;
    model.weights.assign(point.begin(), point.begin() + w);
    model.intercept = point[w];
    model.l2_strength = options.l2_strength;
    model.has_protected_input = has_protected_input;
    model.diagnostics = diag;
    return model;
}

LogisticModel train_logistic(const DatasetView& train, const LogisticOptions& options) {
    const std::size_t n = train.size();
    if (n == 0) throw std::invalid_argument("train_logistic: empty training view");
    const std::size_t p = train.data->feature_count();
    Matrix inputs(n, p + 1);
    std::vector<std::uint8_t> labels(n);
    for (std::size_t k = 0; k < n; ++k) {
        const auto row = train.row(k);
        auto dst = inputs.row(k);
        std::copy(row.begin(), row.end(), dst.begin());
        dst[p] = static_cast<double>(train.protected_value(k));
        labels[k] = static_cast<std::uint8_t>(train.label(k));
    }
    return train_logistic_matrix(inputs, labels, options, /*has_protected_input=*/true);
}

}  // namespace fairpost
