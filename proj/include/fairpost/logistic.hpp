#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairpost/classifier.hpp"
#include "fairpost/dataset.hpp"
#include "fairpost/matrix.hpp"

namespace fairpost {

struct LogisticOptions {
    double l2_strength = 1.0;   // lambda; intercept unpenalized
    double tolerance = 1e-6;    // stop when the gradient infinity-norm drops below
    int max_iterations = 5000;
    std::uint64_t seed = 0;     // initialization is all-zeros, so the seed is inert
};

struct LogisticDiagnostics {
    int iterations = 0;
    double gradient_norm = 0.0;  // infinity-norm at the returned weights
    bool converged = false;
};

// L2-regularized logistic regression. When `has_protected_input` is set the
// model takes the protected value as one extra trailing input, so scoring at
// a counterfactual protected value is a pure input swap. The bias detector
// reuses the same class without that input.
class LogisticModel final : public ScoredClassifier {
public:
    std::vector<double> weights;  // one per input
    double intercept = 0.0;
    double l2_strength = 1.0;
    bool has_protected_input = true;
    LogisticDiagnostics diagnostics;

    std::size_t input_width() const override {
        return has_protected_input ? weights.size() - 1 : weights.size();
    }

    double score(std::span<const double> x, int protected_value) const override;

    // Score over an explicit full input row (length == weights.size()).
    double score_raw(std::span<const double> x_full) const;

    nlohmann::json to_json() const;
    static LogisticModel from_json(const nlohmann::json& j);
};

// Minimizes (1/n) sum of logistic losses + (lambda/2n)*||w||^2 by full-batch
// gradient descent with Armijo backtracking (Barzilai-Borwein initial step),
// starting from zero weights.
LogisticModel train_logistic_matrix(const Matrix& inputs, std::span<const std::uint8_t> labels,
                                    const LogisticOptions& options,
                                    bool has_protected_input);

// Trains on a dataset view with the protected value appended as the final
// model input.
LogisticModel train_logistic(const DatasetView& train, const LogisticOptions& options = {});

// Objective and gradient at a weight point, exposed for verification against
// finite differences. `point` is [weights..., intercept].
double logistic_objective(const Matrix& inputs, std::span<const std::uint8_t> labels,
                          double l2_strength, std::span<const double> point);
std::vector<double> logistic_gradient(const Matrix& inputs, std::span<const std::uint8_t> labels,
                                      double l2_strength, std::span<const double> point);

}  // namespace fairpost
