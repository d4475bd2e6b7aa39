#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fairpost/classifier.hpp"
#include "fairpost/dataset.hpp"
#include "fairpost/logistic.hpp"

namespace fairpost {

// Result of the bias-score threshold search. Unprivileged rows are ranked by
// bias score (descending, ties by original position ascending) and the top-k
// get counterfactual predictions until the simulated disparate impact enters
// [1 - eps, 1/(1 - eps)].
struct TauSelection {
    double tau = 0.0;
    std::vector<std::uint8_t> beta;  // per unprivileged row, aligned with the inputs
    std::size_t k = 0;
    bool constraint_met = false;
    double achieved_di = 0.0;        // simulated DI at the chosen k
    bool achieved_di_defined = false;
    std::vector<double> di_path;     // simulated DI per k (NaN where undefined)
};

// `bias_scores` and `counterfactual_decisions` follow the unprivileged rows
// of the validation set in their original order; `base_decisions` and
// `protected_values` cover the full validation set.
TauSelection select_tau(std::span<const double> bias_scores,
                        std::span<const std::uint8_t> base_decisions,
                        std::span<const std::uint8_t> counterfactual_decisions,
                        std::span<const std::uint8_t> protected_values, double epsilon);

// How select_tau picks k among the qualifying candidates: the smallest k
// entering the band, or the k whose DI is closest to 1.
enum class TauTarget { kSmallest, kCenter };

TauSelection select_tau(std::span<const double> bias_scores,
                        std::span<const std::uint8_t> base_decisions,
                        std::span<const std::uint8_t> counterfactual_decisions,
                        std::span<const std::uint8_t> protected_values, double epsilon,
                        TauTarget target);

// A fitted decision-rewriting rule. fit() never mutates the base classifier;
// the fitted object keeps a reference to it for scoring at apply time.
class PostProcessor : public DecisionFunction {
public:
    virtual std::string_view method() const = 0;
    virtual void fit(const ScoredClassifier& base, const DatasetView& validation) = 0;
    virtual int apply(std::span<const double> x, int protected_value,
                      std::uint64_t sample_id) const = 0;
    virtual nlohmann::json to_json() const = 0;

    // Re-attach a base classifier to a deserialized post-processor.
    virtual void bind_base(const ScoredClassifier& base) = 0;

    int decide(std::span<const double> x, int d, std::uint64_t sample_id) const override {
        return apply(x, d, sample_id);
    }

    /// Empty when the fit had nothing to report.
    virtual std::string diagnostics() const { return {}; }
};

// Pass-through: the original classifier's predictions.
class IdentityPostProcessor final : public PostProcessor {
public:
    std::string_view method() const override { return "orig"; }
    void fit(const ScoredClassifier& base, const DatasetView&) override { base_ = &base; }
    void bind_base(const ScoredClassifier& base) override { base_ = &base; }
    int apply(std::span<const double> x, int d, std::uint64_t) const override;
    nlohmann::json to_json() const override;

private:
    const ScoredClassifier* base_ = nullptr;
};

// Individual+group debiasing. Fitting trains a logistic detector of likely
// individual bias on the unprivileged validation rows, labeled by the
// threshold search; validation ground-truth labels are never read. Applying
// gives detector-flagged unprivileged samples the prediction they would have
// received in the privileged group.
class IgdPostProcessor final : public PostProcessor {
public:
    struct Config {
        double epsilon = 0.2;
        TauTarget tau_target = TauTarget::kSmallest;
        LogisticOptions detector_options;
    };

    IgdPostProcessor() = default;
    explicit IgdPostProcessor(Config config) : config_(config) {}

    std::string_view method() const override { return "igd"; }
    void fit(const ScoredClassifier& base, const DatasetView& validation) override;
    void bind_base(const ScoredClassifier& base) override { base_ = &base; }
    int apply(std::span<const double> x, int d, std::uint64_t) const override;
    nlohmann::json to_json() const override;
    static IgdPostProcessor from_json(const nlohmann::json& j);
    std::string diagnostics() const override;

    /// Detector label for a feature row (1 = likely individually biased).
    int detector_label(std::span<const double> x) const;

    const LogisticModel& detector() const { return detector_; }
    double tau() const { return tau_; }
    std::size_t flip_count_val() const { return k_; }
    double epsilon() const { return config_.epsilon; }
    bool constraint_met() const { return constraint_met_; }
    bool degenerate_detector() const { return degenerate_detector_; }

private:
    Config config_;
    LogisticModel detector_;
    double tau_ = 0.0;
    std::size_t k_ = 0;
    bool constraint_met_ = false;
    bool degenerate_detector_ = false;
    int degenerate_class_ = 0;
    const ScoredClassifier* base_ = nullptr;
    bool fitted_ = false;
};

// Reject option classification: inside the uncertainty band the unprivileged
// group receives the favorable outcome and the privileged group the
// unfavorable one; theta is tuned on validation disparate impact.
class RocPostProcessor final : public PostProcessor {
public:
    struct Config {
        double epsilon = 0.2;
        double grid_step = 0.005;  // theta grid: step, 2*step, ..., < 0.5
    };

    RocPostProcessor() = default;
    explicit RocPostProcessor(Config config) : config_(config) {}

    std::string_view method() const override { return "roc"; }
    void fit(const ScoredClassifier& base, const DatasetView& validation) override;
    void bind_base(const ScoredClassifier& base) override { base_ = &base; }
    int apply(std::span<const double> x, int d, std::uint64_t) const override;
    nlohmann::json to_json() const override;
    static RocPostProcessor from_json(const nlohmann::json& j);
    std::string diagnostics() const override;

    double theta() const { return theta_; }
    double epsilon() const { return config_.epsilon; }
    bool constraint_met() const { return constraint_met_; }
    double achieved_di() const { return achieved_di_; }

private:
    Config config_;
    double theta_ = 0.0;
    bool constraint_met_ = false;
    double achieved_di_ = 0.0;
    const ScoredClassifier* base_ = nullptr;
    bool fitted_ = false;
};

// Equalized odds post-processing: per (group, base prediction) cell, the
// probability that the final label is favorable, chosen by an exact linear
// program that equalizes expected TPR and FPR across groups at minimum
// expected misclassification on validation. Needs validation ground truth.
class EopPostProcessor final : public PostProcessor {
public:
    struct Config {
        std::uint64_t seed = 0;
    };

    EopPostProcessor() = default;
    explicit EopPostProcessor(Config config) : config_(config) {}

    std::string_view method() const override { return "eop"; }
    void fit(const ScoredClassifier& base, const DatasetView& validation) override;
    void bind_base(const ScoredClassifier& base) override { base_ = &base; }
    int apply(std::span<const double> x, int d, std::uint64_t sample_id) const override;
    nlohmann::json to_json() const override;
    static EopPostProcessor from_json(const nlohmann::json& j);
    std::string diagnostics() const override;

    /// P(final = 1 | group d, base prediction yhat).
    double flip_prob(int d, int yhat) const { return flip_probs_[d][yhat]; }
    std::uint64_t seed() const { return config_.seed; }

    // Expected post-processed (TPR, FPR) gaps across groups, computed
    // analytically from the fitted probabilities and the validation rates.
    double expected_tpr_gap() const;
    double expected_fpr_gap() const;

private:
    Config config_;
    double flip_probs_[2][2] = {{0.0, 1.0}, {0.0, 1.0}};
    double tpr_[2] = {0.0, 0.0};
    double fpr_[2] = {0.0, 0.0};
    const ScoredClassifier* base_ = nullptr;
    bool fitted_ = false;
};

std::unique_ptr<PostProcessor> make_postprocessor(std::string_view method, double epsilon,
                                                  std::uint64_t seed,
                                                  TauTarget tau_target = TauTarget::kSmallest);

std::unique_ptr<PostProcessor> postprocessor_from_json(const nlohmann::json& j);

}  // namespace fairpost
