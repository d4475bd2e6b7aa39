#pragma once

#include <cstdint>
#include <span>

namespace fairpost {

// A black-box probabilistic binary classifier: a score in [0,1] as a
// function of the non-protected features and the protected value. Labels
// come from thresholding the score at 0.5.
class ScoredClassifier {
public:
    virtual ~ScoredClassifier() = default;

    // Expected length of the feature row (protected value passed separately).
    virtual std::size_t input_width() const = 0;

    virtual double score(std::span<const double> x, int protected_value) const = 0;

    int label(std::span<const double> x, int protected_value) const {
        return score(x, protected_value) >= 0.5 ? 1 : 0;
    }
};

// A fixed decision rule: either a bare classifier's label or a full
// post-processed pipeline. `sample_id` keys any per-sample randomness so
// evaluations are replayable; deterministic rules ignore it.
class DecisionFunction {
public:
    virtual ~DecisionFunction() = default;
    virtual int decide(std::span<const double> x, int protected_value,
                       std::uint64_t sample_id) const = 0;
};

// The label of a classifier, viewed as a decision function.
class ClassifierDecision final : public DecisionFunction {
public:
    explicit ClassifierDecision(const ScoredClassifier& model) : model_(&model) {}
    int decide(std::span<const double> x, int d, std::uint64_t) const override {
        return model_->label(x, d);
    }

private:
    const ScoredClassifier* model_;
};

}  // namespace fairpost
