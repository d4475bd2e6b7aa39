#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fairpost/classifier.hpp"
#include "fairpost/dataset.hpp"

namespace fairpost {

// Ratio of favorable rates, unprivileged over privileged. A zero privileged
// favorable rate makes the ratio undefined; that is a flagged state, never a
// substituted number.
struct DisparateImpact {
    double value = 0.0;
    bool defined = false;
};

struct GroupCounts {
    std::size_t unprivileged = 0;
    std::size_t privileged = 0;
    std::size_t unprivileged_favorable = 0;
    std::size_t privileged_favorable = 0;
};

struct MetricsReport {
    double balanced_accuracy = 0.0;
    DisparateImpact disparate_impact;
    double individual_bias = 0.0;
    GroupCounts counts;
};

DisparateImpact disparate_impact(std::span<const std::uint8_t> decisions,
                                 std::span<const std::uint8_t> protected_values);

/// Soft individual bias: score(x, d=1) - score(x, d=0).
double individual_bias_score(const ScoredClassifier& model, std::span<const double> x);

/// 1 iff the decision changes when only the protected value is flipped.
int individual_bias_indicator(const DecisionFunction& f, std::span<const double> x,
                              std::uint64_t sample_id);

// Mean of the indicator over the given rows. `unprivileged_only` restricts
// the population to rows with d = 0 (the indicator itself always ranges over
// both counterfactual values).
double individual_bias_summary(const DecisionFunction& f, const DatasetView& rows,
                               bool unprivileged_only = false);

/// (TPR + TNR) / 2. Requires both truth classes.
double balanced_accuracy(std::span<const std::uint8_t> truth,
                         std::span<const std::uint8_t> decisions);

// Ground-truth bias labels for the unprivileged rows of a test partition:
// the same threshold-selection procedure the IGD fit runs on validation,
// applied to the test partition itself.
std::vector<std::uint8_t> detector_ground_truth(const ScoredClassifier& model,
                                                const DatasetView& test, double epsilon);

/// All three comparison measures of a decision rule over a test view.
MetricsReport evaluate_decisions(const DecisionFunction& f, const DatasetView& test,
                                 bool bias_unprivileged_only = false);

}  // namespace fairpost
