#include "fairpost/metrics.hpp"

#include <stdexcept>

#include "fairpost/postprocess.hpp"

namespace fairpost {

DisparateImpact disparate_impact(std::span<const std::uint8_t> decisions,
                                 std::span<const std::uint8_t> protected_values) {
    if (decisions.size() != protected_values.size()) {
        throw std::invalid_argument("disparate_impact: vector lengths differ");
    }
    std::size_t n0 = 0, n1 = 0, f0 = 0, f1 = 0;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        if (protected_values[i]) {
            ++n1;
            f1 += decisions[i];
        } else {
            ++n0;
            f0 += decisions[i];
        }
    }
    if (n0 == 0 || n1 == 0) throw std::invalid_argument("disparate_impact: a group is missing");
    if (f1 == 0) return {0.0, false};  // undefined: privileged favorable rate is zero
    const double rate0 = static_cast<double>(f0) / static_cast<double>(n0);
    const double rate1 = static_cast<double>(f1) / static_cast<double>(n1);
    return {rate0 / rate1, true};
}

double individual_bias_score(const ScoredClassifier& model, std::span<const double> x) {
    return model.score(x, 1) - model.score(x, 0);
}

int individual_bias_indicator(const DecisionFunction& f, std::span<const double> x,
                              std::uint64_t sample_id) {
    return f.decide(x, 0, sample_id) != f.decide(x, 1, sample_id) ? 1 : 0;
}

double individual_bias_summary(const DecisionFunction& f, const DatasetView& rows,
                               bool unprivileged_only) {
    std::size_t count = 0, biased = 0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        if (unprivileged_only && rows.protected_value(k) != 0) continue;
        ++count;
        biased += static_cast<std::size_t>(
            individual_bias_indicator(f, rows.row(k), rows.row_index(k)));
    }
    if (count == 0) throw std::invalid_argument("individual_bias_summary: empty population");
    return static_cast<double>(biased) / static_cast<double>(count);
}

double balanced_accuracy(std::span<const std::uint8_t> truth,
                         std::span<const std::uint8_t> decisions) {
    if (truth.size() != decisions.size()) {
        throw std::invalid_argument("balanced_accuracy: vector lengths differ");
    }
    std::size_t pos = 0, neg = 0, tp = 0, tn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i]) {
            ++pos;
            tp += decisions[i];
        } else {
            ++neg;
            tn += 1 - decisions[i];
        }
    }
    if (pos == 0 || neg == 0) throw std::invalid_argument("balanced_accuracy: single-class truth");
    const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
    const double tnr = static_cast<double>(tn) / static_cast<double>(neg);
    return 0.5 * (tpr + tnr);
}

std::vector<std::uint8_t> detector_ground_truth(const ScoredClassifier& model,
                                                const DatasetView& test, double epsilon) {
    const std::size_t n = test.size();
    std::vector<std::uint8_t> base(n), protected_values(n);
    std::vector<double> scores;
    std::vector<std::uint8_t> counterfactual;
    for (std::size_t k = 0; k < n; ++k) {
        const auto x = test.row(k);
        const int d = test.protected_value(k);
        protected_values[k] = static_cast<std::uint8_t>(d);
        base[k] = static_cast<std::uint8_t>(model.label(x, d));
        if (d == 0) {
            scores.push_back(individual_bias_score(model, x));
            counterfactual.push_back(static_cast<std::uint8_t>(model.label(x, 1)));
        }
    }
    return select_tau(scores, base, counterfactual, protected_values, epsilon).beta;
}

MetricsReport evaluate_decisions(const DecisionFunction& f, const DatasetView& test,
                                 bool bias_unprivileged_only) {
    const std::size_t n = test.size();
    std::vector<std::uint8_t> decisions(n), truth(n), protected_values(n);
    for (std::size_t k = 0; k < n; ++k) {
        const int d = test.protected_value(k);
        decisions[k] = static_cast<std::uint8_t>(f.decide(test.row(k), d, test.row_index(k)));
        truth[k] = static_cast<std::uint8_t>(test.label(k));
        protected_values[k] = static_cast<std::uint8_t>(d);
    }

    MetricsReport report;
    report.balanced_accuracy = balanced_accuracy(truth, decisions);
    report.disparate_impact = disparate_impact(decisions, protected_values);
    report.individual_bias = individual_bias_summary(f, test, bias_unprivileged_only);
    for (std::size_t k = 0; k < n; ++k) {
        if (protected_values[k]) {
            ++report.counts.privileged;
            report.counts.privileged_favorable += decisions[k];
        } else {
            ++report.counts.unprivileged;
            report.counts.unprivileged_favorable += decisions[k];
        }
    }
    return report;
}

}  // namespace fairpost
