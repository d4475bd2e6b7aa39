#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

#include "fairpost/classifier.hpp"
#include "fairpost/dataset.hpp"

namespace fairpost {

struct ForestOptions {
    int n_trees = 100;
    int min_leaf = 20;
    std::uint64_t seed = 0;
};

// Axis-aligned binary decision tree, nodes in a flat array; node 0 is the
// root. Leaves store the favorable-class fraction of their training samples.
struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // go left when input[feature] <= threshold
    std::int32_t left = -1;
    std::int32_t right = -1;
    double value = 0.0;         // leaf favorable fraction
};

struct DecisionTree {
    std::vector<TreeNode> nodes;

    double leaf_value(std::span<const double> x, int protected_value) const;
    // A leaf at exactly 0.5 votes favorable.
    int vote(std::span<const double> x, int protected_value) const {
        return leaf_value(x, protected_value) >= 0.5 ? 1 : 0;
    }
};

// Bagged Gini forest; the protected value is appended as one extra candidate
// split input. Score is the fraction of trees voting favorable.
class ForestModel final : public ScoredClassifier {
public:
    std::vector<DecisionTree> trees;
    std::size_t width = 0;  // feature count excluding the protected input
    int min_leaf = 20;
    std::uint64_t seed = 0;

    std::size_t input_width() const override { return width; }
    double score(std::span<const double> x, int protected_value) const override;

    nlohmann::json to_json() const;
    static ForestModel from_json(const nlohmann::json& j);
};

ForestModel train_forest(const DatasetView& train, const ForestOptions& options = {});

}  // namespace fairpost
