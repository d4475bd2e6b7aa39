#include "fairpost/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fairpost/matrix.hpp"
#include "fairpost/rng.hpp"

namespace fairpost {

namespace {

struct TreeBuilder {
    const Matrix& inputs;                 // n x (p+1), protected appended
    std::span<const std::uint8_t> labels;
    int min_leaf;
    std::size_t features_per_split;
    SplitMix64& rng;
    std::vector<TreeNode> nodes;

    // `sample` holds bootstrap row indices (duplicates count as samples).
    std::int32_t build(std::vector<std::size_t>& sample, std::size_t begin, std::size_t end) {
        const std::size_t size = end - begin;
        std::size_t positives = 0;
        for (std::size_t k = begin; k < end; ++k) positives += labels[sample[k]];

        const auto make_leaf = [&]() {
            TreeNode leaf;
            leaf.value = static_cast<double>(positives) / static_cast<double>(size);
            nodes.push_back(leaf);
            return static_cast<std::int32_t>(nodes.size() - 1);
        };

        if (positives == 0 || positives == size || size < 2 * static_cast<std::size_t>(min_leaf)) {
            return make_leaf();
        }

        // sqrt(p) candidate features per split, drawn without replacement
        const std::size_t width = inputs.cols();
        std::vector<std::size_t> candidates(width);
        std::iota(candidates.begin(), candidates.end(), std::size_t{0});
        for (std::size_t i = 0; i < features_per_split; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.next_below(width - i));
            std::swap(candidates[i], candidates[j]);
        }

        std::int32_t best_feature = -1;
        double best_threshold = 0.0;
        double best_impurity = 0.0;
        std::vector<std::pair<double, std::uint8_t>> sorted(size);

        for (std::size_t c = 0; c < features_per_split; ++c) {
            const std::size_t f = candidates[c];
            for (std::size_t k = 0; k < size; ++k) {
                const std::size_t row = sample[begin + k];
                sorted[k] = {inputs.at(row, f), labels[row]};
            }
            std::sort(sorted.begin(), sorted.end());

            std::size_t pos_left = 0;
            for (std::size_t i = 1; i < size; ++i) {
                pos_left += sorted[i - 1].second;
                if (i < static_cast<std::size_t>(min_leaf) ||
                    size - i < static_cast<std::size_t>(min_leaf)) {
                    continue;
                }
                if (sorted[i - 1].first >= sorted[i].first) continue;
                const double nl = static_cast<double>(i), nr = static_cast<double>(size - i);
                const double pl = static_cast<double>(pos_left);
                const double pr = static_cast<double>(positives) - pl;
                const double gini_l = nl - (pl * pl + (nl - pl) * (nl - pl)) / nl;
                const double gini_r = nr - (pr * pr + (nr - pr) * (nr - pr)) / nr;
                const double impurity = gini_l + gini_r;
                if (best_feature < 0 || impurity < best_impurity) {
                    best_feature = static_cast<std::int32_t>(f);
                    best_threshold = 0.5 * (sorted[i - 1].first + sorted[i].first);
                    best_impurity = impurity;
                }
            }
        }

        if (best_feature < 0) return make_leaf();

        const auto mid = std::partition(
            sample.begin() + static_cast<std::ptrdiff_t>(begin),
            sample.begin() + static_cast<std::ptrdiff_t>(end),
            [&](std::size_t row) {
                return inputs.at(row, static_cast<std::size_t>(best_feature)) <= best_threshold;
            });
        const auto split_at = static_cast<std::size_t>(mid - sample.begin());

        TreeNode node;
        node.feature = best_feature;
        node.threshold = best_threshold;
        nodes.push_back(node);
        const auto index = static_cast<std::int32_t>(nodes.size() - 1);
        const std::int32_t left = build(sample, begin, split_at);
        const std::int32_t right = build(sample, split_at, end);
        nodes[index].left = left;
        nodes[index].right = right;
        return index;
    }
};

}  // namespace

double DecisionTree::leaf_value(std::span<const double> x, int protected_value) const {
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
        const auto f = static_cast<std::size_t>(nodes[i].feature);
        const double v = f < x.size() ? x[f] : static_cast<double>(protected_value);
        i = static_cast<std::size_t>(v <= nodes[i].threshold ? nodes[i].left : nodes[i].right);
    }
    return nodes[i].value;
}

double ForestModel::score(std::span<const double> x, int protected_value) const {
    if (x.size() != width) throw std::invalid_argument("forest: feature row width mismatch");
    std::size_t votes = 0;
    for (const auto& tree : trees) votes += static_cast<std::size_t>(tree.vote(x, protected_value));
    return static_cast<double>(votes) / static_cast<double>(trees.size());
}

nlohmann::json ForestModel::to_json() const {
    nlohmann::json trees_json = nlohmann::json::array();
    for (const auto& tree : trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : tree.nodes) {
            nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
        }
        trees_json.push_back(std::move(nodes));
    }
    return {{"schema_version", 1}, {"type", "forest"},    {"width", width},
            {"min_leaf", min_leaf}, {"seed", seed},        {"trees", std::move(trees_json)}};
}

ForestModel ForestModel::from_json(const nlohmann::json& j) {
    if (j.at("type").get<std::string>() != "forest") {
        throw std::invalid_argument("not a forest model document");
    }
    ForestModel m;
    m.width = j.at("width").get<std::size_t>();
    m.min_leaf = j.at("min_leaf").get<int>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& tree_json : j.at("trees")) {
        DecisionTree tree;
        for (const auto& n : tree_json) {
            tree.nodes.push_back({n.at(0).get<std::int32_t>(), n.at(1).get<double>(),
                                  n.at(2).get<std::int32_t>(), n.at(3).get<std::int32_t>(),
                                  n.at(4).get<double>()});
        }
        m.trees.push_back(std::move(tree));
    }
    return m;
}

ForestModel train_forest(const DatasetView& train, const ForestOptions& options) {
    const std::size_t n = train.size();
    if (n == 0) throw std::invalid_argument("train_forest: empty training set");
    if (n < static_cast<std::size_t>(options.min_leaf)) {
        throw std::invalid_argument("train_forest: fewer samples than min_leaf");
    }
    bool has0 = false, has1 = false;
    for (std::size_t k = 0; k < n; ++k) (train.label(k) ? has1 : has0) = true;
    if (!has0 || !has1) throw std::invalid_argument("train_forest: single-class training labels");

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
    for (double v : inputs.data()) {
        if (!std::isfinite(v)) throw std::invalid_argument("train_forest: non-finite feature value");
    }

    const auto features_per_split = static_cast<std::size_t>(
        std::max(1.0, std::ceil(std::sqrt(static_cast<double>(p + 1)))));

    ForestModel model;
    model.width = p;
    model.min_leaf = options.min_leaf;
    model.seed = options.seed;
    model.trees.reserve(static_cast<std::size_t>(options.n_trees));

    for (int t = 0; t < options.n_trees; ++t) {
        SplitMix64 rng(hash_key(options.seed, static_cast<std::uint64_t>(t), 0x666f726573ULL));
        std::vector<std::size_t> sample(n);
        for (std::size_t k = 0; k < n; ++k) sample[k] = static_cast<std::size_t>(rng.next_below(n));

        TreeBuilder builder{inputs, labels, options.min_leaf, features_per_split, rng, {}};
        builder.build(sample, 0, n);
        model.trees.push_back({std::move(builder.nodes)});
    }
    return model;
}

}  // namespace fairpost
