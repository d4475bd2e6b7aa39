#include "fairpost/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "fairpost/csv.hpp"
#include "fairpost/forest.hpp"
#include "fairpost/logistic.hpp"
#include "fairpost/postprocess.hpp"

namespace fairpost {

namespace {

std::unique_ptr<ScoredClassifier> train_base(const DatasetView& train,
                                             const ExperimentConfig& config) {
    if (config.classifier == "logistic") {
        LogisticOptions opt;
        opt.l2_strength = config.l2_strength;
        auto model = std::make_unique<LogisticModel>(train_logistic(train, opt));
        return model;
    }
    if (config.classifier == "forest") {
        ForestOptions opt;
        opt.n_trees = config.forest_trees;
        opt.min_leaf = config.forest_min_leaf;
        opt.seed = 0;  // per-split variation comes from the partition itself
        return std::make_unique<ForestModel>(train_forest(train, opt));
    }
    throw std::invalid_argument("unknown classifier: " + config.classifier);
}

std::optional<double> igd_detector_accuracy(const IgdPostProcessor& igd,
                                            const ScoredClassifier& base,
                                            const DatasetView& test, double epsilon,
                                            std::string& note) {
    std::vector<std::uint8_t> truth;
    try {
        truth = detector_ground_truth(base, test, epsilon);
    } catch (const std::exception& e) {
        note += std::string(" detector_gt_failed(") + e.what() + ")";
        return std::nullopt;
    }
    std::vector<std::uint8_t> predicted;
    predicted.reserve(truth.size());
    for (std::size_t k = 0; k < test.size(); ++k) {
        if (test.protected_value(k) == 0) {
            predicted.push_back(static_cast<std::uint8_t>(igd.detector_label(test.row(k))));
        }
    }
    try {
        return balanced_accuracy(truth, predicted);
    } catch (const std::exception&) {
        note += " detector_gt_single_class";
        return std::nullopt;
    }
}

std::vector<SplitRecord> run_split(const TabularDataset& dataset, const ExperimentConfig& config,
                                   int split_index) {
    const std::uint64_t seed = config.base_seed + static_cast<std::uint64_t>(split_index);
    std::vector<SplitRecord> records;
    records.reserve(config.methods.size());

    DataSplit split;
    std::unique_ptr<ScoredClassifier> base;
    std::string split_error;
    try {
        split = split_dataset(dataset, seed);
        base = train_base(split.train_view(dataset), config);
    } catch (const std::exception& e) {
        split_error = e.what();
    }

    const TauTarget tau_target =
        config.tau_target == "center" ? TauTarget::kCenter : TauTarget::kSmallest;

    for (const auto& method : config.methods) {
        SplitRecord rec;
        rec.seed = seed;
        rec.method = method;
        if (!split_error.empty()) {
            rec.failed = true;
            rec.error = split_error;
            records.push_back(std::move(rec));
            continue;
        }
        try {
            auto post = make_postprocessor(method, config.epsilon, seed, tau_target);
            post->fit(*base, split.validation_view(dataset));
            const MetricsReport report = evaluate_decisions(*post, split.test_view(dataset),
                                                            config.bias_unprivileged_only);
            rec.balanced_accuracy = report.balanced_accuracy;
            rec.di = report.disparate_impact;
            rec.individual_bias = report.individual_bias;
            rec.note = post->diagnostics();
            if (method == "igd") {
                auto& igd = dynamic_cast<IgdPostProcessor&>(*post);
                rec.detector_accuracy = igd_detector_accuracy(igd, *base, split.test_view(dataset),
                                                              config.epsilon, rec.note);
            }
        } catch (const std::exception& e) {
            rec.failed = true;
            rec.error = e.what();
        }
        records.push_back(std::move(rec));
    }
    return records;
}

AggregateStat make_stat(const std::vector<double>& values) {
    AggregateStat stat;
    stat.n = values.size();
    if (values.empty()) return stat;
    double sum = 0.0;
    for (double v : values) sum += v;
    stat.mean = sum / static_cast<double>(values.size());
    if (values.size() >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - stat.mean) * (v - stat.mean);
        stat.stdev = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return stat;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (n_splits < 1) throw std::invalid_argument("config: n_splits must be >= 1");
    if (!(epsilon > 0.0 && epsilon < 1.0)) throw std::invalid_argument("config: epsilon must be in (0,1)");
    if (classifier != "logistic" && classifier != "forest") {
        throw std::invalid_argument("config: classifier must be logistic or forest");
    }
    if (methods.empty()) throw std::invalid_argument("config: no methods requested");
    for (const auto& m : methods) {
        if (m != "orig" && m != "eop" && m != "roc" && m != "igd") {
            throw std::invalid_argument("config: unknown method " + m);
        }
    }
    if (tau_target != "smallest" && tau_target != "center") {
        throw std::invalid_argument("config: tau_target must be smallest or center");
    }
}

std::vector<MethodAggregate> aggregate_records(const std::vector<SplitRecord>& records,
                                               const std::vector<std::string>& methods) {
    std::vector<MethodAggregate> aggregates;
    for (const auto& method : methods) {
        MethodAggregate agg;
        agg.method = method;
        std::vector<double> bacc, bias, di, det;
        for (const auto& rec : records) {
            if (rec.method != method) continue;
            if (rec.failed) {
                agg.di_excluded_seeds.push_back(rec.seed);
                agg.detector_excluded_seeds.push_back(rec.seed);
                continue;
            }
            bacc.push_back(rec.balanced_accuracy);
            bias.push_back(rec.individual_bias);
            if (rec.di.defined) {
                di.push_back(rec.di.value);
            } else {
                agg.di_excluded_seeds.push_back(rec.seed);
            }
            if (method == "igd") {
                if (rec.detector_accuracy) {
                    det.push_back(*rec.detector_accuracy);
                } else {
                    agg.detector_excluded_seeds.push_back(rec.seed);
                }
            }
        }
        agg.balanced_accuracy = make_stat(bacc);
        agg.individual_bias = make_stat(bias);
        agg.disparate_impact = make_stat(di);
        agg.detector_accuracy = make_stat(det);
        aggregates.push_back(std::move(agg));
    }
    return aggregates;
}

ExperimentResult run_experiment(const TabularDataset& dataset, const ExperimentConfig& config) {
    config.validate();
    if (dataset.rows() == 0) throw std::invalid_argument("run_experiment: empty dataset");

    const auto n_splits = static_cast<std::size_t>(config.n_splits);
    std::vector<std::vector<SplitRecord>> per_split(n_splits);

    unsigned n_threads = config.threads > 0 ? static_cast<unsigned>(config.threads)
                                            : std::thread::hardware_concurrency();
    n_threads = std::max(1u, std::min<unsigned>(n_threads, static_cast<unsigned>(n_splits)));

    if (n_threads == 1) {
        for (std::size_t i = 0; i < n_splits; ++i) {
            per_split[i] = run_split(dataset, config, static_cast<int>(i));
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> workers;
        workers.reserve(n_threads);
        for (unsigned t = 0; t < n_threads; ++t) {
            workers.emplace_back([&]() {
                for (;;) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= n_splits) return;
                    per_split[i] = run_split(dataset, config, static_cast<int>(i));
                }
            });
        }
        for (auto& w : workers) w.join();
    }

    ExperimentResult result;
    result.config = config;
    for (auto& split_records : per_split) {
        for (auto& rec : split_records) result.records.push_back(std::move(rec));
    }
    result.aggregates = aggregate_records(result.records, config.methods);
    return result;
}

}  // namespace fairpost
