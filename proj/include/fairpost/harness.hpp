#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairpost/dataset.hpp"
#include "fairpost/metrics.hpp"

namespace fairpost {

struct ExperimentConfig {
    std::string dataset;
    std::string protected_attr;
    std::string classifier = "logistic";  // logistic | forest
    std::vector<std::string> methods = {"orig", "eop", "roc", "igd"};
    int n_splits = 25;
    std::uint64_t base_seed = 42;
    double epsilon = 0.2;
    std::string output_dir = "out";
    std::string tau_target = "smallest";      // smallest | center
    bool bias_unprivileged_only = false;      // individual-bias summary population
    int threads = 0;                          // 0 = one per hardware thread
    double l2_strength = 1.0;
    int forest_trees = 100;
    int forest_min_leaf = 20;

    void validate() const;
};

struct SplitRecord {
    std::uint64_t seed = 0;
    std::string method;
    double balanced_accuracy = 0.0;
    DisparateImpact di;
    double individual_bias = 0.0;
    std::optional<double> detector_accuracy;  // igd only
    std::string note;
    bool failed = false;
    std::string error;
};

struct AggregateStat {
    double mean = 0.0;
    double stdev = 0.0;  // sample standard deviation; 0 when n < 2
    std::size_t n = 0;
};

struct MethodAggregate {
    std::string method;
    AggregateStat balanced_accuracy;
    AggregateStat individual_bias;
    AggregateStat disparate_impact;
    std::vector<std::uint64_t> di_excluded_seeds;  // undefined DI or failed splits
    AggregateStat detector_accuracy;
    std::vector<std::uint64_t> detector_excluded_seeds;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<SplitRecord> records;        // ordered by (split, method)
    std::vector<MethodAggregate> aggregates; // ordered as config.methods
};

// Runs the full grid for one task: for split i the dataset is partitioned
// with seed base_seed + i, the base classifier is trained on the training
// partition, every requested post-processor is fitted on validation (IGD
// and ROC never read validation labels) and evaluated on test. Splits may
// run in parallel; the result is identical regardless of thread count.
ExperimentResult run_experiment(const TabularDataset& dataset, const ExperimentConfig& config);

// Aggregation, exposed so reports can be recomputed and cross-checked.
std::vector<MethodAggregate> aggregate_records(const std::vector<SplitRecord>& records,
                                               const std::vector<std::string>& methods);

}  // namespace fairpost
