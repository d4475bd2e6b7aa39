#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fairpost/matrix.hpp"

namespace fairpost {

struct SourceMeta {
    std::string dataset;         // adult | german | compas
    std::string protected_attr;  // sex | race | age
    std::string favorable;       // human-readable favorable-outcome description
    std::size_t rows = 0;
};

// Encoding record for one emitted feature column, kept so a prepared cache
// can document exactly how the raw data was transformed.
struct ColumnInfo {
    std::string name;
    std::string kind;  // numeric | onehot | binary
    bool scaled = false;
    double mean = 0.0;
    double stdev = 1.0;
};

// Encoded tabular dataset: standardized non-protected features, a binary
// protected attribute carried separately (1 = privileged) and binary labels
// (1 = favorable).
class TabularDataset {
public:
    TabularDataset() = default;
    TabularDataset(Matrix features, std::vector<std::uint8_t> protected_values,
                   std::vector<std::uint8_t> labels, std::vector<ColumnInfo> columns,
                   SourceMeta meta);

    std::size_t rows() const { return features_.rows(); }
    std::size_t feature_count() const { return features_.cols(); }

    std::span<const double> row(std::size_t i) const { return features_.row(i); }
    int protected_value(std::size_t i) const { return protected_[i]; }
    int label(std::size_t i) const { return labels_[i]; }

    const Matrix& features() const { return features_; }
    const std::vector<std::uint8_t>& protected_values() const { return protected_; }
    const std::vector<std::uint8_t>& labels() const { return labels_; }
    const std::vector<ColumnInfo>& columns() const { return columns_; }
    const SourceMeta& meta() const { return meta_; }

private:
    Matrix features_;
    std::vector<std::uint8_t> protected_;
    std::vector<std::uint8_t> labels_;
    std::vector<ColumnInfo> columns_;
    SourceMeta meta_;
};

// Non-owning view over a subset of dataset rows (a split partition).
struct DatasetView {
    const TabularDataset* data = nullptr;
    std::span<const std::size_t> indices;

    std::size_t size() const { return indices.size(); }
    std::span<const double> row(std::size_t k) const { return data->row(indices[k]); }
    int protected_value(std::size_t k) const { return data->protected_value(indices[k]); }
    int label(std::size_t k) const { return data->label(indices[k]); }
    std::size_t row_index(std::size_t k) const { return indices[k]; }
};

struct DataSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;

    DatasetView train_view(const TabularDataset& d) const { return {&d, train}; }
    DatasetView validation_view(const TabularDataset& d) const { return {&d, validation}; }
    DatasetView test_view(const TabularDataset& d) const { return {&d, test}; }
};

// 60/20/20 partition from a seed-driven uniform permutation. Deterministic:
// the same seed always yields the same index lists.
DataSplit split_dataset(const TabularDataset& dataset, std::uint64_t seed);

// Loads and encodes one of the three benchmark datasets from the upstream
// raw files. `source_path` is the raw file itself (german, compas) or the
// directory containing adult.data and adult.test (adult).
//
// Conventions (1 = privileged / favorable):
//   adult:  sex male=1, race white=1; income >50K favorable
//   german: sex male=1 (derived from personal status), age>25 = 1; low risk favorable
//   compas: sex female=1, race Caucasian=1; no reoffend within two years favorable
TabularDataset load_dataset(const std::string& name, const std::string& protected_attr,
                            const std::string& source_path);

// Prepared-dataset cache: a plain CSV (features..., protected, label) plus a
// JSON sidecar (<path>.json) with the encoding metadata. Reloading the pair
// reproduces the dataset exactly.
void save_cache(const TabularDataset& dataset, const std::string& csv_path);
TabularDataset load_cache(const std::string& csv_path);

}  // namespace fairpost
