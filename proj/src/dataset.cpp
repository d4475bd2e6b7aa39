#include "fairpost/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

#include "fairpost/csv.hpp"
#include "fairpost/rng.hpp"

namespace fairpost {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return lines;
}

// Column-wise staging area for a filtered raw table; build() does the
// one-hot expansion and standardization in one pass.
class DatasetBuilder {
public:
    void add_numeric(std::string name, std::vector<double> values) {
        cols_.push_back({std::move(name), Kind::Numeric, std::move(values), {}, {}});
    }
    void add_categorical(std::string name, std::vector<std::string> values) {
        cols_.push_back({std::move(name), Kind::Categorical, {}, std::move(values), {}});
    }
    void add_binary(std::string name, std::vector<std::uint8_t> values) {
        cols_.push_back({std::move(name), Kind::Binary, {}, {}, std::move(values)});
    }
    void set_protected(std::vector<std::uint8_t> v) { protected_ = std::move(v); }
    void set_labels(std::vector<std::uint8_t> v) { labels_ = std::move(v); }

    TabularDataset build(SourceMeta meta) const {
        const std::size_t n = labels_.size();
        std::vector<ColumnInfo> infos;
        std::size_t width = 0;
        std::vector<std::vector<std::string>> categories(cols_.size());
        for (std::size_t c = 0; c < cols_.size(); ++c) {
            switch (cols_[c].kind) {
                case Kind::Numeric:
                case Kind::Binary:
                    width += 1;
                    break;
                case Kind::Categorical: {
                    // categories sorted so the encoding does not depend on row order
                    std::set<std::string> uniq(cols_[c].cats.begin(), cols_[c].cats.end());
                    categories[c].assign(uniq.begin(), uniq.end());
                    width += categories[c].size();
                    break;
                }
            }
        }

        Matrix features(n, width);
        std::size_t out = 0;
        for (std::size_t c = 0; c < cols_.size(); ++c) {
            const auto& col = cols_[c];
            if (col.kind == Kind::Numeric) {
                double mean = 0.0;
                for (double v : col.nums) mean += v;
                mean /= static_cast<double>(n);
                double var = 0.0;
                for (double v : col.nums) var += (v - mean) * (v - mean);
                var /= static_cast<double>(n);
                const double stdev = std::sqrt(var);
                const bool scaled = stdev > 1e-12;  // constant columns pass through
                for (std::size_t i = 0; i < n; ++i) {
                    features.at(i, out) = scaled ? (col.nums[i] - mean) / stdev : col.nums[i];
                }
                infos.push_back({col.name, "numeric", scaled, mean, stdev});
                ++out;
            } else if (col.kind == Kind::Binary) {
                for (std::size_t i = 0; i < n; ++i) features.at(i, out) = col.bins[i];
                infos.push_back({col.name, "binary", false, 0.0, 1.0});
                ++out;
            } else {
                std::unordered_map<std::string, std::size_t> slot;
                for (std::size_t k = 0; k < categories[c].size(); ++k) {
                    slot[categories[c][k]] = out + k;
                    infos.push_back({col.name + "=" + categories[c][k], "onehot", false, 0.0, 1.0});
                }
                for (std::size_t i = 0; i < n; ++i) features.at(i, slot.at(col.cats[i])) = 1.0;
                out += categories[c].size();
            }
        }

        meta.rows = n;
        return TabularDataset(std::move(features), protected_, labels_, std::move(infos),
                              std::move(meta));
    }

private:
    enum class Kind { Numeric, Categorical, Binary };
    struct Col {
        std::string name;
        Kind kind;
        std::vector<double> nums;
        std::vector<std::string> cats;
        std::vector<std::uint8_t> bins;
    };
    std::vector<Col> cols_;
    std::vector<std::uint8_t> protected_;
    std::vector<std::uint8_t> labels_;
};

std::string resolve_raw_path(const std::string& source_path, const std::string& filename) {
    fs::path p(source_path);
    if (fs::is_directory(p)) p /= filename;
    if (!fs::exists(p)) throw std::runtime_error("raw file not found: " + p.string());
    return p.string();
}

// ---------------------------------------------------------------- adult ----

TabularDataset load_adult(const std::string& protected_attr, const std::string& source_path) {
    if (protected_attr != "sex" && protected_attr != "race") {
        throw std::invalid_argument("adult: protected attribute must be sex or race");
    }
    fs::path base(source_path);
    std::string data_path, test_path;
    if (fs::is_directory(base)) {
        data_path = (base / "adult.data").string();
        test_path = (base / "adult.test").string();
    } else {
        data_path = source_path;
        test_path = (base.parent_path() / "adult.test").string();
    }
    if (!fs::exists(data_path)) throw std::runtime_error("raw file not found: " + data_path);
    if (!fs::exists(test_path)) throw std::runtime_error("raw file not found: " + test_path);

    // 15 comma-separated fields; '?' marks a missing value and drops the row.
    // adult.test carries a header line starting with '|' and labels with a
    // trailing period.
    std::vector<std::vector<std::string>> rows;
    for (const auto& path : {data_path, test_path}) {
        for (const auto& line : read_lines(path)) {
            if (line.empty() || line[0] == '|') continue;
            auto fields = csv::split_line(line);
            if (fields.size() != 15) continue;
            bool missing = false;
            for (auto& f : fields) {
                f = std::string(csv::trim(f));
                if (f == "?") missing = true;
            }
            if (missing) continue;
            if (!fields[14].empty() && fields[14].back() == '.') fields[14].pop_back();
            rows.push_back(std::move(fields));
        }
    }
    const std::size_t n = rows.size();
    if (n == 0) throw std::runtime_error("adult: no usable rows in " + data_path);

    auto numeric = [&](std::size_t idx) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = csv::parse_double(rows[i][idx]);
        return v;
    };
    auto categorical = [&](std::size_t idx) {
        std::vector<std::string> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = rows[i][idx];
        return v;
    };
    std::vector<std::uint8_t> male(n), white(n), label(n);
    for (std::size_t i = 0; i < n; ++i) {
        male[i] = rows[i][9] == "Male";
        white[i] = rows[i][8] == "White";
        label[i] = rows[i][14] == ">50K";
    }

    DatasetBuilder b;
    b.add_numeric("age", numeric(0));
    b.add_categorical("workclass", categorical(1));
    // fnlwgt (sampling weight) dropped
    b.add_categorical("education", categorical(3));
    b.add_numeric("education-num", numeric(4));
    b.add_categorical("marital-status", categorical(5));
    b.add_categorical("occupation", categorical(6));
    b.add_categorical("relationship", categorical(7));
    if (protected_attr == "sex") {
        b.add_binary("race=White", white);
        b.set_protected(male);
    } else {
        b.add_binary("sex=Male", male);
        b.set_protected(white);
    }
    b.add_numeric("capital-gain", numeric(10));
    b.add_numeric("capital-loss", numeric(11));
    b.add_numeric("hours-per-week", numeric(12));
    b.add_categorical("native-country", categorical(13));
    b.set_labels(label);

    return b.build({"adult", protected_attr, "income >50K", 0});
}

// ---------------------------------------------------------------- german ---

TabularDataset load_german(const std::string& protected_attr, const std::string& source_path) {
    if (protected_attr != "sex" && protected_attr != "age") {
        throw std::invalid_argument("german: protected attribute must be sex or age");
    }
    const std::string path = resolve_raw_path(source_path, "german.data");

    std::vector<std::vector<std::string>> rows;
    for (const auto& line : read_lines(path)) {
        std::istringstream ss(line);
        std::vector<std::string> fields;
        std::string tok;
        while (ss >> tok) fields.push_back(tok);
        if (fields.empty()) continue;
        if (fields.size() != 21) throw std::runtime_error("german: malformed line in " + path);
        rows.push_back(std::move(fields));
    }
    const std::size_t n = rows.size();
    if (n == 0) throw std::runtime_error("german: no rows in " + path);

    auto numeric = [&](std::size_t idx) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = csv::parse_double(rows[i][idx]);
        return v;
    };
    auto categorical = [&](std::size_t idx) {
        std::vector<std::string> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = rows[i][idx];
        return v;
    };
    // Attribute 9 (personal status and sex): A91/A93/A94 male, A92/A95 female.
    std::vector<std::uint8_t> male(n), age_priv(n), label(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::string& ps = rows[i][8];
        male[i] = ps == "A91" || ps == "A93" || ps == "A94";
        age_priv[i] = csv::parse_double(rows[i][12]) > 25.0;
        label[i] = rows[i][20] == "1";  // 1 = good credit (low risk)
    }

    DatasetBuilder b;
    b.add_categorical("status", categorical(0));
    b.add_numeric("duration", numeric(1));
    b.add_categorical("credit_history", categorical(2));
    b.add_categorical("purpose", categorical(3));
    b.add_numeric("credit_amount", numeric(4));
    b.add_categorical("savings", categorical(5));
    b.add_categorical("employment", categorical(6));
    b.add_numeric("installment_rate", numeric(7));
    // personal_status itself is dropped; sex is derived from it
    b.add_categorical("other_debtors", categorical(9));
    b.add_numeric("residence_since", numeric(10));
    b.add_categorical("property", categorical(11));
    if (protected_attr == "sex") {
        b.add_numeric("age", numeric(12));
        b.set_protected(male);
    } else {
        b.add_binary("sex=male", male);
        b.set_protected(age_priv);
    }
    b.add_categorical("other_installment_plans", categorical(13));
    b.add_categorical("housing", categorical(14));
    b.add_numeric("existing_credits", numeric(15));
    b.add_categorical("job", categorical(16));
    b.add_numeric("num_dependents", numeric(17));
    b.add_categorical("telephone", categorical(18));
    b.add_categorical("foreign_worker", categorical(19));
    b.set_labels(label);

    return b.build({"german", protected_attr, "low credit risk", 0});
}

// ---------------------------------------------------------------- compas ---

TabularDataset load_compas(const std::string& protected_attr, const std::string& source_path) {
    if (protected_attr != "sex" && protected_attr != "race") {
        throw std::invalid_argument("compas: protected attribute must be sex or race");
    }
    const std::string path = resolve_raw_path(source_path, "compas-scores-two-years.csv");
    const auto lines = read_lines(path);
    if (lines.size() < 2) throw std::runtime_error("compas: empty file " + path);

    const auto header = csv::split_line(lines[0]);
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* required :
         {"sex", "age", "age_cat", "race", "juv_fel_count", "juv_misd_count", "juv_other_count",
          "priors_count", "days_b_screening_arrest", "c_charge_degree", "c_charge_desc",
          "score_text", "is_recid", "two_year_recid"}) {
        if (!col.count(required)) throw std::runtime_error(std::string("compas: missing column ") + required);
    }

    // Standard two-year-recidivism filter: screening within 30 days of the
    // arrest, a recorded recidivism flag, no ordinary-traffic charges, a
    // usable COMPAS score, and no missing values in the kept columns.
    std::vector<std::vector<std::string>> rows;
    for (std::size_t li = 1; li < lines.size(); ++li) {
        if (lines[li].empty()) continue;
        auto f = csv::split_line(lines[li]);
        if (f.size() != header.size()) continue;
        const std::string& days = f[col["days_b_screening_arrest"]];
        if (days.empty()) continue;
        const double d = csv::parse_double(days);
        if (d > 30.0 || d < -30.0) continue;
        if (f[col["is_recid"]] == "-1") continue;
        if (f[col["c_charge_degree"]] == "O") continue;
        if (f[col["score_text"]] == "N/A") continue;
        bool missing = false;
        for (const char* kept : {"sex", "age", "age_cat", "race", "juv_fel_count", "juv_misd_count",
                                 "juv_other_count", "priors_count", "c_charge_degree",
                                 "c_charge_desc", "two_year_recid"}) {
            if (f[col[kept]].empty()) missing = true;
        }
        if (missing) continue;
        rows.push_back(std::move(f));
    }
    const std::size_t n = rows.size();
    if (n == 0) throw std::runtime_error("compas: no rows pass the filter in " + path);

    auto numeric = [&](const char* name) {
        const std::size_t idx = col[name];
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = csv::parse_double(rows[i][idx]);
        return v;
    };
    auto categorical = [&](const char* name) {
        const std::size_t idx = col[name];
        std::vector<std::string> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = rows[i][idx];
        return v;
    };
    std::vector<std::uint8_t> female(n), caucasian(n), label(n);
    for (std::size_t i = 0; i < n; ++i) {
        female[i] = rows[i][col["sex"]] == "Female";
        caucasian[i] = rows[i][col["race"]] == "Caucasian";
        label[i] = rows[i][col["two_year_recid"]] == "0";  // favorable: no reoffense
    }

    DatasetBuilder b;
    if (protected_attr == "sex") {
        b.add_binary("race=Caucasian", caucasian);
        b.set_protected(female);
    } else {
        b.add_binary("sex=Female", female);
        b.set_protected(caucasian);
    }
    b.add_numeric("age", numeric("age"));
    b.add_categorical("age_cat", categorical("age_cat"));
    b.add_numeric("juv_fel_count", numeric("juv_fel_count"));
    b.add_numeric("juv_misd_count", numeric("juv_misd_count"));
    b.add_numeric("juv_other_count", numeric("juv_other_count"));
    b.add_numeric("priors_count", numeric("priors_count"));
    b.add_categorical("c_charge_degree", categorical("c_charge_degree"));
    b.add_categorical("c_charge_desc", categorical("c_charge_desc"));
    b.set_labels(label);

    return b.build({"compas", protected_attr, "no reoffense within two years", 0});
}

}  // namespace

TabularDataset::TabularDataset(Matrix features, std::vector<std::uint8_t> protected_values,
                               std::vector<std::uint8_t> labels, std::vector<ColumnInfo> columns,
                               SourceMeta meta)
    : features_(std::move(features)),
      protected_(std::move(protected_values)),
      labels_(std::move(labels)),
      columns_(std::move(columns)),
      meta_(std::move(meta)) {
    const std::size_t n = features_.rows();
    if (protected_.size() != n || labels_.size() != n) {
        throw std::invalid_argument("dataset: row counts of features/protected/labels differ");
    }
    if (columns_.size() != features_.cols()) {
        throw std::invalid_argument("dataset: column metadata does not match feature width");
    }
    std::size_t priv = 0, unpriv = 0;
    for (std::uint8_t d : protected_) {
        if (d > 1) throw std::invalid_argument("dataset: protected values must be 0/1");
        (d ? priv : unpriv) += 1;
    }
    for (std::uint8_t y : labels_) {
        if (y > 1) throw std::invalid_argument("dataset: labels must be 0/1");
    }
    if (n > 0 && (priv == 0 || unpriv == 0)) {
        throw std::runtime_error("dataset: a protected group is empty after preparation");
    }
    for (double v : features_.data()) {
        if (!std::isfinite(v)) throw std::invalid_argument("dataset: non-finite feature value");
    }
    meta_.rows = n;
}

DataSplit split_dataset(const TabularDataset& dataset, std::uint64_t seed) {
    const std::size_t n = dataset.rows();
    if (n < 10) throw std::invalid_argument("split_dataset: need at least 10 rows");

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    SplitMix64 rng(seed);
    deterministic_shuffle(perm, rng);

    const auto n_train = static_cast<std::size_t>(std::llround(0.6 * static_cast<double>(n)));
    const auto n_val = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(n)));

    DataSplit split;
    split.seed = seed;
    split.train.assign(perm.begin(), perm.begin() + n_train);
    split.validation.assign(perm.begin() + n_train, perm.begin() + n_train + n_val);
    split.test.assign(perm.begin() + n_train + n_val, perm.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

TabularDataset load_dataset(const std::string& name, const std::string& protected_attr,
                            const std::string& source_path) {
    if (name == "adult") return load_adult(protected_attr, source_path);
    if (name == "german") return load_german(protected_attr, source_path);
    if (name == "compas") return load_compas(protected_attr, source_path);
    throw std::invalid_argument("unknown dataset: " + name + " (expected adult, german or compas)");
}

void save_cache(const TabularDataset& dataset, const std::string& csv_path) {
    const fs::path out(csv_path);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());

    std::ofstream f(csv_path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + csv_path);
    for (const auto& c : dataset.columns()) f << csv::quote_field(c.name) << ',';
    f << csv::quote_field(dataset.meta().protected_attr) << ",label\n";
    for (std::size_t i = 0; i < dataset.rows(); ++i) {
        const auto row = dataset.row(i);
        for (double v : row) f << csv::format_double(v) << ',';
        f << dataset.protected_value(i) << ',' << dataset.label(i) << '\n';
    }
    f.close();

    json side;
    side["schema_version"] = 1;
    side["dataset"] = dataset.meta().dataset;
    side["protected_attr"] = dataset.meta().protected_attr;
    side["favorable"] = dataset.meta().favorable;
    side["rows"] = dataset.rows();
    side["feature_count"] = dataset.feature_count();
    side["conventions"] = {{"protected", "1 = privileged"}, {"label", "1 = favorable"}};
    json cols = json::array();
    for (const auto& c : dataset.columns()) {
        cols.push_back({{"name", c.name},
                        {"kind", c.kind},
                        {"scaled", c.scaled},
                        {"mean", c.mean},
                        {"stdev", c.stdev}});
    }
    side["columns"] = std::move(cols);
    std::ofstream sf(csv_path + ".json", std::ios::binary);
    if (!sf) throw std::runtime_error("cannot write " + csv_path + ".json");
    sf << side.dump(2) << '\n';
}

TabularDataset load_cache(const std::string& csv_path) {
    std::ifstream sf(csv_path + ".json");
    if (!sf) throw std::runtime_error("cannot open sidecar " + csv_path + ".json");
    json side = json::parse(sf);
    if (side.at("schema_version").get<int>() != 1) {
        throw std::runtime_error("unsupported cache schema in " + csv_path + ".json");
    }

    std::vector<ColumnInfo> columns;
    for (const auto& c : side.at("columns")) {
        columns.push_back({c.at("name").get<std::string>(), c.at("kind").get<std::string>(),
                           c.at("scaled").get<bool>(), c.at("mean").get<double>(),
                           c.at("stdev").get<double>()});
    }
    const auto rows = side.at("rows").get<std::size_t>();
    const std::size_t width = columns.size();

    Matrix features(rows, width);
    std::vector<std::uint8_t> prot(rows), labels(rows);
    const auto lines = read_lines(csv_path);
    if (lines.size() != rows + 1) throw std::runtime_error("cache row count mismatch in " + csv_path);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto fields = csv::split_line(lines[i + 1]);
        if (fields.size() != width + 2) throw std::runtime_error("cache column mismatch in " + csv_path);
        for (std::size_t j = 0; j < width; ++j) features.at(i, j) = csv::parse_double(fields[j]);
        prot[i] = static_cast<std::uint8_t>(csv::parse_double(fields[width]));
        labels[i] = static_cast<std::uint8_t>(csv::parse_double(fields[width + 1]));
    }

    SourceMeta meta{side.at("dataset").get<std::string>(),
                    side.at("protected_attr").get<std::string>(),
                    side.at("favorable").get<std::string>(), rows};
    return TabularDataset(std::move(features), std::move(prot), std::move(labels),
                          std::move(columns), std::move(meta));
}

}  // namespace fairpost
