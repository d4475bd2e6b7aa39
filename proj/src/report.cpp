#include "fairpost/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fairpost/csv.hpp"

namespace fairpost {

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

std::ofstream open_out(const std::string& path) {
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    return f;
}

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out.push_back(sep);
        out += parts[i];
    }
    return out;
}

std::string task_label(const ExperimentConfig& c) { return c.dataset + "/" + c.protected_attr; }

std::string exclusion_note(const MethodAggregate& agg) {
    std::ostringstream os;
    if (!agg.di_excluded_seeds.empty()) {
        os << "di n=" << agg.disparate_impact.n << " (excluded seeds:";
        for (std::size_t i = 0; i < agg.di_excluded_seeds.size(); ++i) {
            os << (i ? "," : " ") << agg.di_excluded_seeds[i];
        }
        os << ")";
    }
    if (agg.method == "igd" && !agg.detector_excluded_seeds.empty()) {
        if (os.tellp() > 0) os << "; ";
        os << "detector n=" << agg.detector_accuracy.n << " (excluded seeds:";
        for (std::size_t i = 0; i < agg.detector_excluded_seeds.size(); ++i) {
            os << (i ? "," : " ") << agg.detector_excluded_seeds[i];
        }
        os << ")";
    }
    return os.str();
}

void write_config_comment(std::ofstream& f, const ExperimentConfig& c) {
    f << "# fairpost result v1\n";
    f << "# dataset=" << c.dataset << " protected=" << c.protected_attr
      << " classifier=" << c.classifier << " methods=" << join(c.methods, '+')
      << " splits=" << c.n_splits << " base_seed=" << c.base_seed
      << " epsilon=" << csv::format_double(c.epsilon) << " tau_target=" << c.tau_target
      << " bias_population=" << (c.bias_unprivileged_only ? "unprivileged" : "all") << "\n";
}

const char* kCsvHeader =
    "kind,method,seed,balanced_accuracy,disparate_impact,individual_bias,detector_accuracy,"
    "balanced_accuracy_std,disparate_impact_std,individual_bias_std,detector_accuracy_std,"
    "di_n,detector_n,note\n";

void write_rows(std::ofstream& f, const ExperimentResult& result, const std::string& prefix) {
    for (const auto& rec : result.records) {
        f << prefix << "split," << rec.method << ',' << rec.seed << ',';
        if (rec.failed) {
            f << ",,,,,,,,,," << csv::quote_field("FAILED: " + rec.error) << '\n';
            continue;
        }
        f << csv::format_double(rec.balanced_accuracy) << ',';
        if (rec.di.defined) f << csv::format_double(rec.di.value);
        f << ',' << csv::format_double(rec.individual_bias) << ',';
        if (rec.detector_accuracy) f << csv::format_double(*rec.detector_accuracy);
        f << ",,,,,,,";
        std::string note = rec.note;
        if (!rec.di.defined) note += (note.empty() ? "" : " ") + std::string("di=undefined");
        f << csv::quote_field(note) << '\n';
    }
    for (const auto& agg : result.aggregates) {
        f << prefix << "aggregate," << agg.method << ",,";
        f << csv::format_double(agg.balanced_accuracy.mean) << ',';
        if (agg.disparate_impact.n > 0) f << csv::format_double(agg.disparate_impact.mean);
        f << ',' << csv::format_double(agg.individual_bias.mean) << ',';
        if (agg.method == "igd" && agg.detector_accuracy.n > 0) {
            f << csv::format_double(agg.detector_accuracy.mean);
        }
        f << ',' << csv::format_double(agg.balanced_accuracy.stdev) << ',';
        if (agg.disparate_impact.n > 0) f << csv::format_double(agg.disparate_impact.stdev);
        f << ',' << csv::format_double(agg.individual_bias.stdev) << ',';
        if (agg.method == "igd" && agg.detector_accuracy.n > 0) {
            f << csv::format_double(agg.detector_accuracy.stdev);
        }
        f << ',' << agg.disparate_impact.n << ',';
        if (agg.method == "igd") f << agg.detector_accuracy.n;
        f << ',' << csv::quote_field(exclusion_note(agg)) << '\n';
    }
}

// ------------------------------------------------------------------- svg ---

struct BarSeries {
    std::string label;
    std::string color;
    std::vector<double> mean;
    std::vector<double> stdev;
    std::vector<bool> present;
};

std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

void write_bar_chart(const std::string& path, const std::string& title,
                     const std::string& y_label, const std::vector<std::string>& groups,
                     const std::vector<BarSeries>& series, double ideal) {
    const double width = 720, height = 420;
    const double ml = 64, mr = 16, mt = 44, mb = 64;
    const double plot_w = width - ml - mr, plot_h = height - mt - mb;

    double ymax = ideal;
    for (const auto& s : series) {
        for (std::size_t g = 0; g < groups.size(); ++g) {
            if (g < s.present.size() && s.present[g]) ymax = std::max(ymax, s.mean[g] + s.stdev[g]);
        }
    }
    ymax = ymax <= 0.0 ? 1.0 : ymax * 1.12;
    const auto ypix = [&](double v) { return mt + plot_h * (1.0 - v / ymax); };

    std::ofstream f = open_out(path);
    f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\">\n";
    f << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    f << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << title << "</text>\n";

    // axes and ticks
    f << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + plot_h
      << "\" stroke=\"black\"/>\n";
    f << "<line x1=\"" << ml << "\" y1=\"" << mt + plot_h << "\" x2=\"" << ml + plot_w << "\" y2=\""
      << mt + plot_h << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 5; ++t) {
        const double v = ymax * t / 5.0;
        const double y = ypix(v);
        f << "<line x1=\"" << ml - 4 << "\" y1=\"" << svg_num(y) << "\" x2=\"" << ml << "\" y2=\""
          << svg_num(y) << "\" stroke=\"black\"/>\n";
        f << "<text x=\"" << ml - 8 << "\" y=\"" << svg_num(y + 4)
          << "\" text-anchor=\"end\" font-size=\"11\">" << svg_num(v) << "</text>\n";
    }
    f << "<text x=\"16\" y=\"" << mt + plot_h / 2
      << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << mt + plot_h / 2
      << ")\">" << y_label << "</text>\n";

    // grouped bars
    const std::size_t ng = groups.size(), ns = series.size();
    const double group_w = plot_w / static_cast<double>(ng);
    const double bar_w = group_w / (static_cast<double>(ns) + 1.0);
    for (std::size_t g = 0; g < ng; ++g) {
        const double gx = ml + group_w * static_cast<double>(g);
        for (std::size_t s = 0; s < ns; ++s) {
            const double x = gx + bar_w * (0.5 + static_cast<double>(s));
            if (g >= series[s].present.size() || !series[s].present[g]) {
                f << "<text x=\"" << svg_num(x + bar_w / 2) << "\" y=\"" << svg_num(mt + plot_h - 6)
                  << "\" text-anchor=\"middle\" font-size=\"10\" fill=\"#999\">n/a</text>\n";
                continue;
            }
            const double m = series[s].mean[g], sd = series[s].stdev[g];
            const double ytop = ypix(std::max(0.0, m));
            f << "<rect x=\"" << svg_num(x) << "\" y=\"" << svg_num(ytop) << "\" width=\""
              << svg_num(bar_w * 0.9) << "\" height=\"" << svg_num(mt + plot_h - ytop)
              << "\" fill=\"" << series[s].color << "\"/>\n";
            const double cx = x + bar_w * 0.45;
            const double y1 = ypix(std::min(ymax, m + sd)), y2 = ypix(std::max(0.0, m - sd));
            f << "<line x1=\"" << svg_num(cx) << "\" y1=\"" << svg_num(y1) << "\" x2=\""
              << svg_num(cx) << "\" y2=\"" << svg_num(y2) << "\" stroke=\"black\"/>\n";
            for (double yy : {y1, y2}) {
                f << "<line x1=\"" << svg_num(cx - 4) << "\" y1=\"" << svg_num(yy) << "\" x2=\""
                  << svg_num(cx + 4) << "\" y2=\"" << svg_num(yy) << "\" stroke=\"black\"/>\n";
            }
        }
        f << "<text x=\"" << svg_num(gx + group_w / 2) << "\" y=\"" << svg_num(mt + plot_h + 18)
          << "\" text-anchor=\"middle\" font-size=\"12\">" << groups[g] << "</text>\n";
    }

    // dotted ideal line
    if (ideal <= ymax) {
        const double y = ypix(ideal);
        f << "<line x1=\"" << ml << "\" y1=\"" << svg_num(y) << "\" x2=\"" << ml + plot_w
          << "\" y2=\"" << svg_num(y) << "\" stroke=\"black\" stroke-dasharray=\"4 4\"/>\n";
        f << "<text x=\"" << ml + plot_w - 4 << "\" y=\"" << svg_num(y - 4)
          << "\" text-anchor=\"end\" font-size=\"10\">ideal " << csv::format_double(ideal)
          << "</text>\n";
    }

    // legend
    for (std::size_t s = 0; s < ns; ++s) {
        const double lx = ml + 8, ly = mt + 10 + 16 * static_cast<double>(s);
        f << "<rect x=\"" << lx << "\" y=\"" << svg_num(ly - 9) << "\" width=\"10\" height=\"10\""
          << " fill=\"" << series[s].color << "\"/>\n";
        f << "<text x=\"" << lx + 14 << "\" y=\"" << svg_num(ly) << "\" font-size=\"11\">"
          << series[s].label << "</text>\n";
    }

    f << "</svg>\n";
}

std::string method_color(const std::string& method) {
    if (method == "orig") return "#7f7f7f";
    if (method == "eop") return "#d95f02";
    if (method == "roc") return "#7570b3";
    if (method == "igd") return "#1b9e77";
    return "#333333";
}

enum class Metric { kBias, kDi, kBacc, kDetector };

BarSeries series_for(const std::vector<ExperimentResult>& results, const std::string& method,
                     Metric metric) {
    BarSeries s;
    s.label = method;
    s.color = method_color(method);
    for (const auto& r : results) {
        const MethodAggregate* agg = nullptr;
        for (const auto& a : r.aggregates) {
            if (a.method == method) agg = &a;
        }
        const AggregateStat* stat = nullptr;
        if (agg) {
            switch (metric) {
                case Metric::kBias: stat = &agg->individual_bias; break;
                case Metric::kDi: stat = &agg->disparate_impact; break;
                case Metric::kBacc: stat = &agg->balanced_accuracy; break;
                case Metric::kDetector: stat = &agg->detector_accuracy; break;
            }
        }
        const bool ok = stat != nullptr && stat->n > 0;
        s.present.push_back(ok);
        s.mean.push_back(ok ? stat->mean : 0.0);
        s.stdev.push_back(ok ? stat->stdev : 0.0);
    }
    return s;
}

void write_figures(const std::vector<ExperimentResult>& results, const std::string& dir) {
    if (results.empty()) return;
    std::vector<std::string> groups;
    for (const auto& r : results) groups.push_back(task_label(r.config));
    const auto& methods = results.front().config.methods;

    const auto figure = [&](const std::string& file, const std::string& title,
                            const std::string& ylabel, Metric metric, double ideal) {
        std::vector<BarSeries> series;
        for (const auto& m : methods) {
            if (metric == Metric::kDetector && m != "igd") continue;
            series.push_back(series_for(results, m, metric));
        }
        if (series.empty()) return;
        write_bar_chart((fs::path(dir) / file).string(), title, ylabel, groups, series, ideal);
    };

    figure("fig_individual_bias.svg", "Individual bias (mean +- 1 std)", "individual bias",
           Metric::kBias, 0.0);
    figure("fig_disparate_impact.svg", "Disparate impact (mean +- 1 std)", "disparate impact",
           Metric::kDi, 1.0);
    figure("fig_balanced_accuracy.svg", "Balanced classification accuracy (mean +- 1 std)",
           "balanced accuracy", Metric::kBacc, 1.0);
    const bool has_igd =
        std::find(methods.begin(), methods.end(), "igd") != methods.end();
    if (has_igd) {
        figure("fig_detector_accuracy.svg", "Bias detector balanced accuracy (mean +- 1 std)",
               "detector balanced accuracy", Metric::kDetector, 1.0);
    }
}

// ------------------------------------------------------------------ json ---

json config_to_json(const ExperimentConfig& c) {
    return {{"dataset", c.dataset},
            {"protected_attr", c.protected_attr},
            {"classifier", c.classifier},
            {"methods", c.methods},
            {"n_splits", c.n_splits},
            {"base_seed", c.base_seed},
            {"epsilon", c.epsilon},
            {"output_dir", c.output_dir},
            {"tau_target", c.tau_target},
            {"bias_unprivileged_only", c.bias_unprivileged_only},
            {"threads", c.threads},
            {"l2_strength", c.l2_strength},
            {"forest_trees", c.forest_trees},
            {"forest_min_leaf", c.forest_min_leaf}};
}

ExperimentConfig config_from_json(const json& j) {
    ExperimentConfig c;
    c.dataset = j.at("dataset").get<std::string>();
    c.protected_attr = j.at("protected_attr").get<std::string>();
    c.classifier = j.at("classifier").get<std::string>();
    c.methods = j.at("methods").get<std::vector<std::string>>();
    c.n_splits = j.at("n_splits").get<int>();
    c.base_seed = j.at("base_seed").get<std::uint64_t>();
    c.epsilon = j.at("epsilon").get<double>();
    c.output_dir = j.at("output_dir").get<std::string>();
    c.tau_target = j.at("tau_target").get<std::string>();
    c.bias_unprivileged_only = j.at("bias_unprivileged_only").get<bool>();
    c.threads = j.at("threads").get<int>();
    c.l2_strength = j.at("l2_strength").get<double>();
    c.forest_trees = j.at("forest_trees").get<int>();
    c.forest_min_leaf = j.at("forest_min_leaf").get<int>();
    return c;
}

json record_to_json(const SplitRecord& r) {
    json j = {{"seed", r.seed},       {"method", r.method}, {"failed", r.failed},
              {"error", r.error},     {"note", r.note}};
    if (!r.failed) {
        j["balanced_accuracy"] = r.balanced_accuracy;
        j["individual_bias"] = r.individual_bias;
        if (r.di.defined) {
            j["disparate_impact"] = r.di.value;
        } else {
            j["disparate_impact"] = nullptr;
        }
        if (r.detector_accuracy) {
            j["detector_accuracy"] = *r.detector_accuracy;
        } else {
            j["detector_accuracy"] = nullptr;
        }
    }
    return j;
}

SplitRecord record_from_json(const json& j) {
    SplitRecord r;
    r.seed = j.at("seed").get<std::uint64_t>();
    r.method = j.at("method").get<std::string>();
    r.failed = j.at("failed").get<bool>();
    r.error = j.at("error").get<std::string>();
    r.note = j.at("note").get<std::string>();
    if (!r.failed) {
        r.balanced_accuracy = j.at("balanced_accuracy").get<double>();
        r.individual_bias = j.at("individual_bias").get<double>();
        if (!j.at("disparate_impact").is_null()) {
            r.di = {j.at("disparate_impact").get<double>(), true};
        }
        if (!j.at("detector_accuracy").is_null()) {
            r.detector_accuracy = j.at("detector_accuracy").get<double>();
        }
    }
    return r;
}

}  // namespace

void write_result_csv(const ExperimentResult& result, const std::string& path) {
    std::ofstream f = open_out(path);
    write_config_comment(f, result.config);
    f << kCsvHeader;
    write_rows(f, result, "");
}

void write_result_json(const ExperimentResult& result, const std::string& path) {
    json j;
    j["schema_version"] = 1;
    j["config"] = config_to_json(result.config);
    json records = json::array();
    for (const auto& r : result.records) records.push_back(record_to_json(r));
    j["records"] = std::move(records);
    std::ofstream f = open_out(path);
    f << j.dump(2) << '\n';
}

ExperimentResult result_from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    const json j = json::parse(in);
    if (j.at("schema_version").get<int>() != 1) {
        throw std::runtime_error("unsupported result schema in " + path);
    }
    ExperimentResult result;
    result.config = config_from_json(j.at("config"));
    for (const auto& rj : j.at("records")) result.records.push_back(record_from_json(rj));
    result.aggregates = aggregate_records(result.records, result.config.methods);
    return result;
}

void write_result_figures(const ExperimentResult& result, const std::string& dir) {
    fs::create_directories(dir);
    write_figures({result}, dir);
}

void emit_report(const ExperimentResult& result, const std::vector<std::string>& formats,
                 const std::string& dir) {
    fs::create_directories(dir);
    for (const auto& fmt : formats) {
        if (fmt == "csv") {
            write_result_csv(result, (fs::path(dir) / "result.csv").string());
        } else if (fmt == "json") {
            write_result_json(result, (fs::path(dir) / "result.json").string());
        } else if (fmt == "svg") {
            write_result_figures(result, dir);
        } else {
            throw std::invalid_argument("unknown report format: " + fmt);
        }
    }
}

void write_combined_csv(const std::vector<ExperimentResult>& results, const std::string& path) {
    std::ofstream f = open_out(path);
    f << "# fairpost combined results v1\n";
    f << "dataset,protected,classifier,";
    f << kCsvHeader;
    for (const auto& r : results) {
        const std::string prefix =
            r.config.dataset + "," + r.config.protected_attr + "," + r.config.classifier + ",";
        write_rows(f, r, prefix);
    }
}

void write_combined_figures(const std::vector<ExperimentResult>& results, const std::string& dir) {
    fs::create_directories(dir);
    write_figures(results, dir);
}

}  // namespace fairpost
