#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fairpost/dataset.hpp"
#include "fairpost/harness.hpp"
#include "fairpost/report.hpp"

namespace fs = std::filesystem;
using namespace fairpost;

namespace {

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : csv) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

std::string output_base(const std::string& flag_value) {
    if (const char* env = std::getenv("FAIRPOST_OUTPUT_DIR"); env && *env) return env;
    return flag_value;
}

TabularDataset resolve_dataset(const std::string& dataset, const std::string& protected_attr,
                               const std::string& cache, const std::string& raw_dir) {
    if (!cache.empty()) return load_cache(cache);
    const fs::path prepared = fs::path("data/prepared") / (dataset + "_" + protected_attr + ".csv");
    if (fs::exists(prepared) && fs::exists(prepared.string() + ".json")) {
        return load_cache(prepared.string());
    }
    return load_dataset(dataset, protected_attr, raw_dir);
}

struct Task {
    std::string dataset;
    std::string protected_attr;
};

const std::vector<Task> kBenchmarkTasks = {
    {"adult", "sex"}, {"adult", "race"},  {"german", "sex"},
    {"german", "age"}, {"compas", "sex"}, {"compas", "race"},
};

void print_aggregates(const ExperimentResult& result) {
    for (const auto& agg : result.aggregates) {
        std::cout << "  " << agg.method << ": bal_acc=" << agg.balanced_accuracy.mean
                  << " di=" << (agg.disparate_impact.n ? std::to_string(agg.disparate_impact.mean)
                                                       : std::string("undefined"))
                  << " ind_bias=" << agg.individual_bias.mean;
        if (agg.method == "igd" && agg.detector_accuracy.n > 0) {
            std::cout << " detector_acc=" << agg.detector_accuracy.mean;
        }
        std::cout << "\n";
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fairpost: individual+group debiasing post-processing toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from a flat key=value file");

    // prepare ----------------------------------------------------------------
    auto* prepare = app.add_subcommand("prepare", "Encode a raw dataset into the prepared cache");
    std::string p_dataset, p_protected, p_input = "data/raw", p_output = "data/prepared";
    prepare->add_option("--dataset", p_dataset, "adult | german | compas")->required();
    prepare->add_option("--protected", p_protected, "protected attribute")->required();
    prepare->add_option("--input", p_input, "raw file or directory of raw files");
    prepare->add_option("--output", p_output, "cache directory");

    // run --------------------------------------------------------------------
    auto* run = app.add_subcommand("run", "Run one experiment grid (task x splits x methods)");
    ExperimentConfig cfg;
    std::string r_methods = "orig,eop,roc,igd";
    std::string r_cache, r_raw_dir = "data/raw", r_output, r_formats = "csv,json,svg";
    std::string r_bias_population = "all";
    run->add_option("--dataset", cfg.dataset, "adult | german | compas")->required();
    run->add_option("--protected", cfg.protected_attr, "protected attribute")->required();
    run->add_option("--classifier", cfg.classifier, "logistic | forest");
    run->add_option("--methods", r_methods, "comma list from orig,eop,roc,igd");
    run->add_option("--splits", cfg.n_splits, "number of random partitions");
    run->add_option("--seed", cfg.base_seed, "base seed; split i uses seed+i");
    run->add_option("--epsilon", cfg.epsilon, "disparate-impact band parameter");
    run->add_option("--cache", r_cache, "prepared cache CSV (overrides raw loading)");
    run->add_option("--raw-dir", r_raw_dir, "directory with raw files");
    run->add_option("--output", r_output, "output directory (default out/<task>)");
    run->add_option("--formats", r_formats, "comma list from csv,json,svg");
    run->add_option("--tau-target", cfg.tau_target, "smallest | center");
    run->add_option("--bias-population", r_bias_population,
                    "individual-bias summary population: all | unprivileged");
    run->add_option("--threads", cfg.threads, "worker threads (0 = auto)");
    run->add_option("--l2", cfg.l2_strength, "logistic regularization strength");

    // report -----------------------------------------------------------------
    auto* report = app.add_subcommand("report", "Re-render reports from a result.json");
    std::string t_input, t_output, t_formats = "csv,svg";
    report->add_option("--input", t_input, "result.json path")->required();
    report->add_option("--output", t_output, "output directory")->required();
    report->add_option("--formats", t_formats, "comma list from csv,json,svg");

    // replicate ----------------------------------------------------------------
    auto* replicate = app.add_subcommand(
        "replicate", "Full benchmark: 6 tasks x 25 splits, logistic base, all methods");
    std::string x_raw_dir = "data/raw", x_output = "out/replicate";
    int x_splits = 25, x_threads = 0;
    std::uint64_t x_seed = 42;
    double x_epsilon = 0.2;
    replicate->add_option("--raw-dir", x_raw_dir, "directory with raw files");
    replicate->add_option("--output", x_output, "output directory");
    replicate->add_option("--splits", x_splits, "number of random partitions");
    replicate->add_option("--seed", x_seed, "base seed");
    replicate->add_option("--epsilon", x_epsilon, "disparate-impact band parameter");
    replicate->add_option("--threads", x_threads, "worker threads (0 = auto)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*prepare) {
            const TabularDataset ds = load_dataset(p_dataset, p_protected, p_input);
            const fs::path out = fs::path(output_base(p_output)) / (p_dataset + "_" + p_protected + ".csv");
            save_cache(ds, out.string());
            std::cout << "prepared " << ds.rows() << " rows x " << ds.feature_count()
                      << " features -> " << out.string() << "\n";
        } else if (*run) {
            cfg.methods = split_list(r_methods);
            cfg.bias_unprivileged_only = r_bias_population == "unprivileged";
            if (r_bias_population != "all" && r_bias_population != "unprivileged") {
                throw std::invalid_argument("--bias-population must be all or unprivileged");
            }
            cfg.validate();
            const std::string out_dir =
                !r_output.empty()
                    ? output_base(r_output)
                    : (fs::path(output_base("out")) /
                       (cfg.dataset + "_" + cfg.protected_attr + "_" + cfg.classifier))
                          .string();
            cfg.output_dir = out_dir;
            const TabularDataset ds =
                resolve_dataset(cfg.dataset, cfg.protected_attr, r_cache, r_raw_dir);
            const ExperimentResult result = run_experiment(ds, cfg);
            emit_report(result, split_list(r_formats), out_dir);
            std::cout << cfg.dataset << "/" << cfg.protected_attr << " (" << cfg.classifier
                      << ", " << cfg.n_splits << " splits):\n";
            print_aggregates(result);
            std::cout << "reports written to " << out_dir << "\n";
        } else if (*report) {
            const ExperimentResult result = result_from_json_file(t_input);
            emit_report(result, split_list(t_formats), output_base(t_output));
            std::cout << "reports written to " << output_base(t_output) << "\n";
        } else if (*replicate) {
            const std::string out_dir = output_base(x_output);
            std::vector<ExperimentResult> results;
            for (const auto& task : kBenchmarkTasks) {
                ExperimentConfig c;
                c.dataset = task.dataset;
                c.protected_attr = task.protected_attr;
                c.n_splits = x_splits;
                c.base_seed = x_seed;
                c.epsilon = x_epsilon;
                c.threads = x_threads;
                c.output_dir = (fs::path(out_dir) / (task.dataset + "_" + task.protected_attr)).string();
                const TabularDataset ds =
                    resolve_dataset(task.dataset, task.protected_attr, "", x_raw_dir);
                std::cout << task.dataset << "/" << task.protected_attr << " (" << ds.rows()
                          << " rows):\n";
                ExperimentResult result = run_experiment(ds, c);
                print_aggregates(result);
                emit_report(result, {"csv", "json", "svg"}, c.output_dir);
                results.push_back(std::move(result));
            }
            write_combined_csv(results, (fs::path(out_dir) / "summary.csv").string());
            write_combined_figures(results, out_dir);
            std::cout << "combined reports written to " << out_dir << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
