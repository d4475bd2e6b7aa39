#pragma once

#include <string>
#include <vector>

#include "fairpost/harness.hpp"

namespace fairpost {

// result.csv: one row per (split, method) plus one aggregate row per method.
// Every double is written in shortest exact form, so identical runs produce
// byte-identical files and aggregates can be recomputed losslessly.
void write_result_csv(const ExperimentResult& result, const std::string& path);

void write_result_json(const ExperimentResult& result, const std::string& path);
ExperimentResult result_from_json_file(const std::string& path);

// fig_individual_bias.svg, fig_disparate_impact.svg, fig_balanced_accuracy.svg
// and (when IGD ran) fig_detector_accuracy.svg; mean bars with +-1 std
// whiskers and a dotted ideal-value line. Hand-emitted SVG, no dependencies.
void write_result_figures(const ExperimentResult& result, const std::string& dir);

/// formats: subset of {"csv", "json", "svg"}; writes into `dir`.
void emit_report(const ExperimentResult& result, const std::vector<std::string>& formats,
                 const std::string& dir);

// Cross-task variants used by `replicate`: grouped bars, one group per task.
void write_combined_csv(const std::vector<ExperimentResult>& results, const std::string& path);
void write_combined_figures(const std::vector<ExperimentResult>& results, const std::string& dir);

}  // namespace fairpost
