#include "fairpost/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "fairpost/csv.hpp"
#include "fairpost/metrics.hpp"
#include "fairpost/rng.hpp"

namespace fairpost {

namespace {

constexpr double kUndefined = std::numeric_limits<double>::quiet_NaN();

void require_fitted(bool fitted, const ScoredClassifier* base, const char* what) {
    if (!fitted || base == nullptr) {
        throw std::logic_error(std::string(what) + ": apply called before fit/bind");
    }
}

}  // namespace

// ------------------------------------------------------------ select_tau ---

TauSelection select_tau(std::span<const double> bias_scores,
                        std::span<const std::uint8_t> base_decisions,
                        std::span<const std::uint8_t> counterfactual_decisions,
                        std::span<const std::uint8_t> protected_values, double epsilon) {
    return select_tau(bias_scores, base_decisions, counterfactual_decisions, protected_values,
                      epsilon, TauTarget::kSmallest);
}

TauSelection select_tau(std::span<const double> bias_scores,
                        std::span<const std::uint8_t> base_decisions,
                        std::span<const std::uint8_t> counterfactual_decisions,
                        std::span<const std::uint8_t> protected_values, double epsilon,
                        TauTarget target) {
    const std::size_t m = bias_scores.size();
    if (m == 0) throw std::invalid_argument("select_tau: no unprivileged rows");
    if (counterfactual_decisions.size() != m) {
        throw std::invalid_argument("select_tau: counterfactual vector length mismatch");
    }
    if (base_decisions.size() != protected_values.size()) {
        throw std::invalid_argument("select_tau: validation vector length mismatch");
    }

    // favorable counts per group under the base decisions
    std::size_t n0 = 0, n1 = 0, f1 = 0;
    std::ptrdiff_t f0 = 0;
    std::vector<std::size_t> unpriv_positions;
    unpriv_positions.reserve(m);
    for (std::size_t i = 0; i < base_decisions.size(); ++i) {
        if (protected_values[i]) {
            ++n1;
            f1 += base_decisions[i];
        } else {
            ++n0;
            f0 += base_decisions[i];
            unpriv_positions.push_back(i);
        }
    }
    if (unpriv_positions.size() != m) {
        throw std::invalid_argument("select_tau: bias scores do not match the unprivileged rows");
    }
    if (n1 == 0) throw std::invalid_argument("select_tau: no privileged rows");
    if (f1 == 0) {
        throw std::runtime_error(
            "select_tau: disparate impact undefined at every k (privileged favorable rate is zero)");
    }

    // rank by bias score descending, ties by original position ascending
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return bias_scores[a] > bias_scores[b];
    });

    const double lo = 1.0 - epsilon;
    const double hi = epsilon < 1.0 ? 1.0 / (1.0 - epsilon) : std::numeric_limits<double>::infinity();
    const double priv_rate = static_cast<double>(f1) / static_cast<double>(n1);

    TauSelection sel;
    sel.di_path.reserve(m + 1);

    std::optional<std::size_t> chosen;
    double chosen_di = kUndefined;
    std::optional<std::size_t> fallback;  // max DI subject to DI <= hi
    double fallback_di = -1.0;
    std::optional<std::size_t> center;    // DI closest to 1
    double center_dist = std::numeric_limits<double>::infinity();

    std::ptrdiff_t favorable0 = f0;
    for (std::size_t k = 0; k <= m; ++k) {
        if (k > 0) {
            const std::size_t j = order[k - 1];
            favorable0 += static_cast<std::ptrdiff_t>(counterfactual_decisions[j]) -
                          static_cast<std::ptrdiff_t>(base_decisions[unpriv_positions[j]]);
        }
        const double di =
            (static_cast<double>(favorable0) / static_cast<double>(n0)) / priv_rate;
        sel.di_path.push_back(di);

        if (di >= lo && di <= hi) {
            if (target == TauTarget::kSmallest) {
                if (!chosen) {
                    chosen = k;
                    chosen_di = di;
                }
            } else {
                const double dist = std::abs(di - 1.0);
                if (dist < center_dist) {
                    center_dist = dist;
                    center = k;
                    chosen_di = di;
                }
            }
        }
        if (di <= hi && di > fallback_di) {
            fallback_di = di;
            fallback = k;
        }
    }
    if (target == TauTarget::kCenter) chosen = center;

    if (chosen) {
        sel.k = *chosen;
        sel.constraint_met = true;
        sel.achieved_di = target == TauTarget::kSmallest ? sel.di_path[*chosen] : chosen_di;
    } else {
        sel.k = fallback.value_or(0);
        sel.constraint_met = false;
        sel.achieved_di = sel.di_path[sel.k];
    }
    sel.achieved_di_defined = true;

    sel.beta.assign(m, 0);
    for (std::size_t r = 0; r < sel.k; ++r) sel.beta[order[r]] = 1;

    if (sel.k == 0) {
        sel.tau = bias_scores[order[0]] + 1.0;
    } else if (sel.k == m) {
        sel.tau = bias_scores[order[m - 1]] - 1.0;
    } else {
        sel.tau = 0.5 * (bias_scores[order[sel.k - 1]] + bias_scores[order[sel.k]]);
    }
    return sel;
}

// -------------------------------------------------------------- identity ---

int IdentityPostProcessor::apply(std::span<const double> x, int d, std::uint64_t) const {
    require_fitted(base_ != nullptr, base_, "orig");
    return base_->label(x, d);
}

nlohmann::json IdentityPostProcessor::to_json() const {
    return {{"schema_version", 1}, {"method", "orig"}};
}

// ------------------------------------------------------------------- igd ---

void IgdPostProcessor::fit(const ScoredClassifier& base, const DatasetView& validation) {
    const std::size_t n = validation.size();
    if (n == 0) throw std::invalid_argument("igd: empty validation view");

    std::vector<std::uint8_t> base_decisions(n), protected_values(n);
    std::vector<double> bias_scores;
    std::vector<std::uint8_t> counterfactual;
    std::vector<std::size_t> unpriv_rows;
    for (std::size_t k = 0; k < n; ++k) {
        const auto x = validation.row(k);
        const int d = validation.protected_value(k);
        protected_values[k] = static_cast<std::uint8_t>(d);
        base_decisions[k] = static_cast<std::uint8_t>(base.label(x, d));
        if (d == 0) {
            bias_scores.push_back(individual_bias_score(base, x));
            counterfactual.push_back(static_cast<std::uint8_t>(base.label(x, 1)));
            unpriv_rows.push_back(k);
        }
    }
    if (unpriv_rows.empty()) throw std::invalid_argument("igd: validation has no unprivileged rows");

    const TauSelection sel = select_tau(bias_scores, base_decisions, counterfactual,
                                        protected_values, config_.epsilon, config_.tau_target);
    tau_ = sel.tau;
    k_ = sel.k;
    constraint_met_ = sel.constraint_met;

    // auxiliary dataset {(x_j, beta_j)} over unprivileged rows only
    bool has0 = false, has1 = false;
    for (std::uint8_t b : sel.beta) (b ? has1 : has0) = true;
    if (has0 && has1) {
        const std::size_t p = validation.data->feature_count();
        Matrix aux(unpriv_rows.size(), p);
        for (std::size_t j = 0; j < unpriv_rows.size(); ++j) {
            const auto row = validation.row(unpriv_rows[j]);
            std::copy(row.begin(), row.end(), aux.row(j).begin());
        }
        detector_ = train_logistic_matrix(aux, sel.beta, config_.detector_options,
                                          /*has_protected_input=*/false);
        degenerate_detector_ = false;
    } else {
        // all labels identical: the detector is the constant predictor
        degenerate_detector_ = true;
        degenerate_class_ = has1 ? 1 : 0;
        detector_ = LogisticModel{};
        detector_.weights.assign(validation.data->feature_count(), 0.0);
        detector_.intercept = degenerate_class_ ? 50.0 : -50.0;
        detector_.l2_strength = config_.detector_options.l2_strength;
        detector_.has_protected_input = false;
    }

    base_ = &base;
    fitted_ = true;
}

int IgdPostProcessor::detector_label(std::span<const double> x) const {
    return detector_.score(x, 0) >= 0.5 ? 1 : 0;
}

int IgdPostProcessor::apply(std::span<const double> x, int d, std::uint64_t) const {
    require_fitted(fitted_, base_, "igd");
    if (d == 1) return base_->label(x, 1);
    if (detector_label(x)) return base_->label(x, 1);
    return base_->label(x, 0);
}

nlohmann::json IgdPostProcessor::to_json() const {
    return {{"schema_version", 1},
            {"method", "igd"},
            {"epsilon", config_.epsilon},
            {"tau_target", config_.tau_target == TauTarget::kSmallest ? "smallest" : "center"},
            {"tau", tau_},
            {"flip_count_val", k_},
            {"constraint_met", constraint_met_},
            {"degenerate_detector", degenerate_detector_},
            {"degenerate_class", degenerate_class_},
            {"detector", detector_.to_json()}};
}

IgdPostProcessor IgdPostProcessor::from_json(const nlohmann::json& j) {
    if (j.at("method").get<std::string>() != "igd") throw std::invalid_argument("not an igd document");
    IgdPostProcessor p;
    p.config_.epsilon = j.at("epsilon").get<double>();
    p.config_.tau_target =
        j.at("tau_target").get<std::string>() == "center" ? TauTarget::kCenter : TauTarget::kSmallest;
    p.tau_ = j.at("tau").get<double>();
    p.k_ = j.at("flip_count_val").get<std::size_t>();
    p.constraint_met_ = j.at("constraint_met").get<bool>();
    p.degenerate_detector_ = j.at("degenerate_detector").get<bool>();
    p.degenerate_class_ = j.at("degenerate_class").get<int>();
    p.detector_ = LogisticModel::from_json(j.at("detector"));
    p.fitted_ = true;
    return p;
}

std::string IgdPostProcessor::diagnostics() const {
    std::ostringstream os;
    os << "k=" << k_ << " tau=" << csv::format_double(tau_)
       << " constraint_met=" << (constraint_met_ ? 1 : 0);
    if (degenerate_detector_) os << " detector=constant" << degenerate_class_;
    return os.str();
}

// ------------------------------------------------------------------- roc ---

void RocPostProcessor::fit(const ScoredClassifier& base, const DatasetView& validation) {
    const std::size_t n = validation.size();
    if (n == 0) throw std::invalid_argument("roc: empty validation view");

    std::vector<double> scores(n);
    std::vector<std::uint8_t> protected_values(n), base_labels(n);
    for (std::size_t k = 0; k < n; ++k) {
        scores[k] = base.score(validation.row(k), validation.protected_value(k));
        protected_values[k] = static_cast<std::uint8_t>(validation.protected_value(k));
        base_labels[k] = scores[k] >= 0.5 ? 1 : 0;
    }

    const double lo = 1.0 - config_.epsilon;
    const double hi = config_.epsilon < 1.0 ? 1.0 / (1.0 - config_.epsilon)
                                            : std::numeric_limits<double>::infinity();

    std::optional<double> smallest_in_band;
    double smallest_in_band_di = kUndefined;
    std::optional<double> closest;
    double closest_dist = std::numeric_limits<double>::infinity();
    double closest_di = kUndefined;

    std::vector<std::uint8_t> decisions(n);
    for (int step = 1;; ++step) {
        const double theta = static_cast<double>(step) * config_.grid_step;
        if (theta >= 0.5 - 1e-12) break;
        for (std::size_t k = 0; k < n; ++k) {
            decisions[k] = std::abs(scores[k] - 0.5) < theta ? (protected_values[k] ? 0 : 1)
                                                             : base_labels[k];
        }
        const DisparateImpact di = disparate_impact(decisions, protected_values);
        if (!di.defined) continue;
        if (di.value >= lo && di.value <= hi && !smallest_in_band) {
            smallest_in_band = theta;
            smallest_in_band_di = di.value;
        }
        const double dist = std::abs(di.value - 1.0);
        if (dist < closest_dist) {
            closest_dist = dist;
            closest = theta;
            closest_di = di.value;
        }
    }

    if (smallest_in_band) {
        theta_ = *smallest_in_band;
        achieved_di_ = smallest_in_band_di;
        constraint_met_ = true;
    } else if (closest) {
        theta_ = *closest;
        achieved_di_ = closest_di;
        constraint_met_ = false;
    } else {
        throw std::runtime_error("roc: disparate impact undefined at every theta");
    }

    base_ = &base;
    fitted_ = true;
}

int RocPostProcessor::apply(std::span<const double> x, int d, std::uint64_t) const {
    require_fitted(fitted_, base_, "roc");
    const double s = base_->score(x, d);
    if (std::abs(s - 0.5) < theta_) return d == 0 ? 1 : 0;
    return s >= 0.5 ? 1 : 0;
}

nlohmann::json RocPostProcessor::to_json() const {
    return {{"schema_version", 1},
            {"method", "roc"},
            {"epsilon", config_.epsilon},
            {"grid_step", config_.grid_step},
            {"theta", theta_},
            {"constraint_met", constraint_met_},
            {"achieved_di", achieved_di_}};
}

RocPostProcessor RocPostProcessor::from_json(const nlohmann::json& j) {
    if (j.at("method").get<std::string>() != "roc") throw std::invalid_argument("not a roc document");
    RocPostProcessor p;
    p.config_.epsilon = j.at("epsilon").get<double>();
    p.config_.grid_step = j.at("grid_step").get<double>();
    p.theta_ = j.at("theta").get<double>();
    p.constraint_met_ = j.at("constraint_met").get<bool>();
    p.achieved_di_ = j.at("achieved_di").get<double>();
    p.fitted_ = true;
    return p;
}

std::string RocPostProcessor::diagnostics() const {
    std::ostringstream os;
    os << "theta=" << csv::format_double(theta_)
       << " val_di=" << csv::format_double(achieved_di_)
       << " constraint_met=" << (constraint_met_ ? 1 : 0);
    return os.str();
}

// ------------------------------------------------------------------- eop ---

void EopPostProcessor::fit(const ScoredClassifier& base, const DatasetView& validation) {
    const std::size_t n = validation.size();
    if (n == 0) throw std::invalid_argument("eop: empty validation view");

    // counts[d][y][yhat]
    double counts[2][2][2] = {};
    for (std::size_t k = 0; k < n; ++k) {
        const int d = validation.protected_value(k);
        const int y = validation.label(k);
        const int yhat = base.label(validation.row(k), d);
        counts[d][y][yhat] += 1.0;
    }
    for (int d = 0; d < 2; ++d) {
        if (counts[d][0][0] + counts[d][0][1] == 0.0 || counts[d][1][0] + counts[d][1][1] == 0.0) {
            throw std::runtime_error("eop: a validation group is missing a truth class");
        }
    }
    for (int d = 0; d < 2; ++d) {
        tpr_[d] = counts[d][1][1] / (counts[d][1][0] + counts[d][1][1]);
        fpr_[d] = counts[d][0][1] / (counts[d][0][0] + counts[d][0][1]);
    }

    // Linear program over v = [p(0,0), p(0,1), p(1,0), p(1,1)], the
    // probabilities that the final label is favorable per (d, yhat) cell:
    //   minimize  sum_d sum_yhat  n(d,0,yhat)*v + n(d,1,yhat)*(1-v)
    //   s.t.      expected TPR and FPR equal across groups, 0 <= v <= 1.
    // The feasible region is a box cut by two hyperplanes; every vertex has
    // at least two coordinates at a bound, so enumerating all candidates
    // with 0, 1 or 2 free coordinates covers the optimum exactly.
    const double a[2][4] = {
        {1.0 - tpr_[0], tpr_[0], -(1.0 - tpr_[1]), -tpr_[1]},
        {1.0 - fpr_[0], fpr_[0], -(1.0 - fpr_[1]), -fpr_[1]},
    };
    double cost_coeff[4], cost_base = 0.0;
    for (int d = 0; d < 2; ++d) {
        for (int yhat = 0; yhat < 2; ++yhat) {
            cost_coeff[2 * d + yhat] = counts[d][0][yhat] - counts[d][1][yhat];
            cost_base += counts[d][1][yhat];
        }
    }

    constexpr double kFeasTol = 1e-9;
    const auto residual = [&](const double v[4], int row) {
        return a[row][0] * v[0] + a[row][1] * v[1] + a[row][2] * v[2] + a[row][3] * v[3];
    };
    const auto feasible = [&](const double v[4]) {
        for (int i = 0; i < 4; ++i) {
            if (v[i] < -kFeasTol || v[i] > 1.0 + kFeasTol) return false;
        }
        return std::abs(residual(v, 0)) <= kFeasTol && std::abs(residual(v, 1)) <= kFeasTol;
    };
    const auto cost_of = [&](const double v[4]) {
        double c = cost_base;
        for (int i = 0; i < 4; ++i) c += cost_coeff[i] * v[i];
        return c;
    };

    double best[4] = {0.0, 0.0, 0.0, 0.0};
    double best_cost = std::numeric_limits<double>::infinity();
    bool found = false;
    const auto consider = [&](double v[4]) {
        for (int i = 0; i < 4; ++i) v[i] = std::clamp(v[i], 0.0, 1.0);
        if (!feasible(v)) return;
        const double c = cost_of(v);
        if (!found || c < best_cost - 1e-12) {
            found = true;
            best_cost = c;
            std::copy(v, v + 4, best);
        } else if (c < best_cost + 1e-12) {
            // deterministic tie-break: lexicographically smallest vector
            for (int i = 0; i < 4; ++i) {
                if (v[i] < best[i] - 1e-15) {
                    std::copy(v, v + 4, best);
                    break;
                }
                if (v[i] > best[i] + 1e-15) break;
            }
        }
    };

    // all four at bounds
    for (int mask = 0; mask < 16; ++mask) {
        double v[4];
        for (int i = 0; i < 4; ++i) v[i] = (mask >> i) & 1;
        consider(v);
    }
    // one free coordinate
    for (int f = 0; f < 4; ++f) {
        for (int mask = 0; mask < 8; ++mask) {
            double v[4];
            int bit = 0;
            for (int i = 0; i < 4; ++i) {
                if (i == f) continue;
                v[i] = (mask >> bit) & 1;
                ++bit;
            }
            for (int row = 0; row < 2; ++row) {
                if (std::abs(a[row][f]) < 1e-12) continue;
                v[f] = 0.0;
                v[f] = -residual(v, row) / a[row][f];
                consider(v);
            }
        }
    }
    // two free coordinates
    for (int f1 = 0; f1 < 4; ++f1) {
        for (int f2 = f1 + 1; f2 < 4; ++f2) {
            for (int mask = 0; mask < 4; ++mask) {
                double v[4];
                int bit = 0;
                for (int i = 0; i < 4; ++i) {
                    if (i == f1 || i == f2) continue;
                    v[i] = (mask >> bit) & 1;
                    ++bit;
                }
                v[f1] = v[f2] = 0.0;
                const double b0 = -residual(v, 0), b1 = -residual(v, 1);
                const double det = a[0][f1] * a[1][f2] - a[0][f2] * a[1][f1];
                if (std::abs(det) < 1e-12) continue;
                v[f1] = (b0 * a[1][f2] - a[0][f2] * b1) / det;
                v[f2] = (a[0][f1] * b1 - b0 * a[1][f1]) / det;
                consider(v);
            }
        }
    }

    if (!found) throw std::runtime_error("eop: no feasible vertex found");  // unreachable: all-ones is feasible
    for (int d = 0; d < 2; ++d) {
        for (int yhat = 0; yhat < 2; ++yhat) flip_probs_[d][yhat] = best[2 * d + yhat];
    }
    base_ = &base;
    fitted_ = true;
}

int EopPostProcessor::apply(std::span<const double> x, int d, std::uint64_t sample_id) const {
    require_fitted(fitted_, base_, "eop");
    const int yhat = base_->label(x, d);
    const double u = keyed_uniform(sample_id, static_cast<std::uint64_t>(d), config_.seed);
    return u < flip_probs_[d][yhat] ? 1 : 0;
}

double EopPostProcessor::expected_tpr_gap() const {
    const double t0 = tpr_[0] * flip_probs_[0][1] + (1.0 - tpr_[0]) * flip_probs_[0][0];
    const double t1 = tpr_[1] * flip_probs_[1][1] + (1.0 - tpr_[1]) * flip_probs_[1][0];
    return std::abs(t0 - t1);
}

double EopPostProcessor::expected_fpr_gap() const {
    const double f0 = fpr_[0] * flip_probs_[0][1] + (1.0 - fpr_[0]) * flip_probs_[0][0];
    const double f1 = fpr_[1] * flip_probs_[1][1] + (1.0 - fpr_[1]) * flip_probs_[1][0];
    return std::abs(f0 - f1);
}

nlohmann::json EopPostProcessor::to_json() const {
    return {{"schema_version", 1},
            {"method", "eop"},
            {"seed", config_.seed},
            {"flip_probs", {flip_probs_[0][0], flip_probs_[0][1], flip_probs_[1][0], flip_probs_[1][1]}},
            {"tpr", {tpr_[0], tpr_[1]}},
            {"fpr", {fpr_[0], fpr_[1]}}};
}

EopPostProcessor EopPostProcessor::from_json(const nlohmann::json& j) {
    if (j.at("method").get<std::string>() != "eop") throw std::invalid_argument("not an eop document");
    EopPostProcessor p;
    p.config_.seed = j.at("seed").get<std::uint64_t>();
    const auto probs = j.at("flip_probs").get<std::vector<double>>();
    const auto tpr = j.at("tpr").get<std::vector<double>>();
    const auto fpr = j.at("fpr").get<std::vector<double>>();
    if (probs.size() != 4 || tpr.size() != 2 || fpr.size() != 2) {
        throw std::invalid_argument("eop: malformed document");
    }
    p.flip_probs_[0][0] = probs[0];
    p.flip_probs_[0][1] = probs[1];
    p.flip_probs_[1][0] = probs[2];
    p.flip_probs_[1][1] = probs[3];
    p.tpr_[0] = tpr[0];
    p.tpr_[1] = tpr[1];
    p.fpr_[0] = fpr[0];
    p.fpr_[1] = fpr[1];
    p.fitted_ = true;
    return p;
}

std::string EopPostProcessor::diagnostics() const {
    std::ostringstream os;
    os << "p00=" << csv::format_double(flip_probs_[0][0])
       << " p01=" << csv::format_double(flip_probs_[0][1])
       << " p10=" << csv::format_double(flip_probs_[1][0])
       << " p11=" << csv::format_double(flip_probs_[1][1]);
    return os.str();
}

// --------------------------------------------------------------- factory ---

std::unique_ptr<PostProcessor> make_postprocessor(std::string_view method, double epsilon,
                                                  std::uint64_t seed, TauTarget tau_target) {
    if (method == "orig") return std::make_unique<IdentityPostProcessor>();
    if (method == "igd") {
        IgdPostProcessor::Config cfg;
        cfg.epsilon = epsilon;
        cfg.tau_target = tau_target;
        return std::make_unique<IgdPostProcessor>(cfg);
    }
    if (method == "roc") {
        RocPostProcessor::Config cfg;
        cfg.epsilon = epsilon;
        return std::make_unique<RocPostProcessor>(cfg);
    }
    if (method == "eop") {
        EopPostProcessor::Config cfg;
        cfg.seed = seed;
        return std::make_unique<EopPostProcessor>(cfg);
    }
    throw std::invalid_argument("unknown post-processing method: " + std::string(method));
}

std::unique_ptr<PostProcessor> postprocessor_from_json(const nlohmann::json& j) {
    const auto method = j.at("method").get<std::string>();
    if (method == "orig") return std::make_unique<IdentityPostProcessor>();
    if (method == "igd") return std::make_unique<IgdPostProcessor>(IgdPostProcessor::from_json(j));
    if (method == "roc") return std::make_unique<RocPostProcessor>(RocPostProcessor::from_json(j));
    if (method == "eop") return std::make_unique<EopPostProcessor>(EopPostProcessor::from_json(j));
    throw std::invalid_argument("unknown post-processing method: " + method);
}

}  // namespace fairpost
