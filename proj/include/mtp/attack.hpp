#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mtp/dataset.hpp"
#include "mtp/error.hpp"
#include "mtp/model.hpp"
#include "mtp/oracle.hpp"
#include "mtp/rng.hpp"
#include "mtp/train.hpp"

namespace mtp {

struct StopCriterion {
    enum class Kind { Budget, EpsilonClose, AccuracyGoal };
    Kind kind = Kind::Budget;
    long budget = 0;                 // Budget: number of loop iterations
    double eps = 0.0;                // EpsilonClose
    bool accuracy_overall = true;    // AccuracyGoal scope
    double accuracy_threshold = 0.0;

    static StopCriterion budget_of(long T) {
        if (T < 1) throw MtpError("config_schema", "stop: budget must be positive");
        StopCriterion s;
        s.kind = Kind::Budget;
        s.budget = T;
        return s;
    }
    static StopCriterion epsilon_close(double eps) {
        if (!(eps > 0.0)) throw MtpError("config_schema", "stop: eps must be positive");
        StopCriterion s;
        s.kind = Kind::EpsilonClose;
        s.eps = eps;
        return s;
    }
    static StopCriterion accuracy_goal(bool overall, double threshold) {
        if (threshold < 0.0 || threshold > 1.0)
            throw MtpError("config_schema", "stop: accuracy threshold must be in [0,1]");
        StopCriterion s;
        s.kind = Kind::AccuracyGoal;
        s.accuracy_overall = overall;
        s.accuracy_threshold = threshold;
        return s;
    }
};

struct PoisonPoint {
    Vec x;
    int y = 1;
    long copies = 1;
    long iteration = 0;
};

struct IterationRecord {
    long iteration = 0;  // 1-based
    PoisonPoint point;
    double max_loss_diff = 0.0;  // D(theta_t, theta_p) under the configured oracle
    bool oracle_exact = false;
    double euclid_dist = 0.0;  // ||theta_t - theta_p||_2 over weights and bias
    double lower_bound = 0.0;  // per-comparator bound snapshot; meaningful iff valid
    bool lower_bound_valid = false;
    double overall_acc = 0.0;
    std::optional<double> subpop_acc;
    double clean_loss = 0.0;  // empirical (summed) loss of theta_t on the clean set

    double reg_theta = 0.0;  // R(theta_t); carried in memory only, not serialized
};

struct AttackTrace {
    std::vector<IterationRecord> records;
    std::ptrdiff_t best_index = -1;  // argmin of max_loss_diff; -1 for an empty trace
    LinearModel best_model;
    long poison_total = 0;

    // run context beyond the per-iteration records
    LinearModel final_model;  // trained on the clean set plus the full poison set
    std::string stop_reason;  // "budget_exhausted" | "epsilon_close" | "accuracy_goal"
    Metrics final_metrics;
    double final_clean_loss = 0.0;
    double g_estimate = 0.0;  // gradient-bound estimate for the regret diagnostic
    long retrain_count = 0;

    double best_max_loss_diff() const {
        return best_index < 0 ? 0.0 : records[std::size_t(best_index)].max_loss_diff;
    }
};

// The online poisoning loop.  Each iteration retrains on clean + poison so
// far, asks the oracle for the point where the current model's loss most
// exceeds the target's, then appends copies of that point.  Epsilon/accuracy
// stop checks run on the freshly trained model *before* appending, so a
// pre-satisfied criterion yields an empty poison set; the budget criterion
// counts completed append iterations.
inline AttackTrace run_attack(const Dataset& data, const LinearModel& theta_p, LossKind loss,
                              const TrainConfig& train_cfg, const FeatureDomain& domain,
                              const StopCriterion& stop, long copies_per_iter,
                              OracleMode oracle_mode, const Dataset& eval_data,
                              const std::vector<std::size_t>* eval_subpop = nullptr,
                              const ApproxOracleConfig& oracle_cfg = {}) {
    domain.validate();
    if (theta_p.weights.size() != data.dim())
        throw MtpError("invalid_request", "attack: target model dimension mismatch");
    if (copies_per_iter < 1)
        throw MtpError("invalid_request", "attack: copies_per_iter must be positive");
    if (oracle_mode == OracleMode::Exact && loss != LossKind::Hinge)
        throw MtpError("invalid_request", "attack: exact oracle requires the hinge loss");
    if (stop.kind == StopCriterion::Kind::AccuracyGoal && !stop.accuracy_overall && !eval_subpop)
        throw MtpError("invalid_request", "attack: subpopulation accuracy goal needs member rows");

    const double n_clean = double(data.size());
    const double loss_p_clean = empirical_loss(loss, theta_p, data);
    const double reg_p = regularizer(theta_p);

    AttackTrace trace;
    Dataset working = data;
    WarmStart warm;
    double max_weight_norm = 0.0;
    double best_value = 0.0;

    for (long iter = 1;; ++iter) {
        LinearModel theta_t = train(loss, working, train_cfg, nullptr, &warm);
        ++trace.retrain_count;
        max_weight_norm = std::max(max_weight_norm, norm2(theta_t.weights));

        OracleResult oracle = loss_distance(theta_t, theta_p, loss, domain, oracle_mode, oracle_cfg);

        IterationRecord rec;
        rec.iteration = iter;
        rec.max_loss_diff = oracle.value;
        rec.oracle_exact = oracle.exact;
        {
            Vec diff = sub(theta_t.weights, theta_p.weights);
            const double db = theta_t.bias - theta_p.bias;
            rec.euclid_dist = std::sqrt(norm2_sq(diff) + db * db);
        }
        rec.clean_loss = empirical_loss(loss, theta_t, data);
        rec.reg_theta = regularizer(theta_t);
        if (oracle.exact) {
            // comparator lower-bound snapshot, reusing the oracle's sup
            const double num =
                loss_p_clean - rec.clean_loss + n_clean * train_cfg.c_r * (reg_p - rec.reg_theta);
            const double den = oracle.value + train_cfg.c_r * (rec.reg_theta - reg_p);
            if (den > 1e-9) {
                rec.lower_bound = num / den;
                rec.lower_bound_valid = true;
            }
        }
        Metrics metrics = evaluate(theta_t, eval_data, eval_subpop);
        rec.overall_acc = metrics.overall_accuracy;
        rec.subpop_acc = metrics.subpop_accuracy;

        bool halt = false;
        if (stop.kind == StopCriterion::Kind::EpsilonClose && oracle.value <= stop.eps) {
            trace.stop_reason = "epsilon_close";
            halt = true;
        } else if (stop.kind == StopCriterion::Kind::AccuracyGoal) {
            const double acc =
                stop.accuracy_overall ? metrics.overall_accuracy : *metrics.subpop_accuracy;
            if (acc <= stop.accuracy_threshold) {
                trace.stop_reason = "accuracy_goal";
                halt = true;
            }
        }
        if (halt) {
            trace.final_model = std::move(theta_t);
            trace.final_metrics = metrics;
            trace.final_clean_loss = rec.clean_loss;
            break;
        }

        rec.point.x = oracle.x;
        rec.point.y = oracle.y;
        rec.point.copies = copies_per_iter;
        rec.point.iteration = iter;
        working.append(oracle.x, oracle.y, std::size_t(copies_per_iter));
        trace.poison_total += copies_per_iter;

        if (trace.best_index < 0 || rec.max_loss_diff < best_value) {
            best_value = rec.max_loss_diff;
            trace.best_index = std::ptrdiff_t(trace.records.size());
            trace.best_model = theta_t;
        }
        trace.records.push_back(std::move(rec));

        if (stop.kind == StopCriterion::Kind::Budget && long(trace.records.size()) >= stop.budget) {
            trace.stop_reason = "budget_exhausted";
            trace.final_model = train(loss, working, train_cfg, nullptr, &warm);
            ++trace.retrain_count;
            trace.final_metrics = evaluate(trace.final_model, eval_data, eval_subpop);
            trace.final_clean_loss = empirical_loss(loss, trace.final_model, data);
            max_weight_norm = std::max(max_weight_norm, norm2(trace.final_model.weights));
            break;
        }
    }

    if (trace.best_index < 0) {
        trace.best_model = trace.final_model;
    }
    trace.g_estimate = domain.sup_norm2() + train_cfg.c_r * max_weight_norm;
    return trace;
}

// Label-flipping baseline: `budget` distinct subpopulation training rows,
// sampled without replacement, re-injected with negated labels.
inline std::vector<PoisonPoint> label_flip_attack(const Dataset& data,
                                                  const std::vector<std::size_t>& members,
                                                  long budget, std::uint64_t seed) {
    if (budget < 0) throw MtpError("invalid_request", "label flip: negative budget");
    if (std::size_t(budget) > members.size())
        throw MtpError("invalid_request", "label flip: budget exceeds subpopulation size");
    for (std::size_t i : members)
        if (i >= data.size())
            throw MtpError("invalid_request", "label flip: member row index out of range");

    std::vector<std::size_t> pool = members;
    Rng rng(mix_seed(seed, 0xF11BU));
    std::vector<PoisonPoint> out;
    out.reserve(std::size_t(budget));
    for (long b = 0; b < budget; ++b) {
        const std::size_t pick = std::size_t(b) + std::size_t(rng.below(pool.size() - std::size_t(b)));
        std::swap(pool[std::size_t(b)], pool[pick]);
        const std::size_t row = pool[std::size_t(b)];
        PoisonPoint p;
        p.x.assign(data.row(row).begin(), data.row(row).end());
        p.y = -data.labels[row];
        p.copies = 1;
        p.iteration = b + 1;
        out.push_back(std::move(p));
    }
    return out;
}

// Poison points as a dataset over the clean data's domain (for retraining).
inline Dataset poison_to_dataset(const std::vector<PoisonPoint>& points, const FeatureDomain& domain) {
    Dataset ds = Dataset::empty(domain);
    for (const auto& p : points) ds.append(p.x, p.y, std::size_t(p.copies));
    return ds;
}

}  // namespace mtp
