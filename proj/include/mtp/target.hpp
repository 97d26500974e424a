#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "mtp/dataset.hpp"
#include "mtp/error.hpp"
#include "mtp/model.hpp"
#include "mtp/train.hpp"

namespace mtp {

enum class TargetObjective { SubpopError, OverallError };

// Search space of the quantile/label-flip target generation heuristic.
struct TargetSpec {
    TargetObjective objective = TargetObjective::SubpopError;
    double required_error = 1.0;
    std::vector<double> quantile_grid = {0.05, 0.10, 0.15, 0.20, 0.25,
                                         0.30, 0.35, 0.40, 0.45, 0.50};
    std::vector<int> copy_grid = {1, 2, 3, 5, 8};
    bool adaptive = false;
    std::uint64_t seed = 0;  // reserved for randomized variants; the grid search is deterministic

    void validate() const {
        if (required_error < 0.0 || required_error > 1.0)
            throw MtpError("config_schema", "target: required_error must be in [0,1]");
        if (quantile_grid.empty() || copy_grid.empty())
            throw MtpError("config_schema", "target: grids must be nonempty");
        for (double q : quantile_grid)
            if (!(q > 0.0 && q <= 1.0))
                throw MtpError("config_schema", "target: quantiles must be in (0,1]");
        for (int m : copy_grid)
            if (m < 1) throw MtpError("config_schema", "target: copies must be positive");
    }
};

struct TargetResult {
    LinearModel model;
    double clean_loss = 0.0;      // empirical loss of the target on the clean training set
    double achieved_error = 0.0;  // error of the target on the evaluation scope
    bool objective_met = false;
    int flips = 0;   // rows whose labels were flipped
    int copies = 0;  // appended copies per flipped row
};

namespace target_detail {

// error of `m` on the given rows (overall when members is null)
inline double scope_error(const LinearModel& m, const Dataset& data,
                          const std::vector<std::size_t>* members) {
    std::size_t total = 0, wrong = 0;
    if (members) {
        total = members->size();
        for (std::size_t i : *members)
            if (m.predict(data.row(i)) != data.labels[i]) ++wrong;
    } else {
        total = data.size();
        for (std::size_t i = 0; i < data.size(); ++i)
            if (m.predict(data.row(i)) != data.labels[i]) ++wrong;
    }
    if (total == 0) throw MtpError("invalid_request", "target: empty evaluation scope");
    return double(wrong) / double(total);
}

}  // namespace target_detail

// Quantile/label-flip search for a target model.  For each grid point (q, m):
// rank the flip-candidate rows by their loss under the ranking model (the
// clean model, or — adaptive — the previous grid step's model), flip the
// labels of the top ceil(q * candidates) highest-loss rows, append m copies
// of each flipped row, retrain.  Quantiles iterate ascending, then copies
// ascending.  Among candidates reaching the required error the one with the
// lowest clean-set loss wins; if none reaches it, the best achieved error
// wins (ties to lower clean loss) and the result is flagged not-met.
//
// `flip_candidates` restricts both flipping and error measurement to a
// subpopulation's training rows (subpopulation objectives); null means all
// rows (overall-error objectives).  `eval_data`/`eval_members` optionally
// measure the achieved error on a held-out split instead of the training one.
inline TargetResult gen_target(LossKind loss, const Dataset& data, const LinearModel& clean_model,
                               const TrainConfig& train_cfg, const TargetSpec& spec,
                               const std::vector<std::size_t>* flip_candidates = nullptr,
                               const Dataset* eval_data = nullptr,
                               const std::vector<std::size_t>* eval_members = nullptr) {
    spec.validate();
    if (spec.objective == TargetObjective::SubpopError && !flip_candidates)
        throw MtpError("invalid_request", "target: subpopulation objective needs member rows");

    std::vector<std::size_t> candidates;
    if (flip_candidates) {
        candidates = *flip_candidates;
        for (std::size_t i : candidates)
            if (i >= data.size())
                throw MtpError("invalid_request", "target: member row index out of range");
    } else {
        candidates.resize(data.size());
        std::iota(candidates.begin(), candidates.end(), std::size_t(0));
    }
    if (candidates.empty()) throw MtpError("invalid_request", "target: no flip candidates");

    const Dataset& err_data = eval_data ? *eval_data : data;
    const std::vector<std::size_t>* err_members = eval_data ? eval_members : flip_candidates;
    auto error_of = [&](const LinearModel& m) {
        return target_detail::scope_error(m, err_data, err_members);
    };

    const double clean_error = error_of(clean_model);
    if (clean_error >= spec.required_error) {
        // objective pre-satisfied: no poisoning target needed
        TargetResult res;
        res.model = clean_model;
        res.clean_loss = empirical_loss(loss, clean_model, data);
        res.achieved_error = clean_error;
        res.objective_met = true;
        return res;
    }

    TargetResult best;
    bool have = false;
    LinearModel ranking_model = clean_model;

    for (double q : spec.quantile_grid) {
        for (int m : spec.copy_grid) {
            // highest-loss rows first; ties keep the original row order
            std::vector<std::size_t> order = candidates;
            std::vector<double> losses(order.size());
            for (std::size_t c = 0; c < order.size(); ++c)
                losses[c] = point_loss(loss, ranking_model, data.row(order[c]), data.labels[order[c]]);
            std::vector<std::size_t> perm(order.size());
            std::iota(perm.begin(), perm.end(), std::size_t(0));
            std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
                if (losses[a] != losses[b]) return losses[a] > losses[b];
                return order[a] < order[b];
            });
            const std::size_t flips =
                std::min(order.size(),
                         std::size_t(std::ceil(q * double(order.size()) - 1e-12)));

            Dataset flipped = data;
            for (std::size_t c = 0; c < flips; ++c) {
                const std::size_t i = order[perm[c]];
                flipped.append(data.row(i), -data.labels[i], std::size_t(m));
            }
            LinearModel cand = train(loss, flipped, train_cfg);
            if (spec.adaptive) ranking_model = cand;

            TargetResult res;
            res.model = cand;
            res.clean_loss = empirical_loss(loss, cand, data);
            res.achieved_error = error_of(cand);
            res.objective_met = res.achieved_error >= spec.required_error;
            res.flips = int(flips);
            res.copies = m;

            bool better;
            if (!have) {
                better = true;
            } else if (res.objective_met != best.objective_met) {
                better = res.objective_met;
            } else if (res.objective_met) {
                better = res.clean_loss < best.clean_loss;
            } else {
                better = res.achieved_error > best.achieved_error ||
                         (res.achieved_error == best.achieved_error &&
                          res.clean_loss < best.clean_loss);
            }
            if (better) {
                best = std::move(res);
                have = true;
            }
        }
    }
    return best;
}

// Retrains on the clean set plus an attack's poison set; the induced model
// then serves as a target for the main attack.
inline LinearModel target_from_attack(LossKind loss, const Dataset& data, const Dataset& poison_set,
                                      const TrainConfig& train_cfg) {
    if (poison_set.size() == 0) return train(loss, data, train_cfg);
    return train(loss, concat(data, poison_set), train_cfg);
}

}  // namespace mtp
