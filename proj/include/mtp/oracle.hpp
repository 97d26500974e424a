#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mtp/domain.hpp"
#include "mtp/error.hpp"
#include "mtp/lp.hpp"
#include "mtp/model.hpp"
#include "mtp/rng.hpp"

namespace mtp {

// Maximizer of the pointwise loss difference l(attack; x, y) - l(target; x, y)
// over the admissible feature set and both labels.
struct OracleResult {
    Vec x;
    int y = 1;
    double value = 0.0;  // loss difference recomputed at (x, y)
    bool exact = false;
};

struct ApproxOracleConfig {
    int restarts = 10;
    int steps = 1000;
    double step_size = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    std::uint64_t seed = 0;
};

namespace oracle_detail {

inline double loss_diff(LossKind loss, const LinearModel& attacked, const LinearModel& target,
                        ConstSpan x, int y) {
    return point_loss(loss, attacked, x, y) - point_loss(loss, target, x, y);
}

// Hinge difference decomposes into activation regions of the two hinges; on
// each region the objective is linear, so each is an exact small LP.  Region
// enumeration order fixes tie-breaks: label +1 before -1, then both-active,
// attacked-active-only, neither-active (the zero candidate), target-active-only.
template <typename SolveRegion>
OracleResult hinge_exact_impl(const LinearModel& attacked, const LinearModel& target,
                              SolveRegion&& solve) {
    const std::size_t d = attacked.weights.size();
    OracleResult best;
    best.exact = true;
    bool have = false;

    for (int y : {1, -1}) {
        // hinge arguments: A(x) = 1 - y*(wt.x + bt), B(x) = 1 - y*(wp.x + bp)
        Vec a_t(d), a_p(d);  // rows of "argument >= 0" as  a.x <= b
        for (std::size_t j = 0; j < d; ++j) {
            a_t[j] = y * attacked.weights[j];
            a_p[j] = y * target.weights[j];
        }
        const double b_t = 1.0 - y * attacked.bias;
        const double b_p = 1.0 - y * target.bias;
        auto active = [](const Vec& a, double b) { return HalfSpace{a, b}; };
        auto inactive = [](const Vec& a, double b) {
            Vec na(a.size());
            for (std::size_t j = 0; j < a.size(); ++j) na[j] = -a[j];
            return HalfSpace{std::move(na), -b};
        };

        struct Region {
            Vec c;
            double c0;
            std::vector<HalfSpace> cons;
        };
        std::array<Region, 4> regions;
        // both hinges active: objective (A - B) = y*(wp - wt).x + y*(bp - bt)
        regions[0].c.resize(d);
        for (std::size_t j = 0; j < d; ++j) regions[0].c[j] = y * (target.weights[j] - attacked.weights[j]);
        regions[0].c0 = y * (target.bias - attacked.bias);
        regions[0].cons = {active(a_t, b_t), active(a_p, b_p)};
        // attacked hinge active only: objective A
        regions[1].c.resize(d);
        for (std::size_t j = 0; j < d; ++j) regions[1].c[j] = -double(y) * attacked.weights[j];
        regions[1].c0 = b_t;
        regions[1].cons = {active(a_t, b_t), inactive(a_p, b_p)};
        // neither active: objective 0 (feasibility probe keeps the zero value attainable)
        regions[2].c.assign(d, 0.0);
        regions[2].c0 = 0.0;
        regions[2].cons = {inactive(a_t, b_t), inactive(a_p, b_p)};
        // target hinge active only: objective -B (never positive at the optimum)
        regions[3].c.resize(d);
        for (std::size_t j = 0; j < d; ++j) regions[3].c[j] = double(y) * target.weights[j];
        regions[3].c0 = -b_p;
        regions[3].cons = {active(a_p, b_p), inactive(a_t, b_t)};

        for (const Region& r : regions) {
            LinearMaxResult lm = solve(r.c, r.cons);
            if (!lm.feasible) continue;
            const double value = loss_diff(LossKind::Hinge, attacked, target, lm.x, y);
            if (!have || value > best.value) {
                have = true;
                best.value = value;
                best.x = std::move(lm.x);
                best.y = y;
            }
        }
    }
    if (!have) throw MtpError("internal", "hinge oracle: no feasible region");  // cannot happen
    return best;
}

}  // namespace oracle_detail

// Exact hinge loss-difference maximizer over a box domain.
inline OracleResult hinge_max_loss_diff_exact(const LinearModel& attacked, const LinearModel& target,
                                              const FeatureDomain& domain) {
    domain.validate();
    if (attacked.weights.size() != domain.dim() || target.weights.size() != domain.dim())
        throw MtpError("invalid_request", "oracle: model/domain dimension mismatch");
    auto res = oracle_detail::hinge_exact_impl(
        attacked, target, [&](const Vec& c, const std::vector<HalfSpace>& cons) {
            LinearMaxResult lm = box_linear_max(c, domain, cons);
            if (lm.feasible) domain.clamp(lm.x);
            return lm;
        });
    return res;
}

// Exact hinge loss-difference maximizer over an l1 ball (the witness set of
// the norm-closeness guarantees).
inline OracleResult hinge_max_loss_diff_exact(const LinearModel& attacked, const LinearModel& target,
                                              const L1Ball& ball) {
    ball.validate();
    if (attacked.weights.size() != ball.dim || target.weights.size() != ball.dim)
        throw MtpError("invalid_request", "oracle: model/ball dimension mismatch");
    return oracle_detail::hinge_exact_impl(
        attacked, target,
        [&](const Vec& c, const std::vector<HalfSpace>& cons) { return l1_linear_max(c, ball, cons); });
}

// Projected gradient ascent with adaptive moments from seeded uniform
// restarts; deterministic for a fixed seed, never exact.  Works for both
// losses (hinge uses a subgradient).
inline OracleResult approx_max_loss_diff(const LinearModel& attacked, const LinearModel& target,
                                         LossKind loss, const FeatureDomain& domain,
                                         const ApproxOracleConfig& cfg = {}) {
    domain.validate();
    const std::size_t d = domain.dim();
    if (attacked.weights.size() != d || target.weights.size() != d)
        throw MtpError("invalid_request", "oracle: model/domain dimension mismatch");

    OracleResult best;
    best.exact = false;
    bool have = false;
    Vec grad(d), m1(d), m2(d);

    auto gradient = [&](const Vec& x, int y) {
        const double st = attacked.decision(x);
        const double sp = target.decision(x);
        if (loss == LossKind::Hinge) {
            const bool at = 1.0 - y * st > 0.0;
            const bool ap = 1.0 - y * sp > 0.0;
            for (std::size_t j = 0; j < d; ++j)
                grad[j] = (at ? -double(y) * attacked.weights[j] : 0.0) -
                          (ap ? -double(y) * target.weights[j] : 0.0);
        } else {
            const double ct = -double(y) * detail::sigmoid_neg(y * st);
            const double cp = -double(y) * detail::sigmoid_neg(y * sp);
            for (std::size_t j = 0; j < d; ++j)
                grad[j] = ct * attacked.weights[j] - cp * target.weights[j];
        }
    };

    for (int y : {1, -1}) {
        for (int r = 0; r < cfg.restarts; ++r) {
            Rng rng(mix_seed(cfg.seed, std::uint64_t(r) * 2 + (y == 1 ? 0 : 1)));
            Vec x = domain.sample(rng);
            std::fill(m1.begin(), m1.end(), 0.0);
            std::fill(m2.begin(), m2.end(), 0.0);
            double b1t = 1.0, b2t = 1.0;
            for (int s = 0; s < cfg.steps; ++s) {
                const double v = oracle_detail::loss_diff(loss, attacked, target, x, y);
                if (!have || v > best.value) {
                    have = true;
                    best.value = v;
                    best.x = x;
                    best.y = y;
                }
                gradient(x, y);
                b1t *= cfg.beta1;
                b2t *= cfg.beta2;
                for (std::size_t j = 0; j < d; ++j) {
                    m1[j] = cfg.beta1 * m1[j] + (1.0 - cfg.beta1) * grad[j];
                    m2[j] = cfg.beta2 * m2[j] + (1.0 - cfg.beta2) * grad[j] * grad[j];
                    const double mh = m1[j] / (1.0 - b1t);
                    const double vh = m2[j] / (1.0 - b2t);
                    x[j] += cfg.step_size * mh / (std::sqrt(vh) + 1e-8);
                }
                domain.clamp(x);
            }
            const double v = oracle_detail::loss_diff(loss, attacked, target, x, y);
            if (v > best.value) {
                best.value = v;
                best.x = x;
                best.y = y;
            }
        }
    }
    return best;
}

enum class OracleMode { Exact, Approx };

// Loss-based distance D(theta1, theta2): the largest amount by which theta1's
// loss can exceed theta2's on any admissible point.  Exact mode requires the
// hinge loss.
inline OracleResult loss_distance(const LinearModel& theta1, const LinearModel& theta2,
                                  LossKind loss, const FeatureDomain& domain, OracleMode mode,
                                  const ApproxOracleConfig& cfg = {}) {
    if (mode == OracleMode::Exact) {
        if (loss != LossKind::Hinge)
            throw MtpError("invalid_request", "exact loss distance is only available for hinge");
        return hinge_max_loss_diff_exact(theta1, theta2, domain);
    }
    return approx_max_loss_diff(theta1, theta2, loss, domain, cfg);
}

inline OracleResult loss_distance(const LinearModel& theta1, const LinearModel& theta2,
                                  const L1Ball& ball) {
    return hinge_max_loss_diff_exact(theta1, theta2, ball);
}

}  // namespace mtp
