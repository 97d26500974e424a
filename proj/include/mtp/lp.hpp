#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "mtp/domain.hpp"
#include "mtp/error.hpp"
#include "mtp/linalg.hpp"

namespace mtp {

// One halfspace a.x <= b.
struct HalfSpace {
    Vec a;
    double b = 0.0;
};

struct LinearMaxResult {
    bool feasible = false;
    double value = 0.0;  // objective at x (excluding any caller-side constant)
    Vec x;
};

namespace lp_detail {

constexpr double kFeasTol = 1e-9;
constexpr double kPivotTol = 1e-11;

// --- exact single-equality solver (continuous knapsack greedy) -------------
//
// maximize c.x subject to a.x = b, lo <= x <= hi.  After shifting to [0,1]
// slabs and flipping negative-coefficient slabs, the equality budget is filled
// by best value-per-unit first, which is optimal because every feasible point
// spends exactly the same budget.
inline LinearMaxResult equality_knapsack(const Vec& c, const Vec& a, double b, const Vec& lo,
                                         const Vec& hi) {
    const std::size_t d = c.size();
    double base_budget = 0.0, base_value = 0.0;
    struct Slab {
        std::size_t j;
        double gain;    // value coefficient (after flip), per full slab
        double weight;  // budget coefficient > 0
        bool flipped;
    };
    std::vector<Slab> slabs;
    Vec x(lo);
    for (std::size_t j = 0; j < d; ++j) {
        const double width = hi[j] - lo[j];
        base_budget += a[j] * lo[j];
        base_value += c[j] * lo[j];
        const double g = a[j] * width, v = c[j] * width;
        if (g > 0.0) {
            slabs.push_back({j, v, g, false});
        } else if (g < 0.0) {
            // use the slab from its top end so its budget use is positive
            base_budget += g;
            base_value += v;
            x[j] = hi[j];
            slabs.push_back({j, -v, -g, true});
        } else if (v > 0.0) {
            base_value += v;
            x[j] = hi[j];
        }
    }
    double need = b - base_budget;
    const double capacity = std::accumulate(slabs.begin(), slabs.end(), 0.0,
                                            [](double s, const Slab& sl) { return s + sl.weight; });
    const double tol = kFeasTol * (1.0 + std::fabs(b));
    if (need < -tol || need > capacity + tol) return {};  // hyperplane misses the box
    need = std::clamp(need, 0.0, capacity);

    std::stable_sort(slabs.begin(), slabs.end(), [](const Slab& p, const Slab& q) {
        return p.gain * q.weight > q.gain * p.weight;  // density desc, ties keep index order
    });
    double value = base_value;
    for (const Slab& s : slabs) {
        if (need <= 0.0) break;
        const double frac = std::min(1.0, need / s.weight);
        value += frac * s.gain;
        need -= frac * s.weight;
        const double width = hi[s.j] - lo[s.j];
        x[s.j] = s.flipped ? hi[s.j] - frac * width : lo[s.j] + frac * width;
    }
    return {true, value, std::move(x)};
}

// --- bounded-variable primal simplex, small row count ----------------------
//
// maximize c.x subject to A x <= b, lo <= x <= hi.  Slack and (phase-1)
// artificial columns are represented implicitly; Bland's rule keeps pivoting
// finite and deterministic.  Row counts here are at most 3, so basic values
// and multipliers are recomputed exactly every pivot.
class BoundedSimplex {
public:
    static LinearMaxResult solve(const std::vector<HalfSpace>& cons, const Vec& c, const Vec& lo,
                                 const Vec& hi) {
        BoundedSimplex s(cons, c, lo, hi);
        return s.run();
    }

private:
    enum Pos : char { AtLower, AtUpper, Basic };
    static constexpr double kInf = std::numeric_limits<double>::infinity();

    const std::vector<HalfSpace>& cons_;
    const Vec& c_;
    int m_, n_struct_, n_total_;  // structural, + m slacks, + m artificials
    Vec lo_, hi_, cost_;
    std::vector<Pos> pos_;
    std::vector<int> basis_;
    Vec basic_val_;

    BoundedSimplex(const std::vector<HalfSpace>& cons, const Vec& c, const Vec& lo, const Vec& hi)
        : cons_(cons), c_(c), m_(int(cons.size())), n_struct_(int(c.size())) {
        n_total_ = n_struct_ + 2 * m_;
        lo_.assign(std::size_t(n_total_), 0.0);
        hi_.assign(std::size_t(n_total_), 0.0);
        for (int j = 0; j < n_struct_; ++j) {
            lo_[j] = lo[std::size_t(j)];
            hi_[j] = hi[std::size_t(j)];
        }
        for (int i = 0; i < m_; ++i) {
            lo_[std::size_t(n_struct_ + i)] = 0.0;
            hi_[std::size_t(n_struct_ + i)] = kInf;  // slack
            lo_[std::size_t(n_struct_ + m_ + i)] = 0.0;
            hi_[std::size_t(n_struct_ + m_ + i)] = kInf;  // artificial
        }
    }

    double entry(int i, int j) const {
        if (j < n_struct_) return cons_[std::size_t(i)].a[std::size_t(j)];
        const int s = j - n_struct_;
        if (s < m_) return i == s ? 1.0 : 0.0;
        return i == s - m_ ? -1.0 : 0.0;
    }

    // solve the m x m system B y = rhs (B from basis columns); false if singular
    bool solve_basis(const Vec& rhs, Vec& out, bool transpose) const {
        const int m = m_;
        Vec M(std::size_t(m * m));
        for (int i = 0; i < m; ++i)
            for (int k = 0; k < m; ++k) {
                const double v = entry(i, basis_[std::size_t(k)]);
                M[std::size_t(transpose ? k * m + i : i * m + k)] = v;
            }
        Vec r(rhs);
        std::vector<int> perm(std::size_t(m), 0);
        std::iota(perm.begin(), perm.end(), 0);
        for (int col = 0; col < m; ++col) {
            int piv = col;
            for (int i = col + 1; i < m; ++i)
                if (std::fabs(M[std::size_t(perm[std::size_t(i)] * m + col)]) >
                    std::fabs(M[std::size_t(perm[std::size_t(col)] * m + col)]))
                    piv = i;
            std::swap(perm[std::size_t(col)], perm[std::size_t(piv)]);
            const double pval = M[std::size_t(perm[std::size_t(col)] * m + col)];
            if (std::fabs(pval) < kPivotTol) return false;
            for (int i = col + 1; i < m; ++i) {
                const double f = M[std::size_t(perm[std::size_t(i)] * m + col)] / pval;
                if (f == 0.0) continue;
                for (int k = col; k < m; ++k)
                    M[std::size_t(perm[std::size_t(i)] * m + k)] -=
                        f * M[std::size_t(perm[std::size_t(col)] * m + k)];
                r[std::size_t(perm[std::size_t(i)])] -= f * r[std::size_t(perm[std::size_t(col)])];
            }
        }
        out.assign(std::size_t(m), 0.0);
        for (int i = m - 1; i >= 0; --i) {
            double v = r[std::size_t(perm[std::size_t(i)])];
            for (int k = i + 1; k < m; ++k)
                v -= M[std::size_t(perm[std::size_t(i)] * m + k)] * out[std::size_t(k)];
            out[std::size_t(i)] = v / M[std::size_t(perm[std::size_t(i)] * m + i)];
        }
        return true;
    }

    double nonbasic_value(int j) const { return pos_[std::size_t(j)] == AtUpper ? hi_[std::size_t(j)] : lo_[std::size_t(j)]; }

    void refresh_basic_values() {
        Vec rhs(std::size_t(m_), 0.0);
        for (int i = 0; i < m_; ++i) {
            double v = cons_[std::size_t(i)].b;
            for (int j = 0; j < n_total_; ++j) {
                if (pos_[std::size_t(j)] == Basic) continue;
                const double xj = nonbasic_value(j);
                if (xj != 0.0) v -= entry(i, j) * xj;
            }
            rhs[std::size_t(i)] = v;
        }
        solve_basis(rhs, basic_val_, false);
    }

    // one simplex phase over the current cost vector; returns false on stall
    bool iterate(long max_pivots) {
        const double cost_scale = 1.0 + norm_inf(cost_);
        for (long pivot = 0; pivot < max_pivots; ++pivot) {
            refresh_basic_values();
            Vec cb(std::size_t(m_), 0.0);
            for (int k = 0; k < m_; ++k) cb[std::size_t(k)] = cost_[std::size_t(basis_[std::size_t(k)])];
            Vec y;
            if (!solve_basis(cb, y, true))
                throw MtpError("internal", "simplex: singular basis");

            int enter = -1;
            double dir = 0.0;
            for (int j = 0; j < n_total_ && enter < 0; ++j) {
                if (pos_[std::size_t(j)] == Basic) continue;
                if (lo_[std::size_t(j)] == hi_[std::size_t(j)]) continue;  // pinned
                double red = cost_[std::size_t(j)];
                for (int i = 0; i < m_; ++i) red -= y[std::size_t(i)] * entry(i, j);
                if (pos_[std::size_t(j)] == AtLower && red > 1e-10 * cost_scale) {
                    enter = j;
                    dir = 1.0;
                } else if (pos_[std::size_t(j)] == AtUpper && red < -1e-10 * cost_scale) {
                    enter = j;
                    dir = -1.0;
                }
            }
            if (enter < 0) return true;  // optimal for this phase

            Vec col(std::size_t(m_), 0.0);
            for (int i = 0; i < m_; ++i) col[std::size_t(i)] = entry(i, enter);
            Vec w;
            if (!solve_basis(col, w, false))
                throw MtpError("internal", "simplex: singular basis");

            double step = hi_[std::size_t(enter)] - lo_[std::size_t(enter)];  // may be inf
            int leave = -1;
            bool leave_to_lower = true;
            for (int k = 0; k < m_; ++k) {
                const double wk = dir * w[std::size_t(k)];
                const int bk = basis_[std::size_t(k)];
                if (wk > kPivotTol) {
                    const double room = basic_val_[std::size_t(k)] - lo_[std::size_t(bk)];
                    const double lim = std::max(0.0, room) / wk;
                    if (lim < step - kPivotTol || (lim < step + kPivotTol && (leave < 0 || bk < basis_[std::size_t(leave)]))) {
                        step = std::min(step, lim);
                        leave = k;
                        leave_to_lower = true;
                    }
                } else if (wk < -kPivotTol && std::isfinite(hi_[std::size_t(bk)])) {
                    const double room = hi_[std::size_t(bk)] - basic_val_[std::size_t(k)];
                    const double lim = std::max(0.0, room) / (-wk);
                    if (lim < step - kPivotTol || (lim < step + kPivotTol && (leave < 0 || bk < basis_[std::size_t(leave)]))) {
                        step = std::min(step, lim);
                        leave = k;
                        leave_to_lower = false;
                    }
                }
            }
            if (!std::isfinite(step)) throw MtpError("internal", "simplex: unbounded ray");
            if (leave < 0) {
                // entering variable swings to its other bound
                pos_[std::size_t(enter)] = pos_[std::size_t(enter)] == AtLower ? AtUpper : AtLower;
                continue;
            }
            const int out_var = basis_[std::size_t(leave)];
            pos_[std::size_t(out_var)] = leave_to_lower ? AtLower : AtUpper;
            basis_[std::size_t(leave)] = enter;
            pos_[std::size_t(enter)] = Basic;
        }
        return false;
    }

    LinearMaxResult run() {
        // start: structural variables at the bound favored by the objective
        pos_.assign(std::size_t(n_total_), AtLower);
        for (int j = 0; j < n_struct_; ++j)
            pos_[std::size_t(j)] = c_[std::size_t(j)] > 0.0 ? AtUpper : AtLower;

        Vec resid(std::size_t(m_), 0.0);
        bool need_phase1 = false;
        for (int i = 0; i < m_; ++i) {
            double v = cons_[std::size_t(i)].b;
            for (int j = 0; j < n_struct_; ++j) v -= entry(i, j) * nonbasic_value(j);
            resid[std::size_t(i)] = v;
            if (v < 0.0) need_phase1 = true;
        }

        basis_.assign(std::size_t(m_), 0);
        for (int i = 0; i < m_; ++i) {
            // negative slack residual -> start from the artificial instead
            basis_[std::size_t(i)] = resid[std::size_t(i)] >= 0.0 ? n_struct_ + i : n_struct_ + m_ + i;
            pos_[std::size_t(basis_[std::size_t(i)])] = Basic;
        }

        const long max_pivots = 400 + 40L * n_total_;
        if (need_phase1) {
            cost_.assign(std::size_t(n_total_), 0.0);
            for (int i = 0; i < m_; ++i) cost_[std::size_t(n_struct_ + m_ + i)] = -1.0;
            if (!iterate(max_pivots)) throw MtpError("internal", "simplex: phase 1 stall");
            refresh_basic_values();
            double infeas = 0.0;
            for (int k = 0; k < m_; ++k)
                if (basis_[std::size_t(k)] >= n_struct_ + m_) infeas += std::max(0.0, basic_val_[std::size_t(k)]);
            for (int j = n_struct_ + m_; j < n_total_; ++j)
                if (pos_[std::size_t(j)] == AtUpper) infeas += hi_[std::size_t(j)];
            if (infeas > kFeasTol * (1.0 + norm_inf(resid))) return {};  // infeasible
        }
        // pin artificials at zero for phase 2 (they may linger in the basis at 0)
        for (int j = n_struct_ + m_; j < n_total_; ++j) {
            hi_[std::size_t(j)] = 0.0;
            if (pos_[std::size_t(j)] == AtUpper) pos_[std::size_t(j)] = AtLower;
        }

        cost_.assign(std::size_t(n_total_), 0.0);
        for (int j = 0; j < n_struct_; ++j) cost_[std::size_t(j)] = c_[std::size_t(j)];
        if (!iterate(max_pivots)) throw MtpError("internal", "simplex: phase 2 stall");
        refresh_basic_values();

        LinearMaxResult res;
        res.feasible = true;
        res.x.assign(std::size_t(n_struct_), 0.0);
        for (int j = 0; j < n_struct_; ++j)
            if (pos_[std::size_t(j)] != Basic) res.x[std::size_t(j)] = nonbasic_value(j);
        for (int k = 0; k < m_; ++k)
            if (basis_[std::size_t(k)] < n_struct_)
                res.x[std::size_t(basis_[std::size_t(k)])] =
                    std::clamp(basic_val_[std::size_t(k)], lo_[std::size_t(basis_[std::size_t(k)])],
                               hi_[std::size_t(basis_[std::size_t(k)])]);
        res.value = dot(c_, res.x);
        return res;
    }
};

}  // namespace lp_detail

// Exact maximizer of a linear objective over a box intersected with at most
// two halfspaces.  Fast paths: the coordinate-wise sign rule when no
// constraint binds, and the continuous-knapsack boundary solve for a single
// constraint (if the sign-rule point is infeasible, some optimum is tight, so
// the boundary search is exhaustive).  Everything else goes through the
// bounded-variable simplex.
inline LinearMaxResult box_linear_max(const Vec& c, const FeatureDomain& box,
                                      const std::vector<HalfSpace>& constraints = {}) {
    const std::size_t d = box.dim();
    if (c.size() != d) throw MtpError("invalid_request", "box_linear_max: dimension mismatch");
    if (constraints.size() > 2)
        throw MtpError("invalid_request", "box_linear_max: at most two halfspaces supported");
    for (const auto& h : constraints)
        if (h.a.size() != d) throw MtpError("invalid_request", "box_linear_max: constraint dimension mismatch");

    Vec x0(d);
    for (std::size_t j = 0; j < d; ++j) x0[j] = c[j] > 0.0 ? box.hi[j] : box.lo[j];
    bool ok = true;
    for (const auto& h : constraints)
        if (dot(h.a, x0) > h.b + lp_detail::kFeasTol * (1.0 + std::fabs(h.b))) ok = false;
    if (ok) return {true, dot(c, x0), std::move(x0)};

    if (constraints.size() == 1)
        return lp_detail::equality_knapsack(c, constraints[0].a, constraints[0].b, box.lo, box.hi);
    return lp_detail::BoundedSimplex::solve(constraints, c, box.lo, box.hi);
}

// Same problem over an l1 ball: solved exactly in the lifted split
// x = u - v with u, v >= 0 and sum(u+v) <= radius (3 simplex rows at most).
inline LinearMaxResult l1_linear_max(const Vec& c, const L1Ball& ball,
                                     const std::vector<HalfSpace>& constraints = {}) {
    const std::size_t d = ball.dim;
    if (c.size() != d) throw MtpError("invalid_request", "l1_linear_max: dimension mismatch");
    ball.validate();

    // unconstrained maximum sits on a cross-polytope vertex (or the origin)
    std::size_t jbest = 0;
    for (std::size_t j = 1; j < d; ++j)
        if (std::fabs(c[j]) > std::fabs(c[jbest])) jbest = j;
    Vec x0(d, 0.0);
    if (c[jbest] != 0.0) x0[jbest] = ball.radius * (c[jbest] > 0.0 ? 1.0 : -1.0);
    bool ok = true;
    for (const auto& h : constraints)
        if (dot(h.a, x0) > h.b + lp_detail::kFeasTol * (1.0 + std::fabs(h.b))) ok = false;
    if (ok) return {true, dot(c, x0), std::move(x0)};

    Vec c2(2 * d);
    for (std::size_t j = 0; j < d; ++j) {
        c2[j] = c[j];
        c2[d + j] = -c[j];
    }
    std::vector<HalfSpace> lifted;
    HalfSpace sum_row;
    sum_row.a.assign(2 * d, 1.0);
    sum_row.b = ball.radius;
    lifted.push_back(std::move(sum_row));
    for (const auto& h : constraints) {
        HalfSpace g;
        g.a.resize(2 * d);
        for (std::size_t j = 0; j < d; ++j) {
            g.a[j] = h.a[j];
            g.a[d + j] = -h.a[j];
        }
        g.b = h.b;
        lifted.push_back(std::move(g));
    }
    const Vec lo(2 * d, 0.0), hi(2 * d, ball.radius);
    auto lifted_res = lp_detail::BoundedSimplex::solve(lifted, c2, lo, hi);
    if (!lifted_res.feasible) return {};
    LinearMaxResult res;
    res.feasible = true;
    res.x.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) res.x[j] = lifted_res.x[j] - lifted_res.x[d + j];
    res.value = dot(c, res.x);
    return res;
}

}  // namespace mtp
