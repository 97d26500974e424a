#pragma once

// Independent reference implementations used only by the tests: brute-force
// LP by active-set enumeration, dense grid maximization of loss differences,
// 1-d objective grids and bisection.  Deliberately simple and slow.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "mtp/dataset.hpp"
#include "mtp/domain.hpp"
#include "mtp/lp.hpp"
#include "mtp/model.hpp"
#include "mtp/rng.hpp"

namespace ref {

using mtp::ConstSpan;
using mtp::FeatureDomain;
using mtp::HalfSpace;
using mtp::LinearModel;
using mtp::LossKind;
using mtp::Vec;

struct BruteLp {
    bool feasible = false;
    double value = 0.0;
};

// Solves an s x s linear system by Gaussian elimination; false if singular.
inline bool solve_dense(std::vector<Vec> M, Vec rhs, Vec& out) {
    const std::size_t s = rhs.size();
    std::vector<std::size_t> order(s);
    for (std::size_t i = 0; i < s; ++i) order[i] = i;
    for (std::size_t col = 0; col < s; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < s; ++r)
            if (std::fabs(M[order[r]][col]) > std::fabs(M[order[piv]][col])) piv = r;
        std::swap(order[col], order[piv]);
        if (std::fabs(M[order[col]][col]) < 1e-12) return false;
        for (std::size_t r = col + 1; r < s; ++r) {
            const double f = M[order[r]][col] / M[order[col]][col];
            for (std::size_t k = col; k < s; ++k) M[order[r]][k] -= f * M[order[col]][k];
            rhs[order[r]] -= f * rhs[order[col]];
        }
    }
    out.assign(s, 0.0);
    for (std::size_t i = s; i-- > 0;) {
        double v = rhs[order[i]];
        for (std::size_t k = i + 1; k < s; ++k) v -= M[order[i]][k] * out[k];
        out[i] = v / M[order[i]][i];
    }
    return true;
}

// Exhaustive vertex enumeration for max c.x over box + halfspaces (d <= 3).
// Every vertex of the polytope fixes d constraints: some subset of the
// halfspaces as equalities plus box facets for the remaining coordinates.
inline BruteLp brute_linear_max(const Vec& c, const FeatureDomain& box,
                                const std::vector<HalfSpace>& cons) {
    const std::size_t d = box.dim();
    BruteLp best;
    auto consider = [&](const Vec& x) {
        for (std::size_t j = 0; j < d; ++j)
            if (x[j] < box.lo[j] - 1e-9 || x[j] > box.hi[j] + 1e-9) return;
        for (const auto& h : cons)
            if (mtp::dot(h.a, x) > h.b + 1e-9 * (1.0 + std::fabs(h.b))) return;
        const double v = mtp::dot(c, x);
        if (!best.feasible || v > best.value) {
            best.feasible = true;
            best.value = v;
        }
    };

    const std::size_t n_subsets = std::size_t(1) << cons.size();
    std::vector<int> pattern(d);  // 0 = lo, 1 = hi, 2 = free
    for (std::size_t sub = 0; sub < n_subsets; ++sub) {
        std::vector<std::size_t> eq;
        for (std::size_t i = 0; i < cons.size(); ++i)
            if (sub & (std::size_t(1) << i)) eq.push_back(i);
        // choose exactly |eq| free coordinates; iterate base-3 patterns
        std::size_t total = 1;
        for (std::size_t j = 0; j < d; ++j) total *= 3;
        for (std::size_t code = 0; code < total; ++code) {
            std::size_t t = code, free_count = 0;
            for (std::size_t j = 0; j < d; ++j) {
                pattern[j] = int(t % 3);
                t /= 3;
                if (pattern[j] == 2) ++free_count;
            }
            if (free_count != eq.size()) continue;
            Vec x(d);
            std::vector<std::size_t> free_idx;
            for (std::size_t j = 0; j < d; ++j) {
                if (pattern[j] == 2)
                    free_idx.push_back(j);
                else
                    x[j] = pattern[j] == 0 ? box.lo[j] : box.hi[j];
            }
            if (free_idx.empty()) {
                consider(x);
                continue;
            }
            std::vector<Vec> M(eq.size(), Vec(eq.size(), 0.0));
            Vec rhs(eq.size(), 0.0);
            for (std::size_t r = 0; r < eq.size(); ++r) {
                const auto& h = cons[eq[r]];
                rhs[r] = h.b;
                for (std::size_t j = 0; j < d; ++j) {
                    if (pattern[j] == 2) continue;
                    rhs[r] -= h.a[j] * x[j];
                }
                for (std::size_t fc = 0; fc < free_idx.size(); ++fc) M[r][fc] = h.a[free_idx[fc]];
            }
            Vec sol;
            if (!solve_dense(M, rhs, sol)) continue;
            for (std::size_t fc = 0; fc < free_idx.size(); ++fc) x[free_idx[fc]] = sol[fc];
            consider(x);
        }
    }
    return best;
}

// Dense grid maximization of the loss difference over a box (d = 1 or 2).
struct GridMax {
    double value = -std::numeric_limits<double>::infinity();
    Vec x;
    int y = 1;
};

inline GridMax grid_max_loss_diff(const LinearModel& attacked, const LinearModel& target,
                                  LossKind loss, const FeatureDomain& box, double step) {
    const std::size_t d = box.dim();
    GridMax best;
    std::vector<std::size_t> counts(d);
    for (std::size_t j = 0; j < d; ++j)
        counts[j] = std::size_t(std::floor((box.hi[j] - box.lo[j]) / step + 1e-9)) + 1;
    Vec x(d);
    std::vector<std::size_t> idx(d, 0);
    while (true) {
        for (std::size_t j = 0; j < d; ++j)
            x[j] = std::min(box.hi[j], box.lo[j] + double(idx[j]) * step);
        for (int y : {1, -1}) {
            const double v =
                mtp::point_loss(loss, attacked, x, y) - mtp::point_loss(loss, target, x, y);
            if (v > best.value) {
                best.value = v;
                best.x = x;
                best.y = y;
            }
        }
        std::size_t j = 0;
        for (; j < d; ++j) {
            if (++idx[j] < counts[j]) break;
            idx[j] = 0;
        }
        if (j == d) break;
    }
    return best;
}

// 1-d training-objective grid: argmin over theta in [lo, hi] with given step.
inline std::pair<double, double> grid_min_1d(const std::function<double(double)>& f, double lo,
                                             double hi, double step) {
    double best_arg = lo, best = f(lo);
    for (double t = lo + step; t <= hi + 1e-12; t += step) {
        const double v = f(t);
        if (v < best) {
            best = v;
            best_arg = t;
        }
    }
    return {best_arg, best};
}

inline double bisect(const std::function<double(double)>& f, double lo, double hi, double tol) {
    double flo = f(lo);
    for (int it = 0; it < 200 && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if ((flo <= 0.0) == (fm <= 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

inline mtp::Dataset make_dataset_1d(const std::vector<std::pair<double, int>>& pts, double lo,
                                    double hi) {
    mtp::Dataset ds = mtp::Dataset::empty(FeatureDomain{{lo}, {hi}});
    for (const auto& [x, y] : pts) ds.append(std::array<double, 1>{x}, y);
    return ds;
}

}  // namespace ref
