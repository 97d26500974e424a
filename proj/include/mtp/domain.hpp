#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "mtp/linalg.hpp"
#include "mtp/rng.hpp"

namespace mtp {

// Axis-aligned box of admissible feature vectors.  The attack searches for
// poison points inside this set; data loaders normalize features into it.
struct FeatureDomain {
    Vec lo;
    Vec hi;

    std::size_t dim() const { return lo.size(); }

    static FeatureDomain unit_box(std::size_t d) {
        return FeatureDomain{Vec(d, 0.0), Vec(d, 1.0)};
    }

    static FeatureDomain symmetric_box(std::size_t d, double radius) {
        return FeatureDomain{Vec(d, -radius), Vec(d, radius)};
    }

    void validate() const {
        if (lo.size() != hi.size()) throw std::invalid_argument("domain: lo/hi size mismatch");
        for (std::size_t i = 0; i < lo.size(); ++i) {
            if (!(lo[i] <= hi[i]) || !std::isfinite(lo[i]) || !std::isfinite(hi[i]))
                throw std::invalid_argument("domain: requires finite lo <= hi");
        }
    }

    bool contains(ConstSpan x, double tol = 1e-12) const {
        if (x.size() != dim()) return false;
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i] < lo[i] - tol || x[i] > hi[i] + tol) return false;
        return true;
    }

    void clamp(Vec& x) const {
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = std::clamp(x[i], lo[i], hi[i]);
    }

    Vec sample(Rng& rng) const {
        Vec x(dim());
        for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(lo[i], hi[i]);
        return x;
    }

    // largest Euclidean norm any point of the box can have
    double sup_norm2() const {
        double s = 0.0;
        for (std::size_t i = 0; i < dim(); ++i) {
            const double m = std::max(std::fabs(lo[i]), std::fabs(hi[i]));
            s += m * m;
        }
        return std::sqrt(s);
    }
};

// l1 ball {x : ||x||_1 <= radius}; used by the norm-closeness guarantees,
// whose witness points live on this set rather than in a box.
struct L1Ball {
    std::size_t dim = 0;
    double radius = 0.0;

    void validate() const {
        if (dim == 0 || !(radius > 0.0) || !std::isfinite(radius))
            throw std::invalid_argument("l1 ball: requires dim > 0 and finite radius > 0");
    }
};

}  // namespace mtp
