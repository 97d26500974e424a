#pragma once

#include <algorithm>
#include <cstdint>

#include "mtp/dataset.hpp"
#include "mtp/rng.hpp"

namespace mtp {

// Two overlapping Gaussian blobs in the unit square, one per class; the
// workhorse of the scaled-down experiment suite.
struct TwoGaussianSpec {
    std::size_t n = 200;
    double mean_pos_x = 0.65, mean_pos_y = 0.65;
    double mean_neg_x = 0.35, mean_neg_y = 0.35;
    double sigma = 0.15;
};

inline Dataset make_two_gaussians(const TwoGaussianSpec& spec, std::uint64_t seed) {
    Dataset ds = Dataset::empty(FeatureDomain::unit_box(2));
    Rng rng(mix_seed(seed, 0x26AU));
    const std::size_t n_pos = (spec.n + 1) / 2;
    for (std::size_t i = 0; i < spec.n; ++i) {
        const bool pos = i < n_pos;
        const double mx = pos ? spec.mean_pos_x : spec.mean_neg_x;
        const double my = pos ? spec.mean_pos_y : spec.mean_neg_y;
        Vec x{std::clamp(mx + spec.sigma * rng.normal(), 0.0, 1.0),
              std::clamp(my + spec.sigma * rng.normal(), 0.0, 1.0)};
        ds.append(x, pos ? 1 : -1);
    }
    return ds;
}

}  // namespace mtp
