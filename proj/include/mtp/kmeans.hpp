#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

#include "mtp/dataset.hpp"
#include "mtp/error.hpp"
#include "mtp/rng.hpp"

namespace mtp {

struct KMeansResult {
    std::vector<int> assignments;  // one cluster id per row
    Vec centroids;                 // k * d, row-major
    int k = 0;
    int iterations = 0;
};

namespace detail {

inline double sq_dist(ConstSpan a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double t = a[j] - b[j];
        s += t * t;
    }
    return s;
}

}  // namespace detail

// Nearest-centroid assignment; distance ties resolve to the lowest cluster id.
inline std::vector<int> assign_to_centroids(const Dataset& data, const Vec& centroids, int k) {
    const std::size_t d = data.dim();
    std::vector<int> out(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int best_c = 0;
        for (int c = 0; c < k; ++c) {
            const double dist = detail::sq_dist(data.row(i), centroids.data() + std::size_t(c) * d, d);
            if (dist < best) {
                best = dist;
                best_c = c;
            }
        }
        out[i] = best_c;
    }
    return out;
}

// Seeded k-means++ initialization followed by Lloyd iterations, capped at 300,
// converging when assignments stop changing.  Fully deterministic for a given
// (data, k, seed).
inline KMeansResult cluster_kmeans(const Dataset& data, int k, std::uint64_t seed,
                                   int max_iterations = 300) {
    const std::size_t n = data.size(), d = data.dim();
    if (k <= 0) throw MtpError("invalid_request", "kmeans: k must be positive");
    if (std::size_t(k) > n) throw MtpError("invalid_request", "kmeans: k exceeds number of rows");

    Rng rng(mix_seed(seed, 0xC15));
    Vec centroids(std::size_t(k) * d);
    Vec min_dist(n, std::numeric_limits<double>::infinity());

    // k-means++ seeding: first center uniform, then D^2-weighted
    std::size_t first = std::size_t(rng.below(n));
    std::copy_n(data.row(first).data(), d, centroids.begin());
    for (int c = 1; c < k; ++c) {
        const double* prev = centroids.data() + std::size_t(c - 1) * d;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            min_dist[i] = std::min(min_dist[i], detail::sq_dist(data.row(i), prev, d));
            total += min_dist[i];
        }
        if (total <= 0.0)
            throw MtpError("invalid_request", "kmeans: k exceeds number of distinct rows");
        double target = rng.u01() * total;
        std::size_t pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
            target -= min_dist[i];
            if (target <= 0.0) {
                pick = i;
                break;
            }
        }
        std::copy_n(data.row(pick).data(), d, centroids.begin() + std::ptrdiff_t(std::size_t(c) * d));
    }

    std::vector<int> assign = assign_to_centroids(data, centroids, k);
    int iter = 0;
    for (; iter < max_iterations; ++iter) {
        // means of each cluster; empty clusters keep their previous centroid
        Vec sums(std::size_t(k) * d, 0.0);
        std::vector<std::size_t> counts(std::size_t(k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const ConstSpan x = data.row(i);
            double* s = sums.data() + std::size_t(assign[i]) * d;
            for (std::size_t j = 0; j < d; ++j) s[j] += x[j];
            ++counts[std::size_t(assign[i])];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[std::size_t(c)] == 0) continue;
            double* dst = centroids.data() + std::size_t(c) * d;
            const double* s = sums.data() + std::size_t(c) * d;
            for (std::size_t j = 0; j < d; ++j) dst[j] = s[j] / double(counts[std::size_t(c)]);
        }
        std::vector<int> next = assign_to_centroids(data, centroids, k);
        const bool stable = next == assign;
        assign = std::move(next);
        if (stable) {
            ++iter;
            break;
        }
    }

    KMeansResult res;
    res.assignments = std::move(assign);
    res.centroids = std::move(centroids);
    res.k = k;
    res.iterations = iter;
    return res;
}

}  // namespace mtp
