#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace mtp {

using Vec = std::vector<double>;
using ConstSpan = std::span<const double>;

inline double dot(ConstSpan a, ConstSpan b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

// y += alpha * x
inline void axpy(double alpha, ConstSpan x, Vec& y) {
    for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(double alpha, Vec& x) {
    for (double& v : x) v *= alpha;
}

inline double norm2_sq(ConstSpan x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

inline double norm2(ConstSpan x) { return std::sqrt(norm2_sq(x)); }

inline double norm1(ConstSpan x) {
    double s = 0.0;
    for (double v : x) s += std::fabs(v);
    return s;
}

inline double norm_inf(ConstSpan x) {
    double s = 0.0;
    for (double v : x) s = std::max(s, std::fabs(v));
    return s;
}

inline Vec sub(ConstSpan a, ConstSpan b) {
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

}  // namespace mtp
