#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include "mtp/attack.hpp"
#include "mtp/error.hpp"
#include "mtp/model.hpp"
#include "mtp/oracle.hpp"

namespace mtp {

// Strong-convexity-style margin of the attacked objective around the target;
// the certificate is vacuous unless this is positive.
inline double gamma_svm(const LinearModel& theta_p, double c_r) {
    return 1.0 - 2.0 * c_r * regularizer(theta_p);
}

// Cumulative regret coefficient of the follow-the-leader inner player with
// gradient bound G after T rounds.
inline double regret_alpha(double g_bound, long t) {
    if (t < 1) throw MtpError("invalid_argument", "regret_alpha requires t >= 1");
    return 0.5 * g_bound * g_bound * (1.0 + std::log(double(t)));
}

// Convergence rate bound: after T rounds the induced model is within eps(T)
// of the target in loss distance, provided gamma > 0.  delta_loss is the
// clean-data loss gap L(theta_p) - L(theta_c) and reg_gap the matching
// (N-scaled) regularization gap.
inline double theoretical_eps(long t, double g_bound, double gamma, double delta_loss,
                              double reg_gap) {
    if (t < 1) throw MtpError("invalid_argument", "theoretical_eps requires t >= 1");
    if (gamma <= 0.0)
        throw MtpError("invalid_argument", "theoretical_eps requires a positive gamma");
    return (regret_alpha(g_bound, t) + delta_loss + reg_gap) / (double(t) * gamma);
}

// Lipschitz constant linking parameter distance to loss distance when data
// lives in the l1 ball of radius q and models in the l1 ball of radius r.
inline double bidirectional_constant(double r, double q) {
    if (r <= 0.0 || q <= 0.0)
        throw MtpError("invalid_argument", "bidirectional_constant requires positive radii");
    return r * q;
}

namespace certify_detail {

struct BoundParts {
    double clean_gap = 0.0;  // L(theta_p; D_c) - L(theta; D_c), unweighted sums
    double reg_gap = 0.0;    // R(theta_p) - R(theta)
    double sup = 0.0;        // max loss difference of theta against theta_p
};

inline BoundParts bound_parts(const LinearModel& theta, const LinearModel& theta_p,
                              const Dataset& data, const FeatureDomain& domain) {
    BoundParts p;
    p.clean_gap = empirical_loss(LossKind::Hinge, theta_p, data) -
                  empirical_loss(LossKind::Hinge, theta, data);
    p.reg_gap = regularizer(theta_p) - regularizer(theta);
    p.sup = hinge_max_loss_diff_exact(theta, theta_p, domain).value;
    return p;
}

inline constexpr double kDenTol = 1e-9;

}  // namespace certify_detail

// Lower bound on the number of poisoning points any attacker needs to move
// the clean optimum at least as far as `theta`.  Undefined (nullopt) when the
// denominator is not safely positive.
inline std::optional<double> lower_bound_z(const LinearModel& theta, const LinearModel& theta_p,
                                           const Dataset& data, double c_r,
                                           const FeatureDomain& domain) {
    auto p = certify_detail::bound_parts(theta, theta_p, data, domain);
    const double n = double(data.size());
    const double num = p.clean_gap + n * c_r * p.reg_gap;
    const double den = p.sup - c_r * p.reg_gap;
    if (den <= certify_detail::kDenTol) return std::nullopt;
    return num / den;
}

// Relaxed variant: certifies against every model within loss distance eps of
// theta_p, for models with regularizer at most r_star.  k couples parameter
// and loss distances (see bidirectional_constant).  Clamped at zero.
inline std::optional<double> lower_bound_eps(const LinearModel& theta, const LinearModel& theta_p,
                                             const Dataset& data, double c_r,
                                             const FeatureDomain& domain, double eps, double k,
                                             double r_star) {
    auto p = certify_detail::bound_parts(theta, theta_p, data, domain);
    const double n = double(data.size());
    const double num = p.clean_gap - n * c_r * r_star - n * k * eps;
    const double den = p.sup + c_r * r_star + k * eps;
    if (den <= certify_detail::kDenTol) return std::nullopt;
    return std::max(0.0, num / den);
}

struct LowerBoundCertificate {
    double bound = 0.0;
    long bound_ceil = 0;
    long witness_iteration = 0;
    bool valid = false;
    std::string variant = "exact";  // "exact" or "epsilon_relaxed"
    double gamma = 0.0;
    double g_estimate = 0.0;
    double r_star = 0.0;
    double k = 0.0;
    std::optional<double> eps;
};

namespace certify_detail {

inline long ceil_clamped(double bound) {
    return std::max(0L, long(std::ceil(bound - 1e-12)));
}

}  // namespace certify_detail

// Strongest per-iteration bound recorded along an attack trace.  Records whose
// denominator guard tripped are skipped; if none survive the trace certifies
// nothing and we fail loudly rather than return a vacuous zero.
inline LowerBoundCertificate best_lower_bound(const AttackTrace& trace, const LinearModel& theta_p,
                                              const Dataset& data, double c_r,
                                              const FeatureDomain& domain) {
    LowerBoundCertificate cert;
    cert.gamma = gamma_svm(theta_p, c_r);
    cert.g_estimate = trace.g_estimate;
    cert.r_star = 0.0;
    cert.k = 0.0;
    (void)data;
    (void)domain;

    bool found = false;
    for (const auto& r : trace.records) {
        if (!r.lower_bound_valid) continue;
        if (!found || r.lower_bound > cert.bound) {
            cert.bound = r.lower_bound;
            cert.witness_iteration = r.iteration;
            found = true;
        }
    }
    if (!found)
        throw MtpError("certificate_invalid",
                       "no trace iteration produced a valid lower bound");
    cert.bound_ceil = certify_detail::ceil_clamped(cert.bound);
    cert.valid = true;
    cert.variant = "exact";
    return cert;
}

// Epsilon-relaxed certificate over the trace.  Per-record numerators are
// rebuilt from the recorded clean loss and regularizer value; the recorded
// oracle supremum stands in for the exact one, which is only safe for records
// from an exact-oracle run.
inline LowerBoundCertificate best_lower_bound_eps(const AttackTrace& trace,
                                                  const LinearModel& theta_p, const Dataset& data,
                                                  double c_r, double eps, double k,
                                                  double r_star) {
    if (eps < 0.0) throw MtpError("invalid_argument", "eps must be nonnegative");
    if (k <= 0.0) throw MtpError("invalid_argument", "k must be positive");
    if (r_star < 0.0) throw MtpError("invalid_argument", "r_star must be nonnegative");

    LowerBoundCertificate cert;
    cert.gamma = gamma_svm(theta_p, c_r);
    cert.g_estimate = trace.g_estimate;
    cert.r_star = r_star;
    cert.k = k;
    cert.eps = eps;

    const double n = double(data.size());
    const double loss_p_clean = empirical_loss(LossKind::Hinge, theta_p, data);
    bool found = false;
    for (const auto& r : trace.records) {
        if (!r.oracle_exact) continue;
        const double num = loss_p_clean - r.clean_loss - n * c_r * r_star - n * k * eps;
        const double den = r.max_loss_diff + c_r * r_star + k * eps;
        if (den <= certify_detail::kDenTol) continue;
        const double z = std::max(0.0, num / den);
        if (!found || z > cert.bound) {
            cert.bound = z;
            cert.witness_iteration = r.iteration;
            found = true;
        }
    }
    if (!found)
        throw MtpError("certificate_invalid",
                       "no trace iteration produced a valid relaxed lower bound");
    cert.bound_ceil = certify_detail::ceil_clamped(cert.bound);
    cert.valid = true;
    cert.variant = "epsilon_relaxed";
    return cert;
}

inline nlohmann::json certificate_to_json(const LowerBoundCertificate& cert) {
    nlohmann::json j;
    j["bound"] = cert.bound;
    j["bound_ceil"] = cert.bound_ceil;
    j["witness_iteration"] = cert.witness_iteration;
    j["valid"] = cert.valid;
    j["variant"] = cert.variant;
    nlohmann::json c;
    c["gamma"] = cert.gamma;
    c["G"] = cert.g_estimate;
    c["r_star"] = cert.r_star;
    c["k"] = cert.k;
    if (cert.eps) c["eps"] = *cert.eps;
    j["constants"] = c;
    return j;
}

inline void save_certificate(const LowerBoundCertificate& cert, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MtpError("io", "cannot write '" + path + "'");
    out << certificate_to_json(cert).dump(2) << "\n";
}

}  // namespace mtp
