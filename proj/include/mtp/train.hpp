#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "mtp/dataset.hpp"
#include "mtp/error.hpp"
#include "mtp/model.hpp"

namespace mtp {

// Deterministic full-batch training.  `tolerance` bounds the duality gap of
// the regularized objective for hinge and the gradient norm for logistic;
// `max_iters` counts dual sweeps (hinge without bias), pair updates (hinge
// with bias) or gradient steps (logistic).
struct TrainConfig {
    double c_r = 0.05;
    double tolerance = 1e-8;
    long max_iters = 100000;
    bool use_bias = true;
};

struct TrainReport {
    long iterations = 0;
    double optimality = 0.0;  // achieved gap / gradient norm
    bool converged = false;
};

// Optional warm-start state threaded through repeated retraining; callers that
// append rows keep the dual variables (hinge) or parameters (logistic) here.
struct WarmStart {
    Vec hinge_alpha;
    Vec logistic_theta;
};

namespace detail {

// --- hinge, no bias: dual coordinate descent (cyclic, deterministic) -------

inline LinearModel train_hinge_nobias(const Dataset& data, const TrainConfig& cfg,
                                      TrainReport* rep, WarmStart* warm) {
    const std::size_t n = data.size(), d = data.dim();
    const double C = 1.0 / (cfg.c_r * double(n));

    Vec alpha(n, 0.0);
    if (warm && !warm->hinge_alpha.empty()) {
        for (std::size_t i = 0; i < std::min(n, warm->hinge_alpha.size()); ++i)
            alpha[i] = std::clamp(warm->hinge_alpha[i], 0.0, C);
    }

    Vec qii(n);
    for (std::size_t i = 0; i < n; ++i) qii[i] = norm2_sq(data.row(i));

    auto rebuild_w = [&](Vec& w) {
        std::fill(w.begin(), w.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            if (alpha[i] != 0.0) axpy(alpha[i] * data.labels[i], data.row(i), w);
    };

    Vec w(d, 0.0);
    rebuild_w(w);

    double gap = 0.0;
    long sweep = 0;
    bool converged = false;
    for (; sweep < cfg.max_iters; ++sweep) {
        for (std::size_t i = 0; i < n; ++i) {
            const double g = data.labels[i] * dot(w, data.row(i)) - 1.0;
            double a_new;
            if (qii[i] > 0.0)
                a_new = std::clamp(alpha[i] - g / qii[i], 0.0, C);
            else
                a_new = g < 0.0 ? C : (g > 0.0 ? 0.0 : alpha[i]);
            const double delta = a_new - alpha[i];
            if (delta != 0.0) {
                alpha[i] = a_new;
                axpy(delta * data.labels[i], data.row(i), w);
            }
        }
        if ((sweep & 63) == 63) rebuild_w(w);  // shed incremental drift

        double hinge_sum = 0.0, alpha_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            hinge_sum += std::max(0.0, 1.0 - data.labels[i] * dot(w, data.row(i)));
            alpha_sum += alpha[i];
        }
        const double wn = norm2_sq(w);
        gap = cfg.c_r * (wn + C * hinge_sum - alpha_sum);  // primal - dual, original scale
        if (gap <= cfg.tolerance) {
            converged = true;
            ++sweep;
            break;
        }
    }

    rebuild_w(w);
    if (warm) warm->hinge_alpha = alpha;
    if (rep) {
        rep->iterations = sweep;
        rep->optimality = gap;
        rep->converged = converged;
    }
    if (!converged)
        throw MtpError("train_diverged", "hinge training stopped at gap " + std::to_string(gap) +
                                             " after " + std::to_string(sweep) + " sweeps");
    LinearModel m;
    m.weights = std::move(w);
    m.bias = 0.0;
    return m;
}

// --- hinge with unregularized bias: pairwise dual updates ------------------
//
// The unregularized intercept adds the equality sum(alpha_i * y_i) = 0 to the
// dual, so coordinates move in pairs; the most-violating pair is selected each
// step (deterministic, ties to the smallest index).

inline double optimal_bias(const Dataset& data, const Vec& scores) {
    const std::size_t n = data.size();
    std::vector<std::pair<double, int>> events(n);  // (breakpoint, label)
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        events[i] = {double(data.labels[i]) - scores[i], data.labels[i]};
        if (data.labels[i] == 1) ++n_pos;
    }
    std::sort(events.begin(), events.end());

    long pos_active = long(n_pos), neg_active = 0;
    if (-pos_active + neg_active >= 0) return events.front().first - 1.0;  // flat from the left
    for (std::size_t e = 0; e < n; ++e) {
        if (events[e].second == 1)
            --pos_active;
        else
            ++neg_active;
        const long slope_right = -pos_active + neg_active;
        if (slope_right > 0) return events[e].first;
        if (slope_right == 0) {
            const double v = events[e].first;
            const double next = e + 1 < n ? events[e + 1].first : v + 2.0;
            return 0.5 * (v + next);
        }
    }
    return events.back().first + 1.0;
}

inline LinearModel train_hinge_bias(const Dataset& data, const TrainConfig& cfg,
                                    TrainReport* rep, WarmStart* warm) {
    const std::size_t n = data.size(), d = data.dim();
    const double C = 1.0 / (cfg.c_r * double(n));

    Vec alpha(n, 0.0);
    if (warm && !warm->hinge_alpha.empty()) {
        for (std::size_t i = 0; i < std::min(n, warm->hinge_alpha.size()); ++i)
            alpha[i] = std::clamp(warm->hinge_alpha[i], 0.0, C);
        // restore dual feasibility sum(alpha*y) = 0 after clamping
        double imbalance = 0.0;
        for (std::size_t i = 0; i < n; ++i) imbalance += alpha[i] * data.labels[i];
        for (std::size_t i = 0; i < n && imbalance != 0.0; ++i) {
            if (imbalance > 0.0 && data.labels[i] == 1) {
                const double delta = std::min(alpha[i], imbalance);
                alpha[i] -= delta;
                imbalance -= delta;
            } else if (imbalance < 0.0 && data.labels[i] == -1) {
                const double delta = std::min(alpha[i], -imbalance);
                alpha[i] -= delta;
                imbalance += delta;
            }
        }
    }

    Vec w(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        if (alpha[i] != 0.0) axpy(alpha[i] * data.labels[i], data.row(i), w);
    Vec score(n);
    for (std::size_t i = 0; i < n; ++i) score[i] = dot(w, data.row(i));

    auto compute_gap = [&](double& bias_out) {
        bias_out = optimal_bias(data, score);
        double hinge_sum = 0.0, alpha_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            hinge_sum += std::max(0.0, 1.0 - data.labels[i] * (score[i] + bias_out));
            alpha_sum += alpha[i];
        }
        return cfg.c_r * (norm2_sq(w) + C * hinge_sum - alpha_sum);
    };

    double bias = 0.0;
    double gap = compute_gap(bias);
    bool converged = gap <= cfg.tolerance;
    long updates = 0;
    const long check_every = std::max<long>(1, long(n) / 4);

    while (!converged && updates < cfg.max_iters) {
        // most-violating pair
        double up_best = -1e300, low_best = 1e300;
        std::ptrdiff_t up_idx = -1, low_idx = -1;
        for (std::size_t i = 0; i < n; ++i) {
            const double f = double(data.labels[i]) - score[i];  // -y * dual gradient
            const bool in_up = (data.labels[i] == 1 && alpha[i] < C) ||
                               (data.labels[i] == -1 && alpha[i] > 0.0);
            const bool in_low = (data.labels[i] == -1 && alpha[i] < C) ||
                                (data.labels[i] == 1 && alpha[i] > 0.0);
            if (in_up && f > up_best) {
                up_best = f;
                up_idx = std::ptrdiff_t(i);
            }
            if (in_low && f < low_best) {
                low_best = f;
                low_idx = std::ptrdiff_t(i);
            }
        }
        if (up_idx < 0 || low_idx < 0 || up_best - low_best <= 1e-12) {
            gap = compute_gap(bias);
            converged = gap <= std::max(cfg.tolerance, 1e-10);
            break;
        }
        const std::size_t i = std::size_t(up_idx), j = std::size_t(low_idx);
        const int yi = data.labels[i], yj = data.labels[j];

        // step t moves alpha_i by yi*t and alpha_j by -yj*t (keeps sum(alpha*y))
        double t_hi = 1e300;
        t_hi = std::min(t_hi, yi == 1 ? C - alpha[i] : alpha[i]);
        t_hi = std::min(t_hi, yj == 1 ? alpha[j] : C - alpha[j]);
        Vec dx = sub(data.row(i), data.row(j));
        const double curvature = norm2_sq(dx);
        double t = curvature > 0.0 ? std::min((up_best - low_best) / curvature, t_hi) : t_hi;
        if (t <= 0.0) break;  // numerically stuck; gap below decides

        alpha[i] += yi * t;
        alpha[j] -= yj * t;
        for (std::size_t k = 0; k < n; ++k) score[k] += t * dot(dx, data.row(k));
        axpy(t, dx, w);
        ++updates;

        if (updates % check_every == 0) {
            // refresh w and scores from alpha to shed drift, then test the gap
            std::fill(w.begin(), w.end(), 0.0);
            for (std::size_t k = 0; k < n; ++k)
                if (alpha[k] != 0.0) axpy(alpha[k] * data.labels[k], data.row(k), w);
            for (std::size_t k = 0; k < n; ++k) score[k] = dot(w, data.row(k));
            gap = compute_gap(bias);
            converged = gap <= cfg.tolerance;
        }
    }

    if (!converged) {
        gap = compute_gap(bias);
        converged = gap <= cfg.tolerance;
    }
    if (warm) warm->hinge_alpha = alpha;
    if (rep) {
        rep->iterations = updates;
        rep->optimality = gap;
        rep->converged = converged;
    }
    if (!converged)
        throw MtpError("train_diverged", "hinge training stopped at gap " + std::to_string(gap) +
                                             " after " + std::to_string(updates) + " pair updates");
    LinearModel m;
    m.weights = std::move(w);
    m.bias = bias;
    return m;
}

// --- logistic: Nesterov-accelerated gradient with adaptive restart ---------

// Objective and gradient of the packed parameter vector (weights then bias).
inline double logistic_value_grad(const Dataset& data, const Vec& theta, double c_r,
                                  bool use_bias, Vec* grad) {
    const std::size_t n = data.size(), d = data.dim();
    const double b = use_bias ? theta[d] : 0.0;
    if (grad) grad->assign(theta.size(), 0.0);
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const ConstSpan x = data.row(i);
        const double margin = data.labels[i] * (dot(ConstSpan(theta.data(), d), x) + b);
        loss += log1p_exp(-margin);
        if (grad) {
            const double coeff = -double(data.labels[i]) * sigmoid_neg(margin) / double(n);
            for (std::size_t j = 0; j < d; ++j) (*grad)[j] += coeff * x[j];
            if (use_bias) (*grad)[d] += coeff;
        }
    }
    double value = loss / double(n);
    for (std::size_t j = 0; j < d; ++j) {
        value += 0.5 * c_r * theta[j] * theta[j];
        if (grad) (*grad)[j] += c_r * theta[j];
    }
    return value;
}

// Deterministic power iteration bounding the largest eigenvalue of the
// (bias-augmented) Gram matrix; gives the gradient Lipschitz constant.
inline double logistic_lipschitz(const Dataset& data, double c_r, bool use_bias) {
    const std::size_t n = data.size(), d = data.dim();
    const std::size_t p = d + (use_bias ? 1 : 0);
    Vec v(p, 1.0 / std::sqrt(double(p)));
    double lambda = 0.0;
    for (int it = 0; it < 100; ++it) {
        Vec u(p, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const ConstSpan x = data.row(i);
            double s = dot(ConstSpan(v.data(), d), x);
            if (use_bias) s += v[d];
            for (std::size_t j = 0; j < d; ++j) u[j] += s * x[j];
            if (use_bias) u[d] += s;
        }
        lambda = norm2(u);
        if (lambda <= 0.0) break;
        for (std::size_t j = 0; j < p; ++j) v[j] = u[j] / lambda;
    }
    return 1.02 * lambda / (4.0 * double(n)) + c_r;
}

inline LinearModel train_logistic(const Dataset& data, const TrainConfig& cfg,
                                  TrainReport* rep, WarmStart* warm) {
    const std::size_t d = data.dim();
    const std::size_t p = d + (cfg.use_bias ? 1 : 0);

    Vec x(p, 0.0);
    if (warm && warm->logistic_theta.size() == p) x = warm->logistic_theta;
    const double L = std::max(logistic_lipschitz(data, cfg.c_r, cfg.use_bias), 1e-12);

    Vec y = x, grad(p);
    double fx = logistic_value_grad(data, x, cfg.c_r, cfg.use_bias, nullptr);
    double t_momentum = 1.0;
    double gnorm = 0.0;
    long it = 0;
    bool converged = false;
    for (; it < cfg.max_iters; ++it) {
        logistic_value_grad(data, y, cfg.c_r, cfg.use_bias, &grad);
        Vec x_new = y;
        axpy(-1.0 / L, grad, x_new);
        const double f_new = logistic_value_grad(data, x_new, cfg.c_r, cfg.use_bias, &grad);
        gnorm = norm2(grad);  // gradient at the candidate iterate
        if (gnorm <= cfg.tolerance) {
            x = std::move(x_new);
            converged = true;
            ++it;
            break;
        }
        // ulp-level slack keeps gradient contraction going once the value
        // itself has hit the floating-point floor
        if (f_new > fx + 1e-14 * (1.0 + std::fabs(fx))) {
            if (t_momentum == 1.0) break;  // pure gradient step increased f: stalled
            // adaptive restart: drop momentum and re-step from x
            t_momentum = 1.0;
            y = x;
            continue;
        }
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
        y = x_new;
        for (std::size_t j = 0; j < p; ++j)
            y[j] += ((t_momentum - 1.0) / t_next) * (x_new[j] - x[j]);
        x = std::move(x_new);
        fx = f_new;
        t_momentum = t_next;
    }

    if (warm) warm->logistic_theta = x;
    if (rep) {
        rep->iterations = it;
        rep->optimality = gnorm;
        rep->converged = converged;
    }
    if (!converged)
        throw MtpError("train_diverged", "logistic training stopped at |grad| " +
                                             std::to_string(gnorm) + " after " +
                                             std::to_string(it) + " steps");
    LinearModel m;
    m.weights.assign(x.begin(), x.begin() + std::ptrdiff_t(d));
    m.bias = cfg.use_bias ? x[d] : 0.0;
    return m;
}

}  // namespace detail

// Trains the regularized linear classifier minimizing
//   (1/n) * sum_i loss(theta; x_i, y_i) + c_r * 0.5*||w||^2
// deterministically (identical inputs give identical outputs).  Throws
// MtpError("train_diverged") when the tolerance is not reached in max_iters.
inline LinearModel train(LossKind loss, const Dataset& data, const TrainConfig& cfg,
                         TrainReport* report = nullptr, WarmStart* warm = nullptr) {
    data.validate();
    if (data.size() == 0) throw MtpError("invalid_request", "train: empty dataset");
    if (cfg.c_r < 0.0) throw MtpError("invalid_request", "train: c_r must be >= 0");
    if (loss == LossKind::Hinge) {
        if (!(cfg.c_r > 0.0))
            throw MtpError("invalid_request", "train: hinge requires c_r > 0");
        return cfg.use_bias ? detail::train_hinge_bias(data, cfg, report, warm)
                            : detail::train_hinge_nobias(data, cfg, report, warm);
    }
    return detail::train_logistic(data, cfg, report, warm);
}

}  // namespace mtp
