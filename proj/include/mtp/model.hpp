#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mtp/dataset.hpp"
#include "mtp/error.hpp"
#include "mtp/linalg.hpp"

namespace mtp {

enum class LossKind { Hinge, Logistic };

inline const char* loss_name(LossKind k) { return k == LossKind::Hinge ? "hinge" : "logistic"; }

inline LossKind loss_from_name(const std::string& s) {
    if (s == "hinge") return LossKind::Hinge;
    if (s == "logistic") return LossKind::Logistic;
    throw MtpError("config_schema", "unknown loss '" + s + "'");
}

struct LinearModel {
    Vec weights;
    double bias = 0.0;

    double decision(ConstSpan x) const { return dot(weights, x) + bias; }

    // margin ties resolve to +1
    int predict(ConstSpan x) const { return decision(x) >= 0.0 ? 1 : -1; }
};

// numerically stable log(1 + exp(z))
inline double log1p_exp(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

namespace detail {

// sigmoid(-z) = 1 / (1 + exp(z)) without overflow on either side
inline double sigmoid_neg(double z) {
    if (z > 0.0) {
        const double e = std::exp(-z);
        return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(z));
}

}  // namespace detail

inline double point_loss(LossKind loss, const LinearModel& m, ConstSpan x, int y) {
    const double margin = y * m.decision(x);
    if (loss == LossKind::Hinge) return std::max(0.0, 1.0 - margin);
    return log1p_exp(-margin);
}

// Unweighted SUM of per-point losses (objective terms scale it explicitly).
inline double empirical_loss(LossKind loss, const LinearModel& m, const Dataset& data) {
    double s = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) s += point_loss(loss, m, data.row(i), data.labels[i]);
    return s;
}

// Ridge term 0.5*||w||^2; the bias is never regularized.
inline double regularizer(const LinearModel& m) { return 0.5 * norm2_sq(m.weights); }

// Regularized training objective: (1/n) * sum loss + c_r * R
inline double training_objective(LossKind loss, const LinearModel& m, const Dataset& data, double c_r) {
    if (data.size() == 0) throw MtpError("invalid_request", "objective of empty dataset");
    return empirical_loss(loss, m, data) / double(data.size()) + c_r * regularizer(m);
}

struct Metrics {
    double overall_accuracy = 0.0;
    std::optional<double> subpop_accuracy;
};

// Accuracy on `data`; `subpop_members` (row indices into `data`) adds the
// restricted accuracy.  Empty member list is an error, not a silent NaN.
inline Metrics evaluate(const LinearModel& m, const Dataset& data,
                        const std::vector<std::size_t>* subpop_members = nullptr) {
    if (data.size() == 0) throw MtpError("invalid_request", "evaluate on empty dataset");
    Metrics out;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (m.predict(data.row(i)) == data.labels[i]) ++correct;
    out.overall_accuracy = double(correct) / double(data.size());
    if (subpop_members) {
        if (subpop_members->empty())
            throw MtpError("invalid_request", "evaluate: empty subpopulation");
        std::size_t sub_correct = 0;
        for (std::size_t i : *subpop_members)
            if (m.predict(data.row(i)) == data.labels[i]) ++sub_correct;
        out.subpop_accuracy = double(sub_correct) / double(subpop_members->size());
    }
    return out;
}

}  // namespace mtp
