#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "mtp/domain.hpp"
#include "mtp/linalg.hpp"

namespace mtp {

// Dense labeled dataset with +-1 labels.  Features are stored row-major;
// every row is expected to lie inside `domain` (loaders normalize/clamp).
struct Dataset {
    std::vector<double> features;  // n * d, row-major
    std::vector<int> labels;       // each +1 or -1
    FeatureDomain domain;

    std::size_t size() const { return labels.size(); }
    std::size_t dim() const { return domain.dim(); }

    ConstSpan row(std::size_t i) const {
        return ConstSpan(features.data() + i * dim(), dim());
    }

    void append(ConstSpan x, int y, std::size_t copies = 1) {
        if (x.size() != dim()) throw std::invalid_argument("dataset: appended row has wrong dimension");
        if (y != 1 && y != -1) throw std::invalid_argument("dataset: label must be +1 or -1");
        for (std::size_t c = 0; c < copies; ++c) {
            features.insert(features.end(), x.begin(), x.end());
            labels.push_back(y);
        }
    }

    void validate() const {
        domain.validate();
        if (features.size() != labels.size() * dim())
            throw std::invalid_argument("dataset: feature matrix shape mismatch");
        for (int y : labels)
            if (y != 1 && y != -1) throw std::invalid_argument("dataset: label must be +1 or -1");
    }

    static Dataset empty(FeatureDomain dom) {
        Dataset ds;
        ds.domain = std::move(dom);
        return ds;
    }
};

inline Dataset concat(const Dataset& a, const Dataset& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("concat: dimension mismatch");
    Dataset out = a;
    out.features.insert(out.features.end(), b.features.begin(), b.features.end());
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    return out;
}

}  // namespace mtp
