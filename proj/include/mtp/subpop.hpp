#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "mtp/dataset.hpp"
#include "mtp/error.hpp"
#include "mtp/kmeans.hpp"
#include "mtp/model.hpp"

namespace mtp {

// Attackable subpopulations: cluster members carrying `label_filter`, with the
// clusters ranked by how well the clean model serves them.
struct SubpopulationSpec {
    std::vector<int> assignments;                         // cluster id per row of the source data
    std::vector<int> selected;                            // chosen cluster ids, best-ranked first
    int label_filter = -1;                                // label members must carry
    std::vector<std::vector<std::size_t>> member_indices; // per selected cluster, rows of the source data
};

inline std::vector<std::size_t> members_of(const std::vector<int>& assignments,
                                           const std::vector<int>& labels, int cluster,
                                           int label_filter) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] == cluster && labels[i] == label_filter) out.push_back(i);
    return out;
}

// Ranks clusters by the clean model's accuracy on their label-filtered members
// (highest first; ties and equal accuracies resolve to the lower cluster id)
// and keeps the top_m.  Clusters with no matching member are not rankable.
inline SubpopulationSpec select_subpopulations(const std::vector<int>& assignments,
                                               const Dataset& data, int label_filter,
                                               const LinearModel& clean_model, int top_m) {
    if (assignments.size() != data.size())
        throw MtpError("invalid_request", "select_subpopulations: assignment size mismatch");
    if (label_filter != 1 && label_filter != -1)
        throw MtpError("invalid_request", "select_subpopulations: label_filter must be +1 or -1");
    if (top_m < 0) throw MtpError("invalid_request", "select_subpopulations: top_m must be >= 0");

    const int k = assignments.empty() ? 0 : *std::max_element(assignments.begin(), assignments.end()) + 1;
    struct Ranked {
        int cluster;
        double accuracy;
    };
    std::vector<Ranked> ranked;
    for (int c = 0; c < k; ++c) {
        const auto members = members_of(assignments, data.labels, c, label_filter);
        if (members.empty()) continue;
        std::size_t correct = 0;
        for (std::size_t i : members)
            if (clean_model.predict(data.row(i)) == data.labels[i]) ++correct;
        ranked.push_back({c, double(correct) / double(members.size())});
    }
    if (ranked.empty())
        throw MtpError("invalid_request", "select_subpopulations: no cluster has a member with the filtered label");

    std::stable_sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.accuracy != b.accuracy) return a.accuracy > b.accuracy;
        return a.cluster < b.cluster;
    });

    SubpopulationSpec spec;
    spec.assignments = assignments;
    spec.label_filter = label_filter;
    const std::size_t keep = std::min<std::size_t>(std::size_t(top_m), ranked.size());
    for (std::size_t i = 0; i < keep; ++i) {
        spec.selected.push_back(ranked[i].cluster);
        spec.member_indices.push_back(members_of(assignments, data.labels, ranked[i].cluster, label_filter));
    }
    return spec;
}

// Resolves which rows of another dataset (typically the test split) belong to
// a selected subpopulation, via nearest-centroid assignment plus label filter.
inline std::vector<std::size_t> resolve_members(const Dataset& data, const KMeansResult& clusters,
                                                int cluster, int label_filter) {
    const auto assign = assign_to_centroids(data, clusters.centroids, clusters.k);
    return members_of(assign, data.labels, cluster, label_filter);
}

}  // namespace mtp
