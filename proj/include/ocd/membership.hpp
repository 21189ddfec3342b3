#pragma once

// Soft membership -> overlapping cover via the zeta threshold.

#include "ocd/graph.hpp"

#include <vector>

namespace ocd {

struct AssignmentResult {
    CommunityCover cover;
    std::vector<int> kept_columns;  // original column of each output community
};

/// Node i joins community p iff H_ip >= zeta. A node clearing no threshold
/// falls back to its argmax column (lowest index on ties). Empty communities
/// are dropped; kept_columns records the surviving column indices.
inline AssignmentResult assign_communities(const Matrix& h, double zeta) {
    if (zeta <= 0) throw std::invalid_argument("assign_communities: zeta must be positive");
    int n = static_cast<int>(h.rows()), k = static_cast<int>(h.cols());
    std::vector<std::vector<int>> members(k);
    for (int i = 0; i < n; ++i) {
        bool any = false;
        for (int p = 0; p < k; ++p)
            if (h(i, p) >= zeta) {
                members[p].push_back(i);
                any = true;
            }
        if (!any) {
            int best = 0;
            for (int p = 1; p < k; ++p)
                if (h(i, p) > h(i, best)) best = p;
            members[best].push_back(i);
        }
    }
    AssignmentResult res;
    res.cover.num_nodes = n;
    for (int p = 0; p < k; ++p) {
        if (members[p].empty()) continue;
        res.kept_columns.push_back(p);
        res.cover.communities.push_back(std::move(members[p]));
    }
    return res;
}

}  // namespace ocd
