#pragma once

// Attribute corruption: exchange feature vectors between nodes at rate p_mis.

#include "ocd/graph.hpp"

#include <numeric>
#include <random>

namespace ocd {

enum class NoiseMode { SwapPairs, Shuffle };

/// Selects floor(p_mis * N) nodes uniformly without replacement (rounded
/// down to an even count for SwapPairs), then either swaps feature rows
/// along a random perfect matching of the selection, or permutes the
/// selected rows wholesale (Shuffle). The row multiset is preserved.
inline Matrix perturb_attributes(const Matrix& features, double p_mis, uint64_t seed,
                                 NoiseMode mode = NoiseMode::SwapPairs) {
    if (p_mis < 0.0 || p_mis > 1.0)
        throw std::invalid_argument("perturb_attributes: p_mis must lie in [0, 1]");
    int n = static_cast<int>(features.rows());
    int count = static_cast<int>(p_mis * n);
    if (count < 2) return features;

    std::mt19937_64 rng(seed);
    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    // partial Fisher-Yates: first `count` entries are the selection
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<int> u(i, n - 1);
        std::swap(pool[i], pool[u(rng)]);
    }
    std::vector<int> selected(pool.begin(), pool.begin() + count);
    std::shuffle(selected.begin(), selected.end(), rng);

    Matrix out = features;
    if (mode == NoiseMode::SwapPairs) {
        int pairs = count / 2;
        for (int p = 0; p < pairs; ++p) {
            int a = selected[2 * p], b = selected[2 * p + 1];
            out.row(a) = features.row(b);
            out.row(b) = features.row(a);
        }
    } else {
        // rotate the selected rows by one to guarantee displacement
        for (int t = 0; t < count; ++t)
            out.row(selected[t]) = features.row(selected[(t + 1) % count]);
    }
    return out;
}

}  // namespace ocd
