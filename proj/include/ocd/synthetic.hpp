#pragma once

// Planted-partition benchmark generator with block-informative binary
// features, used by the tests and the `synth` tooling path.

#include "ocd/graph.hpp"

#include <random>

namespace ocd {

struct PlantedConfig {
    int num_nodes = 40;
    int num_blocks = 2;
    double p_in = 0.5;
    double p_out = 0.02;
    int features_per_block = 4;
    double feature_flip = 0.0;  // probability of flipping each feature bit
    uint64_t seed = 1;
};

/// Equal-size blocks (remainder spread over the first blocks); edge (i, j)
/// appears with p_in inside a block and p_out across blocks. Node features
/// are one block-indicator bar of `features_per_block` ones, optionally
/// flipped bitwise with probability feature_flip.
inline AttributedGraph planted_partition(const PlantedConfig& cfg) {
    if (cfg.num_nodes < 2 || cfg.num_blocks < 1 || cfg.num_blocks > cfg.num_nodes)
        throw std::invalid_argument("planted_partition: bad sizes");
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    AttributedGraph g;
    g.num_nodes = cfg.num_nodes;
    std::vector<int> block(cfg.num_nodes);
    for (int i = 0; i < cfg.num_nodes; ++i) block[i] = i % cfg.num_blocks;

    for (int i = 0; i < cfg.num_nodes; ++i)
        for (int j = i + 1; j < cfg.num_nodes; ++j) {
            double p = block[i] == block[j] ? cfg.p_in : cfg.p_out;
            if (u(rng) < p) g.edges.emplace_back(i, j);
        }
    g.num_edges = static_cast<long>(g.edges.size());

    int m = cfg.features_per_block * cfg.num_blocks;
    g.features = Matrix::Zero(cfg.num_nodes, m);
    for (int i = 0; i < cfg.num_nodes; ++i)
        for (int f = 0; f < m; ++f) {
            bool on = f / cfg.features_per_block == block[i];
            if (cfg.feature_flip > 0 && u(rng) < cfg.feature_flip) on = !on;
            g.features(i, f) = on ? 1.0 : 0.0;
        }

    CommunityCover cover;
    cover.num_nodes = cfg.num_nodes;
    cover.communities.resize(cfg.num_blocks);
    for (int i = 0; i < cfg.num_nodes; ++i) cover.communities[block[i]].push_back(i);
    g.ground_truth = std::move(cover);

    for (int i = 0; i < cfg.num_nodes; ++i) g.original_ids.push_back(i);
    build_neighbor_index(g);
    return g;
}

}  // namespace ocd
