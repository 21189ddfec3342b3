#pragma once

// Two-layer multi-head graph-attention encoder, softmax membership head,
// and inner-product adjacency decoder.

#include "ocd/graph.hpp"
#include "ocd/tape.hpp"

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <random>
#include <string>
#include <vector>

namespace ocd {

struct Dims {
    int input = 0;
    int hidden_per_head = 64;
    int embed_per_head = 16;
    int heads = 8;
    int communities = 0;

    int hidden_total() const { return hidden_per_head * heads; }
    int embed_total() const { return embed_per_head * heads; }

    void check() const {
        if (input <= 0 || hidden_per_head <= 0 || embed_per_head <= 0 || heads <= 0 ||
            communities <= 0)
            throw std::invalid_argument("model dims must be positive");
    }
};

/// All learnable weights. Layer l in {0,1}, head r in [0, heads).
struct ModelParams {
    Dims dims;
    uint64_t seed = 0;
    std::vector<std::vector<Matrix>> weight;  // [2][heads], in_dim x head_dim
    std::vector<std::vector<Matrix>> attn;    // [2][heads], 2*head_dim x 1
    Matrix head_weight;                       // embed_total x k
    Matrix head_bias;                         // 1 x k

    /// Flat view in a fixed order, for the optimizer and gradient checks.
    std::vector<Matrix*> flat() {
        std::vector<Matrix*> out;
        for (int l = 0; l < 2; ++l)
            for (size_t r = 0; r < weight[l].size(); ++r) {
                out.push_back(&weight[l][r]);
                out.push_back(&attn[l][r]);
            }
        out.push_back(&head_weight);
        out.push_back(&head_bias);
        return out;
    }
};

/// Glorot-uniform initialization, deterministic per seed; biases zero.
inline ModelParams init_params(uint64_t seed, const Dims& dims) {
    dims.check();
    ModelParams p;
    p.dims = dims;
    p.seed = seed;
    std::mt19937_64 rng(seed);
    auto glorot = [&rng](int rows, int cols, int fan_in, int fan_out) {
        double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> u(-limit, limit);
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = u(rng);
        return m;
    };
    p.weight.resize(2);
    p.attn.resize(2);
    int in_dim = dims.input;
    for (int l = 0; l < 2; ++l) {
        int out_dim = (l == 0) ? dims.hidden_per_head : dims.embed_per_head;
        for (int r = 0; r < dims.heads; ++r) {
            p.weight[l].push_back(glorot(in_dim, out_dim, in_dim, out_dim));
            p.attn[l].push_back(glorot(2 * out_dim, 1, 2 * out_dim, 1));
        }
        in_dim = out_dim * dims.heads;
    }
    p.head_weight = glorot(dims.embed_total(), dims.communities, dims.embed_total(),
                           dims.communities);
    p.head_bias = Matrix::Zero(1, dims.communities);
    return p;
}

/// Checkpoint format, version 1 (plain text, whitespace separated):
///
///   ocd-checkpoint 1
///   dims <input> <hidden_per_head> <embed_per_head> <heads> <communities>
///   seed <seed>
///   matrix <name> <rows> <cols>
///   <rows*cols values, row-major, full double precision>
///   ... one matrix block per parameter, in ModelParams::flat() order:
///   w0.<head> a0.<head> ... w1.<head> a1.<head> ... head_w head_b
inline void save_checkpoint(const std::string& path, ModelParams& params) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << std::setprecision(17);
    const Dims& d = params.dims;
    out << "ocd-checkpoint 1\n"
        << "dims " << d.input << ' ' << d.hidden_per_head << ' ' << d.embed_per_head << ' '
        << d.heads << ' ' << d.communities << '\n'
        << "seed " << params.seed << '\n';
    std::vector<std::string> names;
    for (int l = 0; l < 2; ++l)
        for (int r = 0; r < d.heads; ++r) {
            names.push_back("w" + std::to_string(l) + "." + std::to_string(r));
            names.push_back("a" + std::to_string(l) + "." + std::to_string(r));
        }
    names.push_back("head_w");
    names.push_back("head_b");
    auto mats = params.flat();
    for (size_t m = 0; m < mats.size(); ++m) {
        const Matrix& mat = *mats[m];
        out << "matrix " << names[m] << ' ' << mat.rows() << ' ' << mat.cols() << '\n';
        for (Eigen::Index i = 0; i < mat.rows(); ++i)
            for (Eigen::Index j = 0; j < mat.cols(); ++j)
                out << mat(i, j) << (j + 1 == mat.cols() ? '\n' : ' ');
    }
    if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

inline ModelParams load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "ocd-checkpoint" || version != 1)
        throw std::runtime_error("not a version-1 checkpoint: " + path);
    std::string key;
    Dims d;
    in >> key >> d.input >> d.hidden_per_head >> d.embed_per_head >> d.heads >> d.communities;
    if (key != "dims") throw std::runtime_error("checkpoint missing dims: " + path);
    d.check();
    ModelParams p;
    p.dims = d;
    in >> key >> p.seed;
    if (key != "seed") throw std::runtime_error("checkpoint missing seed: " + path);
    p.weight.resize(2);
    p.attn.resize(2);
    for (int l = 0; l < 2; ++l) {
        p.weight[l].resize(d.heads);
        p.attn[l].resize(d.heads);
    }
    auto mats = p.flat();
    for (Matrix* mat : mats) {
        std::string name;
        long rows = 0, cols = 0;
        if (!(in >> key >> name >> rows >> cols) || key != "matrix" || rows <= 0 || cols <= 0)
            throw std::runtime_error("truncated or malformed checkpoint: " + path);
        mat->resize(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j)
                if (!(in >> (*mat)(i, j)))
                    throw std::runtime_error("truncated checkpoint matrix " + name + ": " + path);
    }
    // dims must agree with the stored shapes
    if (p.weight[0][0].rows() != d.input || p.head_weight.cols() != d.communities)
        throw std::runtime_error("checkpoint shapes disagree with dims: " + path);
    return p;
}

/// Flat attention-entry layout for a graph: entry t is the directed pair
/// (owner(t) <- source(t)), with entries of node i contiguous in
/// [offsets[i], offsets[i+1]). Self-loop entries are included.
struct AttentionIndex {
    std::vector<int> owners;   // per entry: the node being updated
    std::vector<int> sources;  // per entry: the attended neighbor
    std::vector<int> offsets;  // size N+1
};

inline AttentionIndex build_attention_index(const AttributedGraph& g) {
    AttentionIndex idx;
    idx.offsets.push_back(0);
    for (int i = 0; i < g.num_nodes; ++i) {
        for (int j : g.neighbors[i]) {
            idx.owners.push_back(i);
            idx.sources.push_back(j);
        }
        idx.offsets.push_back(static_cast<int>(idx.owners.size()));
    }
    return idx;
}

struct LayerVars {
    Var output;               // N x (head_dim * heads)
    std::vector<Var> alphas;  // per head, E x 1 attention coefficients
};

/// Differentiable row slice, used to split the attention vector.
inline Var slice_rows(Tape& t, Var a, int start, int count) {
    std::vector<int> idx(count);
    for (int i = 0; i < count; ++i) idx[i] = start + i;
    return t.gather_rows(a, idx);
}

/// One multi-head attention layer on the tape. `activate` applies the
/// exponential-linear unit to the concatenated output.
inline LayerVars attention_layer(Tape& t, Var input, const std::vector<Var>& weights,
                                 const std::vector<Var>& attn_vecs, const AttentionIndex& idx,
                                 bool activate) {
    LayerVars out;
    std::vector<Var> heads;
    for (size_t r = 0; r < weights.size(); ++r) {
        Var wh = t.matmul(input, weights[r]);
        int q = static_cast<int>(t.value(wh).cols());
        // a . [Wh_i || Wh_j] splits into per-node owner/source scores
        Var s_own = t.matmul(wh, slice_rows(t, attn_vecs[r], 0, q));
        Var s_src = t.matmul(wh, slice_rows(t, attn_vecs[r], q, q));
        Var e = t.add(t.gather_rows(s_own, idx.owners), t.gather_rows(s_src, idx.sources));
        Var alpha = t.segment_softmax(t.leaky_relu(e, 0.2), idx.offsets);
        out.alphas.push_back(alpha);
        heads.push_back(t.segment_weighted_sum(alpha, wh, idx.sources, idx.offsets));
    }
    Var cat = t.concat_cols(heads);
    out.output = activate ? t.elu(cat) : cat;
    return out;
}

/// Leaf handles for every parameter, in ModelParams::flat() order.
struct ParamVars {
    std::vector<std::vector<Var>> weight;  // [2][heads]
    std::vector<std::vector<Var>> attn;    // [2][heads]
    Var head_weight, head_bias;
    std::vector<Var> flat;
};

inline ParamVars register_params(Tape& t, const ModelParams& p) {
    ParamVars v;
    v.weight.resize(2);
    v.attn.resize(2);
    for (int l = 0; l < 2; ++l)
        for (size_t r = 0; r < p.weight[l].size(); ++r) {
            v.weight[l].push_back(t.leaf(p.weight[l][r], true));
            v.attn[l].push_back(t.leaf(p.attn[l][r], true));
            v.flat.push_back(v.weight[l].back());
            v.flat.push_back(v.attn[l].back());
        }
    v.head_weight = t.leaf(p.head_weight, true);
    v.head_bias = t.leaf(p.head_bias, true);
    v.flat.push_back(v.head_weight);
    v.flat.push_back(v.head_bias);
    return v;
}

struct EncoderVars {
    Var z;  // N x embed_total
    Var h;  // N x k, row-stochastic
    std::vector<LayerVars> layers;
};

/// Full forward pass on the tape: two attention layers, then the softmax
/// membership head H = row_softmax(Z W + b).
inline EncoderVars encode_on_tape(Tape& t, const ParamVars& pv, Var features,
                                  const AttentionIndex& idx) {
    EncoderVars enc;
    LayerVars l1 = attention_layer(t, features, pv.weight[0], pv.attn[0], idx, true);
    LayerVars l2 = attention_layer(t, l1.output, pv.weight[1], pv.attn[1], idx, false);
    enc.z = l2.output;
    enc.h = t.row_softmax(t.add_bias(t.matmul(enc.z, pv.head_weight), pv.head_bias));
    enc.layers = {std::move(l1), std::move(l2)};
    return enc;
}

struct EncoderOutput {
    Matrix z;
    Matrix h;
    std::vector<std::vector<Vector>> alphas;  // [layer][head], per attention entry
};

/// Inference-only forward pass (fresh tape, values extracted).
inline EncoderOutput encode(const ModelParams& params, const AttributedGraph& graph) {
    if (graph.features.cols() != params.dims.input)
        throw std::invalid_argument("encode: feature width does not match model input dim");
    Tape t;
    auto idx = build_attention_index(graph);
    auto pv = register_params(t, params);
    Var x = t.leaf(graph.features, false);
    auto enc = encode_on_tape(t, pv, x, idx);
    EncoderOutput out;
    out.z = t.value(enc.z);
    out.h = t.value(enc.h);
    for (const auto& layer : enc.layers) {
        std::vector<Vector> per_head;
        for (Var a : layer.alphas) per_head.push_back(t.value(a).col(0));
        out.alphas.push_back(std::move(per_head));
    }
    return out;
}

/// Attention coefficients of one layer/head for given inputs, as an
/// entry-aligned column (layout per build_attention_index).
inline Vector attention_coefficients(const ModelParams& params, const AttributedGraph& graph,
                                     const Matrix& h, int layer, int head) {
    Tape t;
    auto idx = build_attention_index(graph);
    Var hv = t.leaf(h, false);
    Var w = t.leaf(params.weight.at(layer).at(head), false);
    Var a = t.leaf(params.attn.at(layer).at(head), false);
    LayerVars lv = attention_layer(t, hv, {w}, {a}, idx, false);
    return t.value(lv.alphas[0]).col(0);
}

/// Inner-product decoder A_hat = sigmoid(Z Z^T) as a full matrix (small N).
inline Matrix decode_adjacency(const Matrix& z) {
    Matrix s = z * z.transpose();
    return s.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
}

/// Pairwise decoder for large graphs.
inline double decode_pair(const Matrix& z, int i, int j) {
    double s = z.row(i).dot(z.row(j));
    return 1.0 / (1.0 + std::exp(-s));
}

}  // namespace ocd
