#pragma once

// Reverse-mode differentiation over dense matrices and edge-indexed
// vectors. A Tape records one forward pass; backward() runs the adjoint
// sweep in reverse node order. Tapes are rebuilt each epoch.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ocd {

using Matrix = Eigen::MatrixXd;

constexpr double kProbClip = 1e-12;  // log/sigmoid clipping bound

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

class Tape {
public:
    struct Node {
        Matrix value;
        Matrix grad;
        std::function<void()> backward;  // accumulates into input grads
        bool requires_grad = false;
    };

    /// Registers a leaf. Parameters pass requires_grad=true; constants false.
    Var leaf(Matrix value, bool requires_grad = false) {
        return push(std::move(value), requires_grad, {});
    }

    const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
    const Matrix& grad(Var v) const { return nodes_.at(v.id).grad; }
    size_t size() const { return nodes_.size(); }

    /// Adjoint sweep from a scalar loss. Gradients of all requires_grad
    /// nodes are available through grad() afterwards.
    void backward(Var loss) {
        Node& top = nodes_.at(loss.id);
        if (top.value.rows() != 1 || top.value.cols() != 1)
            throw std::invalid_argument("backward: loss must be scalar");
        if (!std::isfinite(top.value(0, 0)))
            throw std::runtime_error("backward: loss is not finite");
        for (auto& n : nodes_) n.grad.setZero(n.value.rows(), n.value.cols());
        top.grad(0, 0) = 1.0;
        for (int i = loss.id; i >= 0; --i) {
            Node& n = nodes_[i];
            if (!n.requires_grad || !n.backward) continue;
            if (!n.grad.allFinite())
                throw std::runtime_error("backward: non-finite gradient at node " +
                                         std::to_string(i));
            n.backward();
        }
    }

    // ---- primitives -------------------------------------------------------

    Var matmul(Var a, Var b) {
        const Matrix &A = val(a), &B = val(b);
        require(A.cols() == B.rows(), "matmul: inner dimensions differ");
        Var out = push(A * B, needs(a) || needs(b));
        record(out, [this, a, b, out] {
            const Matrix& g = nodes_[out.id].grad;
            if (needs(a)) nodes_[a.id].grad.noalias() += g * val(b).transpose();
            if (needs(b)) nodes_[b.id].grad.noalias() += val(a).transpose() * g;
        });
        return out;
    }

    /// a + bias, bias a 1 x cols row vector broadcast over rows.
    Var add_bias(Var a, Var bias) {
        const Matrix &A = val(a), &B = val(bias);
        require(B.rows() == 1 && B.cols() == A.cols(), "add_bias: bias must be 1 x cols");
        Var out = push(A.rowwise() + B.row(0), needs(a) || needs(bias));
        record(out, [this, a, bias, out] {
            const Matrix& g = nodes_[out.id].grad;
            if (needs(a)) nodes_[a.id].grad += g;
            if (needs(bias)) nodes_[bias.id].grad += g.colwise().sum();
        });
        return out;
    }

    Var add(Var a, Var b) {
        require(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(),
                "add: shape mismatch");
        Var out = push(val(a) + val(b), needs(a) || needs(b));
        record(out, [this, a, b, out] {
            const Matrix& g = nodes_[out.id].grad;
            if (needs(a)) nodes_[a.id].grad += g;
            if (needs(b)) nodes_[b.id].grad += g;
        });
        return out;
    }

    Var scale(Var a, double c) {
        Var out = push(val(a) * c, needs(a));
        record(out, [this, a, c, out] {
            if (needs(a)) nodes_[a.id].grad += nodes_[out.id].grad * c;
        });
        return out;
    }

    Var mul(Var a, Var b) {
        require(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(),
                "mul: shape mismatch");
        Var out = push(val(a).cwiseProduct(val(b)), needs(a) || needs(b));
        record(out, [this, a, b, out] {
            const Matrix& g = nodes_[out.id].grad;
            if (needs(a)) nodes_[a.id].grad += g.cwiseProduct(val(b));
            if (needs(b)) nodes_[b.id].grad += g.cwiseProduct(val(a));
        });
        return out;
    }

    Var concat_cols(const std::vector<Var>& parts) {
        require(!parts.empty(), "concat_cols: empty input");
        Eigen::Index rows = val(parts[0]).rows(), cols = 0;
        bool rg = false;
        for (Var p : parts) {
            require(val(p).rows() == rows, "concat_cols: row counts differ");
            cols += val(p).cols();
            rg = rg || needs(p);
        }
        Matrix out(rows, cols);
        Eigen::Index off = 0;
        for (Var p : parts) {
            out.middleCols(off, val(p).cols()) = val(p);
            off += val(p).cols();
        }
        Var o = push(std::move(out), rg);
        record(o, [this, parts, o] {
            const Matrix& g = nodes_[o.id].grad;
            Eigen::Index off = 0;
            for (Var p : parts) {
                Eigen::Index w = val(p).cols();
                if (needs(p)) nodes_[p.id].grad += g.middleCols(off, w);
                off += w;
            }
        });
        return o;
    }

    Var gather_rows(Var a, std::vector<int> idx) {
        const Matrix& A = val(a);
        Matrix out(idx.size(), A.cols());
        for (size_t t = 0; t < idx.size(); ++t) {
            require(idx[t] >= 0 && idx[t] < A.rows(), "gather_rows: index out of range");
            out.row(t) = A.row(idx[t]);
        }
        Var o = push(std::move(out), needs(a));
        record(o, [this, a, idx = std::move(idx), o] {
            if (!needs(a)) return;
            const Matrix& g = nodes_[o.id].grad;
            Matrix& ga = nodes_[a.id].grad;
            for (size_t t = 0; t < idx.size(); ++t) ga.row(idx[t]) += g.row(t);
        });
        return o;
    }

    Var leaky_relu(Var a, double slope) {
        const Matrix& A = val(a);
        Var out = push(A.unaryExpr([slope](double x) { return x > 0 ? x : slope * x; }), needs(a));
        record(out, [this, a, slope, out] {
            if (!needs(a)) return;
            const Matrix& g = nodes_[out.id].grad;
            nodes_[a.id].grad +=
                g.cwiseProduct(val(a).unaryExpr([slope](double x) { return x > 0 ? 1.0 : slope; }));
        });
        return out;
    }

    Var elu(Var a) {
        const Matrix& A = val(a);
        Var out = push(A.unaryExpr([](double x) { return x > 0 ? x : std::expm1(x); }), needs(a));
        record(out, [this, a, out] {
            if (!needs(a)) return;
            const Matrix& g = nodes_[out.id].grad;
            nodes_[a.id].grad += g.cwiseProduct(
                val(a).unaryExpr([](double x) { return x > 0 ? 1.0 : std::exp(x); }));
        });
        return out;
    }

    Var sigmoid(Var a) {
        Matrix s = val(a).unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
        Var out = push(std::move(s), needs(a));
        record(out, [this, a, out] {
            if (!needs(a)) return;
            const Matrix &g = nodes_[out.id].grad, &s = nodes_[out.id].value;
            nodes_[a.id].grad += g.cwiseProduct(s.cwiseProduct(Matrix::Ones(s.rows(), s.cols()) - s));
        });
        return out;
    }

    Var row_softmax(Var a) {
        const Matrix& A = val(a);
        Matrix s(A.rows(), A.cols());
        for (Eigen::Index i = 0; i < A.rows(); ++i) {
            Eigen::ArrayXd e = (A.row(i).array() - A.row(i).maxCoeff()).exp();
            s.row(i) = (e / e.sum()).matrix();
        }
        Var out = push(std::move(s), needs(a));
        record(out, [this, a, out] {
            if (!needs(a)) return;
            const Matrix &g = nodes_[out.id].grad, &s = nodes_[out.id].value;
            Matrix& ga = nodes_[a.id].grad;
            for (Eigen::Index i = 0; i < s.rows(); ++i) {
                double dot = g.row(i).dot(s.row(i));
                ga.row(i) += s.row(i).cwiseProduct(g.row(i).array().matrix() -
                                                   Matrix::Constant(1, s.cols(), dot));
            }
        });
        return out;
    }

    /// log with the standard [kProbClip, 1-kProbClip] clamp; intended for
    /// probabilities (the adjoint is zero where the clamp is active).
    Var log_prob(Var a) {
        const Matrix& A = val(a);
        Matrix out = A.unaryExpr([](double x) {
            double c = std::min(std::max(x, kProbClip), 1.0 - kProbClip);
            return std::log(c);
        });
        Var o = push(std::move(out), needs(a));
        record(o, [this, a, o] {
            if (!needs(a)) return;
            const Matrix& g = nodes_[o.id].grad;
            nodes_[a.id].grad += g.cwiseProduct(val(a).unaryExpr([](double x) {
                return (x > kProbClip && x < 1.0 - kProbClip) ? 1.0 / x : 0.0;
            }));
        });
        return o;
    }

    /// Softmax of a column of scores over contiguous segments; segment s
    /// spans rows [offsets[s], offsets[s+1]).
    Var segment_softmax(Var scores, std::vector<int> offsets) {
        const Matrix& S = val(scores);
        require(S.cols() == 1, "segment_softmax: scores must be a column");
        require(!offsets.empty() && offsets.back() == S.rows(),
                "segment_softmax: offsets do not cover the scores");
        Matrix out(S.rows(), 1);
        for (size_t s = 0; s + 1 < offsets.size(); ++s) {
            int lo = offsets[s], hi = offsets[s + 1];
            if (lo == hi) continue;
            Eigen::ArrayXd seg = S.col(0).segment(lo, hi - lo).array();
            Eigen::ArrayXd e = (seg - seg.maxCoeff()).exp();
            out.col(0).segment(lo, hi - lo) = (e / e.sum()).matrix();
        }
        Var o = push(std::move(out), needs(scores));
        record(o, [this, scores, offsets = std::move(offsets), o] {
            if (!needs(scores)) return;
            const Matrix &g = nodes_[o.id].grad, &p = nodes_[o.id].value;
            Matrix& gs = nodes_[scores.id].grad;
            for (size_t s = 0; s + 1 < offsets.size(); ++s) {
                int lo = offsets[s], n = offsets[s + 1] - lo;
                if (n == 0) continue;
                double dot = g.col(0).segment(lo, n).dot(p.col(0).segment(lo, n));
                gs.col(0).segment(lo, n) +=
                    p.col(0).segment(lo, n).cwiseProduct(g.col(0).segment(lo, n).array().matrix() -
                                                         Matrix::Constant(n, 1, dot));
            }
        });
        return o;
    }

    /// Per-segment sums of a column: out[s] = sum of rows [offsets[s], offsets[s+1]).
    Var segment_sum(Var a, std::vector<int> offsets) {
        const Matrix& A = val(a);
        require(!offsets.empty() && offsets.back() == A.rows(),
                "segment_sum: offsets do not cover the input");
        Matrix out(static_cast<Eigen::Index>(offsets.size()) - 1, A.cols());
        for (size_t s = 0; s + 1 < offsets.size(); ++s)
            out.row(s) = A.middleRows(offsets[s], offsets[s + 1] - offsets[s]).colwise().sum();
        Var o = push(std::move(out), needs(a));
        record(o, [this, a, offsets = std::move(offsets), o] {
            if (!needs(a)) return;
            const Matrix& g = nodes_[o.id].grad;
            Matrix& ga = nodes_[a.id].grad;
            for (size_t s = 0; s + 1 < offsets.size(); ++s)
                for (int r = offsets[s]; r < offsets[s + 1]; ++r) ga.row(r) += g.row(s);
        });
        return o;
    }

    /// Attention aggregation: out.row(s) = sum over entries e in segment s of
    /// weights(e) * feats.row(sources[e]). `weights` is an E x 1 column.
    Var segment_weighted_sum(Var weights, Var feats, std::vector<int> sources,
                             std::vector<int> offsets) {
        const Matrix &W = val(weights), &F = val(feats);
        require(W.cols() == 1 && W.rows() == static_cast<Eigen::Index>(sources.size()),
                "segment_weighted_sum: weights must be E x 1");
        require(!offsets.empty() && offsets.back() == W.rows(),
                "segment_weighted_sum: offsets do not cover the entries");
        Matrix out = Matrix::Zero(static_cast<Eigen::Index>(offsets.size()) - 1, F.cols());
        for (size_t s = 0; s + 1 < offsets.size(); ++s)
            for (int e = offsets[s]; e < offsets[s + 1]; ++e)
                out.row(s) += W(e, 0) * F.row(sources[e]);
        Var o = push(std::move(out), needs(weights) || needs(feats));
        record(o, [this, weights, feats, sources = std::move(sources), offsets = std::move(offsets),
                   o] {
            const Matrix& g = nodes_[o.id].grad;
            const Matrix &W = val(weights), &F = val(feats);
            for (size_t s = 0; s + 1 < offsets.size(); ++s)
                for (int e = offsets[s]; e < offsets[s + 1]; ++e) {
                    if (needs(weights))
                        nodes_[weights.id].grad(e, 0) += g.row(s).dot(F.row(sources[e]));
                    if (needs(feats)) nodes_[feats.id].grad.row(sources[e]) += W(e, 0) * g.row(s);
                }
        });
        return o;
    }

    Var sum(Var a) {
        Var out = push(Matrix::Constant(1, 1, val(a).sum()), needs(a));
        record(out, [this, a, out] {
            if (!needs(a)) return;
            nodes_[a.id].grad.array() += nodes_[out.id].grad(0, 0);
        });
        return out;
    }

    Var mean(Var a) {
        double n = static_cast<double>(val(a).size());
        Var out = push(Matrix::Constant(1, 1, val(a).sum() / n), needs(a));
        record(out, [this, a, n, out] {
            if (!needs(a)) return;
            nodes_[a.id].grad.array() += nodes_[out.id].grad(0, 0) / n;
        });
        return out;
    }

    /// Mean binary cross-entropy between sigmoid(Z Z^T) and the adjacency
    /// indicator over all ordered pairs i != j, fused so the N x N matrix is
    /// never taped. `edges` holds each undirected edge once.
    Var adjacency_bce(Var z, const std::vector<std::pair<int, int>>& edges) {
        const Matrix& Z = val(z);
        Eigen::Index n = Z.rows();
        require(n >= 2, "adjacency_bce: need at least 2 nodes");
        Matrix S = Z * Z.transpose();
        Matrix P = S.unaryExpr([](double x) { return 1.0 / (1.0 + std::exp(-x)); });
        // A_ij = 0 baseline, then correct the edge entries
        double pairs = static_cast<double>(n) * (n - 1);
        double loss = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                if (i == j) continue;
                double p = std::min(std::max(P(i, j), kProbClip), 1.0 - kProbClip);
                loss -= std::log(1.0 - p);
            }
        for (auto [i, j] : edges) {
            double p = std::min(std::max(P(i, j), kProbClip), 1.0 - kProbClip);
            loss += 2.0 * (std::log(1.0 - p) - std::log(p));  // both ordered directions
        }
        Var out = push(Matrix::Constant(1, 1, loss / pairs), needs(z));
        record(out, [this, z, edges, P = std::move(P), pairs, out] {
            if (!needs(z)) return;
            double g0 = nodes_[out.id].grad(0, 0);
            // dL/dS_ij = (P_ij - A_ij) / pairs off the diagonal; symmetric,
            // so dL/dZ = 2 G Z.
            Matrix G = P / pairs;
            G.diagonal().setZero();
            for (auto [i, j] : edges) {
                G(i, j) -= 1.0 / pairs;
                G(j, i) -= 1.0 / pairs;
            }
            nodes_[z.id].grad.noalias() += g0 * 2.0 * (G * val(z));
        });
        return out;
    }

    /// Tr(H^T B H) for the modularity matrix B of the given graph, in
    /// factored form: (1/2M) [ 2 sum_{(i,j) in E} H_i . H_j - |d^T H|^2 / 2M ].
    Var modularity_trace(Var h, std::vector<std::pair<int, int>> edges,
                         std::vector<int> degrees, long num_edges) {
        const Matrix& H = val(h);
        require(H.rows() == static_cast<Eigen::Index>(degrees.size()),
                "modularity_trace: row count != node count");
        require(num_edges > 0, "modularity_trace: graph has no edges");
        double two_m = 2.0 * static_cast<double>(num_edges);
        Eigen::RowVectorXd dH = Eigen::RowVectorXd::Zero(H.cols());
        for (size_t i = 0; i < degrees.size(); ++i) dH += degrees[i] * H.row(i);
        double val_ = 0.0;
        for (auto [i, j] : edges) val_ += 2.0 * H.row(i).dot(H.row(j));
        val_ = (val_ - dH.squaredNorm() / two_m) / two_m;
        Var out = push(Matrix::Constant(1, 1, val_), needs(h));
        record(out, [this, h, edges = std::move(edges), degrees = std::move(degrees), two_m, dH,
                     out] {
            if (!needs(h)) return;
            double g0 = nodes_[out.id].grad(0, 0);
            Matrix& gh = nodes_[h.id].grad;
            const Matrix& H = val(h);
            // d/dH Tr(H^T B H) = 2 B H, in the same factored form
            for (auto [i, j] : edges) {
                gh.row(i) += g0 * (2.0 / two_m) * H.row(j);
                gh.row(j) += g0 * (2.0 / two_m) * H.row(i);
            }
            double c = g0 * 2.0 / (two_m * two_m);
            for (Eigen::Index i = 0; i < H.rows(); ++i)
                gh.row(i) -= c * degrees[i] * dH;
        });
        return out;
    }

private:
    std::vector<Node> nodes_;

    const Matrix& val(Var v) const { return nodes_.at(v.id).value; }
    bool needs(Var v) const { return nodes_.at(v.id).requires_grad; }

    static void require(bool cond, const char* msg) {
        if (!cond) throw std::invalid_argument(msg);
    }

    Var push(Matrix value, bool requires_grad, std::function<void()> backward = {}) {
        if (!value.allFinite()) throw std::runtime_error("tape: non-finite forward value");
        Node n;
        n.value = std::move(value);
        n.requires_grad = requires_grad;
        n.backward = std::move(backward);
        nodes_.push_back(std::move(n));
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    void record(Var v, std::function<void()> backward) {
        if (nodes_[v.id].requires_grad) nodes_[v.id].backward = std::move(backward);
    }
};

/// Central-difference gradient check. `build` must reconstruct the loss on a
/// fresh tape from the given parameter matrices every call. Returns the worst
/// relative error over all parameter entries.
inline double grad_check(
    const std::function<Var(Tape&, std::vector<Var>&)>& build_from_leaves,
    std::vector<Matrix> params, double epsilon = 1e-5) {
    auto eval = [&](const std::vector<Matrix>& p) {
        Tape t;
        std::vector<Var> leaves;
        for (const auto& m : p) leaves.push_back(t.leaf(m, true));
        Var loss = build_from_leaves(t, leaves);
        return t.value(loss)(0, 0);
    };

    Tape t;
    std::vector<Var> leaves;
    for (const auto& m : params) leaves.push_back(t.leaf(m, true));
    Var loss = build_from_leaves(t, leaves);
    t.backward(loss);

    double worst = 0.0;
    for (size_t k = 0; k < params.size(); ++k) {
        const Matrix& g = t.grad(leaves[k]);
        for (Eigen::Index i = 0; i < params[k].rows(); ++i)
            for (Eigen::Index j = 0; j < params[k].cols(); ++j) {
                auto p = params;
                p[k](i, j) += epsilon;
                double up = eval(p);
                p[k](i, j) -= 2 * epsilon;
                double down = eval(p);
                double numeric = (up - down) / (2 * epsilon);
                double analytic = g(i, j);
                double scale = std::max({std::abs(numeric), std::abs(analytic), 1.0});
                worst = std::max(worst, std::abs(numeric - analytic) / scale);
            }
    }
    return worst;
}

}  // namespace ocd
