#pragma once

// The three loss terms and their affine combination:
// L = L_r + alpha * L_s - beta * L_c.

#include "ocd/graph.hpp"
#include "ocd/tape.hpp"

#include <vector>

namespace ocd {

/// Matrix-free view of the modularity matrix
/// B_ij = (1/2M) (A_ij - d_i d_j / 2M).
class ModularityOperator {
public:
    explicit ModularityOperator(const AttributedGraph& g)
        : edges_(&g.edges), degrees_(&g.degrees), num_edges_(g.num_edges) {
        if (num_edges_ <= 0)
            throw std::invalid_argument("ModularityOperator: graph has no edges");
    }

    /// v -> B v without materializing B. Accepts any N x c matrix.
    Matrix apply(const Matrix& v) const {
        double two_m = 2.0 * static_cast<double>(num_edges_);
        Matrix out = Matrix::Zero(v.rows(), v.cols());
        for (auto [i, j] : *edges_) {
            out.row(i) += v.row(j);
            out.row(j) += v.row(i);
        }
        Eigen::RowVectorXd dv = Eigen::RowVectorXd::Zero(v.cols());
        for (size_t i = 0; i < degrees_->size(); ++i) dv += (*degrees_)[i] * v.row(i);
        for (Eigen::Index i = 0; i < v.rows(); ++i)
            out.row(i) -= ((*degrees_)[i] / two_m) * dv;
        return out / two_m;
    }

    /// Tr(H^T B H) in factored form, O(M + Nk).
    double trace_quadratic(const Matrix& h) const {
        double two_m = 2.0 * static_cast<double>(num_edges_);
        double acc = 0.0;
        for (auto [i, j] : *edges_) acc += 2.0 * h.row(i).dot(h.row(j));
        Eigen::RowVectorXd dh = Eigen::RowVectorXd::Zero(h.cols());
        for (size_t i = 0; i < degrees_->size(); ++i) dh += (*degrees_)[i] * h.row(i);
        return (acc - dh.squaredNorm() / two_m) / two_m;
    }

    const std::vector<std::pair<int, int>>& edges() const { return *edges_; }
    const std::vector<int>& degrees() const { return *degrees_; }
    long num_edges() const { return num_edges_; }

private:
    const std::vector<std::pair<int, int>>* edges_;
    const std::vector<int>* degrees_;
    long num_edges_;
};

/// Mean BCE between the decoded adjacency and A over ordered pairs i != j.
inline Var reconstruction_loss(Tape& t, Var z, const AttributedGraph& g) {
    return t.adjacency_bce(z, g.edges);
}

/// Relaxed modularity Tr(H^T B H) on the tape (maximized via -beta in the total).
inline Var modularity_loss(Tape& t, Var h, const AttributedGraph& g) {
    return t.modularity_trace(h, g.edges, g.degrees, g.num_edges);
}

/// Literal reading of the trace form on the embedding Z instead of H,
/// kept selectable for comparison runs.
enum class ModularityForm { Membership, Embedding };

/// Cross-entropy over the labeled set: -(1/|T|) sum_{i in T} sum_c y_ic log H_ic.
/// A node labeled in several communities contributes one term per community.
inline Var supervision_loss(Tape& t, Var h, const PriorLabels& prior) {
    if (prior.empty())
        throw std::invalid_argument("supervision_loss: prior labels are empty");
    const Matrix& H = t.value(h);
    std::vector<int> nodes;
    Matrix mask = Matrix::Zero(prior.entries.size(), H.cols());
    std::set<int> labeled;
    for (size_t e = 0; e < prior.entries.size(); ++e) {
        auto [node, comm] = prior.entries[e];
        if (comm < 0 || comm >= H.cols())
            throw std::invalid_argument("supervision_loss: community index out of range");
        nodes.push_back(node);
        mask(e, comm) = 1.0;
        labeled.insert(node);
    }
    double inv_t = 1.0 / static_cast<double>(labeled.size());
    Var rows = t.gather_rows(h, nodes);
    Var picked = t.mul(t.log_prob(rows), t.leaf(mask, false));
    return t.scale(t.sum(picked), -inv_t);
}

/// L = l_r + alpha * l_s - beta * l_c.
inline Var total_loss(Tape& t, Var l_r, Var l_s, Var l_c, double alpha, double beta) {
    Var out = t.add(l_r, t.scale(l_s, alpha));
    return t.add(out, t.scale(l_c, -beta));
}

/// Unsupervised variant (the alpha term is skipped entirely).
inline Var total_loss_unsupervised(Tape& t, Var l_r, Var l_c, double beta) {
    return t.add(l_r, t.scale(l_c, -beta));
}

/// Plain (non-tape) reconstruction loss, for evaluation and small oracles.
inline double reconstruction_loss_value(const AttributedGraph& g, const Matrix& a_hat) {
    Eigen::Index n = a_hat.rows();
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            double p = std::min(std::max(a_hat(i, j), kProbClip), 1.0 - kProbClip);
            double a = g.has_edge(static_cast<int>(i), static_cast<int>(j)) ? 1.0 : 0.0;
            loss -= a * std::log(p) + (1.0 - a) * std::log(1.0 - p);
        }
    return loss / (static_cast<double>(n) * (n - 1));
}

}  // namespace ocd
