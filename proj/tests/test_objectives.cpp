#include "ocd/objectives.hpp"

#include "ocd/model.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace ocd;
using Catch::Matchers::WithinAbs;

namespace {

AttributedGraph make_graph(int n, std::vector<std::pair<int, int>> edges) {
    AttributedGraph g;
    g.num_nodes = n;
    g.edges = std::move(edges);
    g.num_edges = static_cast<long>(g.edges.size());
    g.features = Matrix::Ones(n, 1);
    build_neighbor_index(g);
    return g;
}

// two triangles joined by one edge (2-3)
AttributedGraph two_triangles() {
    return make_graph(6, {{0, 1}, {0, 2}, {1, 2}, {3, 4}, {3, 5}, {4, 5}, {2, 3}});
}

AttributedGraph random_graph(int n, std::mt19937_64& rng) {
    std::vector<std::pair<int, int>> edges;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            if (rng() % 3 == 0) edges.emplace_back(i, j);
    if (edges.empty()) edges.emplace_back(0, 1);
    return make_graph(n, std::move(edges));
}

Matrix random_row_stochastic(int n, int k, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.01, 1.0);
    Matrix h(n, k);
    for (int i = 0; i < n; ++i) {
        double s = 0;
        for (int c = 0; c < k; ++c) {
            h(i, c) = u(rng);
            s += h(i, c);
        }
        h.row(i) /= s;
    }
    return h;
}

// brute-force oracle: (1/2M) sum_ij (A_ij - d_i d_j / 2M) (H_i . H_j)
double modularity_brute_force(const AttributedGraph& g, const Matrix& h) {
    double two_m = 2.0 * static_cast<double>(g.num_edges);
    double total = 0.0;
    for (int i = 0; i < g.num_nodes; ++i)
        for (int j = 0; j < g.num_nodes; ++j) {
            double a = g.has_edge(i, j) ? 1.0 : 0.0;
            total += (a - g.degrees[i] * g.degrees[j] / two_m) * h.row(i).dot(h.row(j));
        }
    return total / two_m;
}

// classic partition modularity sum_c [e_c / M - (sum_d_c / 2M)^2]
double partition_modularity(const AttributedGraph& g, const std::vector<int>& label, int k) {
    double m = static_cast<double>(g.num_edges);
    std::vector<double> e_c(k, 0), d_c(k, 0);
    for (auto [i, j] : g.edges)
        if (label[i] == label[j]) e_c[label[i]] += 1;
    for (int i = 0; i < g.num_nodes; ++i) d_c[label[i]] += g.degrees[i];
    double q = 0;
    for (int c = 0; c < k; ++c) q += e_c[c] / m - std::pow(d_c[c] / (2 * m), 2.0);
    return q;
}

double scalar(Tape& t, Var v) { return t.value(v)(0, 0); }

}  // namespace

TEST_CASE("modularity operator invariants") {
    std::mt19937_64 rng(17);
    auto g = random_graph(12, rng);
    ModularityOperator op(g);

    SECTION("row sums are zero: B 1 = 0") {
        Matrix ones = Matrix::Ones(g.num_nodes, 1);
        CHECK(op.apply(ones).cwiseAbs().maxCoeff() < 1e-12);
    }
    SECTION("symmetry: u^T (B v) = v^T (B u)") {
        std::uniform_real_distribution<double> u(-1, 1);
        for (int trial = 0; trial < 5; ++trial) {
            Matrix a(g.num_nodes, 1), b(g.num_nodes, 1);
            for (int i = 0; i < g.num_nodes; ++i) {
                a(i, 0) = u(rng);
                b(i, 0) = u(rng);
            }
            double lhs = (a.transpose() * op.apply(b))(0, 0);
            double rhs = (b.transpose() * op.apply(a))(0, 0);
            CHECK_THAT(lhs, WithinAbs(rhs, 1e-12));
        }
    }
}

TEST_CASE("factored modularity equals the brute-force double sum") {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 4 + static_cast<int>(rng() % 17);  // N <= 20
        auto g = random_graph(n, rng);
        Matrix h = random_row_stochastic(n, 2 + static_cast<int>(rng() % 4), rng);
        ModularityOperator op(g);
        CHECK_THAT(op.trace_quadratic(h), WithinAbs(modularity_brute_force(g, h), 1e-10));
        // and tr(H^T (B H)) through the operator action agrees too
        CHECK_THAT((h.transpose() * op.apply(h)).trace(),
                   WithinAbs(op.trace_quadratic(h), 1e-10));
    }
}

TEST_CASE("modularity on the two-triangle graph") {
    auto g = two_triangles();
    Matrix h = Matrix::Zero(6, 2);
    for (int i = 0; i < 6; ++i) h(i, i / 3) = 1.0;
    ModularityOperator op(g);
    CHECK_THAT(op.trace_quadratic(h), WithinAbs(0.357143, 1e-6));

    SECTION("one community gives zero") {
        Matrix one = Matrix::Ones(6, 1);
        CHECK_THAT(op.trace_quadratic(one), WithinAbs(0.0, 1e-12));
    }
    SECTION("uniform membership gives zero") {
        Matrix uniform = Matrix::Constant(6, 4, 0.25);
        CHECK_THAT(op.trace_quadratic(uniform), WithinAbs(0.0, 1e-12));
    }
    SECTION("tape op agrees with the operator") {
        Tape t;
        Var hv = t.leaf(h, true);
        CHECK_THAT(scalar(t, modularity_loss(t, hv, g)), WithinAbs(0.357143, 1e-6));
    }
}

TEST_CASE("one-hot modularity matches classic partition modularity") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 5 + static_cast<int>(rng() % 14);
        auto g = random_graph(n, rng);
        int k = 2 + static_cast<int>(rng() % 3);
        std::vector<int> label(n);
        for (int i = 0; i < n; ++i) label[i] = static_cast<int>(rng() % k);
        Matrix h = Matrix::Zero(n, k);
        for (int i = 0; i < n; ++i) h(i, label[i]) = 1.0;
        ModularityOperator op(g);
        double q = op.trace_quadratic(h);
        CHECK_THAT(q, WithinAbs(partition_modularity(g, label, k), 1e-12));
        CHECK(q >= -0.5);
        CHECK(q < 1.0);
    }
}

TEST_CASE("reconstruction loss values") {
    auto g = make_graph(2, {{0, 1}});

    SECTION("0.5 everywhere gives ln 2") {
        Matrix a_hat = Matrix::Constant(2, 2, 0.5);
        CHECK_THAT(reconstruction_loss_value(g, a_hat), WithinAbs(std::log(2.0), 1e-12));
    }
    SECTION("perfect reconstruction at clipped extremes") {
        Matrix a_hat(2, 2);
        a_hat << 1.0, 1.0, 1.0, 1.0;  // the only ordered pairs are the (0,1) edge
        CHECK(reconstruction_loss_value(g, a_hat) <= 1e-10);
    }
    SECTION("single edge at 0.9") {
        Matrix a_hat = Matrix::Constant(2, 2, 0.9);
        CHECK_THAT(reconstruction_loss_value(g, a_hat), WithinAbs(-std::log(0.9), 1e-12));
    }
    SECTION("tape op agrees with the dense evaluation") {
        std::mt19937_64 rng(5);
        std::uniform_real_distribution<double> u(-1, 1);
        auto g4 = make_graph(4, {{0, 1}, {1, 2}, {2, 3}});
        Matrix z(4, 3);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 3; ++j) z(i, j) = u(rng);
        Tape t;
        Var zv = t.leaf(z, true);
        double taped = scalar(t, reconstruction_loss(t, zv, g4));
        CHECK_THAT(taped, WithinAbs(reconstruction_loss_value(g4, decode_adjacency(z)), 1e-12));
    }
}

TEST_CASE("supervision loss") {
    SECTION("uniform membership over k=4 gives ln 4 per single-label node") {
        Tape t;
        Var h = t.leaf(Matrix::Constant(3, 4, 0.25), true);
        PriorLabels prior;
        prior.num_communities = 4;
        prior.entries = {{0, 1}, {2, 3}};
        CHECK_THAT(scalar(t, supervision_loss(t, h, prior)), WithinAbs(std::log(4.0), 1e-12));
    }
    SECTION("a node labeled in two communities contributes twice") {
        Tape t;
        Var h = t.leaf(Matrix::Constant(1, 4, 0.25), true);
        PriorLabels prior;
        prior.num_communities = 4;
        prior.entries = {{0, 0}, {0, 2}};
        CHECK_THAT(scalar(t, supervision_loss(t, h, prior)),
                   WithinAbs(2.0 * std::log(4.0), 1e-12));
    }
    SECTION("confident correct prediction gives ~0") {
        Tape t;
        Matrix h(2, 2);
        h << 1.0 - 1e-13, 1e-13, 1e-13, 1.0 - 1e-13;
        Var hv = t.leaf(h, true);
        PriorLabels prior;
        prior.num_communities = 2;
        prior.entries = {{0, 0}, {1, 1}};
        CHECK(scalar(t, supervision_loss(t, hv, prior)) <= 1e-10);
    }
    SECTION("empty prior is an error") {
        Tape t;
        Var h = t.leaf(Matrix::Constant(2, 2, 0.5), true);
        CHECK_THROWS(supervision_loss(t, h, PriorLabels{}));
    }
}

TEST_CASE("total loss combination") {
    Tape t;
    Var l_r = t.leaf(Matrix::Constant(1, 1, 1.0), true);
    Var l_s = t.leaf(Matrix::Constant(1, 1, 2.0), true);
    Var l_c = t.leaf(Matrix::Constant(1, 1, 3.0), true);

    CHECK_THAT(scalar(t, total_loss(t, l_r, l_s, l_c, 0.5, 1e-6)), WithinAbs(1.999997, 1e-9));
    CHECK_THAT(scalar(t, total_loss(t, l_r, l_s, l_c, 0.5, 0.0)), WithinAbs(2.0, 1e-12));
    CHECK_THAT(scalar(t, total_loss(t, l_r, l_s, l_c, 0.0, 0.0)), WithinAbs(1.0, 1e-12));

    SECTION("gradients flow to all three terms") {
        Tape t2;
        Var a = t2.leaf(Matrix::Constant(1, 1, 1.0), true);
        Var b = t2.leaf(Matrix::Constant(1, 1, 2.0), true);
        Var c = t2.leaf(Matrix::Constant(1, 1, 3.0), true);
        t2.backward(total_loss(t2, a, b, c, 0.5, 0.25));
        CHECK_THAT(t2.grad(a)(0, 0), WithinAbs(1.0, 1e-15));
        CHECK_THAT(t2.grad(b)(0, 0), WithinAbs(0.5, 1e-15));
        CHECK_THAT(t2.grad(c)(0, 0), WithinAbs(-0.25, 1e-15));
    }
}

TEST_CASE("losses pass grad_check through the model head", "[gradcheck]") {
    std::mt19937_64 rng(77);
    auto g = two_triangles();
    PriorLabels prior;
    prior.num_communities = 2;
    prior.entries = {{0, 0}, {4, 1}};
    std::uniform_real_distribution<double> u(-1, 1);
    Matrix logits(6, 2);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 2; ++j) logits(i, j) = u(rng);

    auto err = grad_check(
        [&](Tape& t, std::vector<Var>& p) {
            Var h = t.row_softmax(p[0]);
            Var l_c = modularity_loss(t, h, g);
            Var l_s = supervision_loss(t, h, prior);
            Var l_r = reconstruction_loss(t, p[1], g);
            return total_loss(t, l_r, l_s, l_c, 0.5, 0.3);
        },
        {logits, Matrix::Identity(6, 3)});
    CHECK(err < 1e-4);
}
