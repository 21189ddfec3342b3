#include "ocd/tape.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace ocd;
using Catch::Matchers::WithinAbs;

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng, double scale = 1.0) {
    std::uniform_real_distribution<double> u(-scale, scale);
    Matrix m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = u(rng);
    return m;
}

}  // namespace

TEST_CASE("scalar forward values") {
    Tape t;
    Var x = t.leaf(Matrix::Zero(1, 1), true);
    CHECK_THAT(t.value(t.sigmoid(x))(0, 0), WithinAbs(0.5, 1e-15));

    Var logits = t.leaf(Matrix::Constant(1, 4, 3.0), true);
    Matrix sm = t.value(t.row_softmax(logits));
    for (int j = 0; j < 4; ++j) CHECK_THAT(sm(0, j), WithinAbs(0.25, 1e-15));

    Var neg = t.leaf(Matrix::Constant(1, 1, -1.0), true);
    CHECK_THAT(t.value(t.leaky_relu(neg, 0.2))(0, 0), WithinAbs(-0.2, 1e-15));
}

TEST_CASE("backward basics") {
    SECTION("sum of entries gives all-ones gradient") {
        Tape t;
        Var p = t.leaf(Matrix::Random(3, 2), true);
        t.backward(t.sum(p));
        CHECK(t.grad(p).isApprox(Matrix::Ones(3, 2)));
    }
    SECTION("zero-scaled loss gives zero gradient") {
        Tape t;
        Var p = t.leaf(Matrix::Random(2, 2), true);
        t.backward(t.scale(t.sum(p), 0.0));
        CHECK(t.grad(p).isZero());
    }
    SECTION("sigmoid at zero has slope 1/4") {
        Tape t;
        Var w = t.leaf(Matrix::Zero(1, 1), true);
        t.backward(t.sigmoid(w));
        CHECK_THAT(t.grad(w)(0, 0), WithinAbs(0.25, 1e-12));
    }
    SECTION("non-scalar loss is rejected") {
        Tape t;
        Var p = t.leaf(Matrix::Random(2, 2), true);
        CHECK_THROWS(t.backward(p));
    }
}

TEST_CASE("grad_check validates each primitive", "[gradcheck]") {
    std::mt19937_64 rng(42);
    constexpr double kTol = 1e-6;

    SECTION("matmul + add_bias") {
        auto err = grad_check(
            [](Tape& t, std::vector<Var>& p) {
                return t.sum(t.add_bias(t.matmul(p[0], p[1]), p[2]));
            },
            {random_matrix(4, 3, rng), random_matrix(3, 5, rng), random_matrix(1, 5, rng)});
        CHECK(err < kTol);
    }
    SECTION("elementwise mul and scale") {
        auto err = grad_check(
            [](Tape& t, std::vector<Var>& p) { return t.sum(t.scale(t.mul(p[0], p[1]), 1.7)); },
            {random_matrix(3, 3, rng), random_matrix(3, 3, rng)});
        CHECK(err < kTol);
    }
    SECTION("concat and gather") {
        Matrix c = random_matrix(4, 4, rng);
        auto err = grad_check(
            [&c](Tape& t, std::vector<Var>& p) {
                Var cat = t.concat_cols({p[0], p[1]});
                return t.sum(t.mul(t.gather_rows(cat, {2, 0, 1, 2}), t.leaf(c, false)));
            },
            {random_matrix(3, 2, rng), random_matrix(3, 2, rng)});
        CHECK(err < kTol);
    }
    SECTION("activations") {
        Matrix x = random_matrix(4, 4, rng, 2.0);
        Matrix c = random_matrix(4, 4, rng);
        for (auto f : {0, 1, 2}) {
            auto err = grad_check(
                [f, &c](Tape& t, std::vector<Var>& p) {
                    Var a = f == 0   ? t.leaky_relu(p[0], 0.2)
                            : f == 1 ? t.elu(p[0])
                                     : t.sigmoid(p[0]);
                    return t.sum(t.mul(a, t.leaf(c, false)));
                },
                {x});
            CHECK(err < kTol);
        }
    }
    SECTION("row softmax and clamped log") {
        Matrix c = random_matrix(4, 3, rng);
        auto err = grad_check(
            [&c](Tape& t, std::vector<Var>& p) {
                Var h = t.row_softmax(p[0]);
                return t.sum(t.mul(t.log_prob(h), t.leaf(c, false)));
            },
            {random_matrix(4, 3, rng)});
        CHECK(err < 1e-4);  // composition through softmax
    }
    SECTION("segment softmax / sum / weighted sum") {
        std::vector<int> offsets = {0, 3, 5, 9};
        std::vector<int> sources = {0, 1, 2, 1, 2, 0, 1, 2, 3};
        Matrix c = random_matrix(3, 2, rng);
        auto err = grad_check(
            [&](Tape& t, std::vector<Var>& p) {
                Var alpha = t.segment_softmax(p[0], offsets);
                Var agg = t.segment_weighted_sum(alpha, p[1], sources, offsets);
                Var sums = t.segment_sum(p[0], offsets);
                return t.add(t.sum(t.mul(agg, t.leaf(c, false))), t.mean(sums));
            },
            {random_matrix(9, 1, rng), random_matrix(4, 2, rng)});
        CHECK(err < 1e-4);
    }
    SECTION("adjacency bce") {
        std::vector<std::pair<int, int>> edges = {{0, 1}, {1, 2}, {2, 3}, {0, 3}};
        auto err = grad_check(
            [&](Tape& t, std::vector<Var>& p) { return t.adjacency_bce(p[0], edges); },
            {random_matrix(4, 3, rng)});
        CHECK(err < kTol);
    }
    SECTION("modularity trace") {
        std::vector<std::pair<int, int>> edges = {{0, 1}, {1, 2}, {2, 3}, {0, 3}, {1, 3}};
        std::vector<int> degrees = {2, 3, 2, 3};
        auto err = grad_check(
            [&](Tape& t, std::vector<Var>& p) {
                return t.modularity_trace(t.row_softmax(p[0]), edges, degrees, 5);
            },
            {random_matrix(4, 3, rng)});
        CHECK(err < 1e-4);
    }
}

TEST_CASE("quadratic loss matches finite differences tightly") {
    std::mt19937_64 rng(3);
    auto err = grad_check(
        [](Tape& t, std::vector<Var>& p) { return t.sum(t.mul(p[0], p[0])); },
        {random_matrix(3, 3, rng)});
    CHECK(err < 1e-8);
}

TEST_CASE("constant loss has zero gradient both ways") {
    Tape t;
    Var p = t.leaf(Matrix::Random(2, 3), true);
    Var c = t.leaf(Matrix::Constant(1, 1, 5.0), false);
    Var loss = t.add(c, t.scale(t.sum(p), 0.0));
    t.backward(loss);
    CHECK(t.grad(p).isZero());
}

TEST_CASE("linearity of backward") {
    std::mt19937_64 rng(11);
    Matrix p0 = random_matrix(3, 3, rng);
    double a = 2.5, b = -1.25;

    auto grad_of = [&](auto builder) {
        Tape t;
        Var p = t.leaf(p0, true);
        t.backward(builder(t, p));
        return Matrix(t.grad(p));
    };
    Matrix gf = grad_of([](Tape& t, Var p) { return t.sum(t.sigmoid(p)); });
    Matrix gg = grad_of([](Tape& t, Var p) { return t.mean(t.mul(p, p)); });
    Matrix combined = grad_of([&](Tape& t, Var p) {
        return t.add(t.scale(t.sum(t.sigmoid(p)), a), t.scale(t.mean(t.mul(p, p)), b));
    });
    CHECK((combined - (a * gf + b * gg)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("identical tape and inputs give bit-identical gradients") {
    std::mt19937_64 rng(5);
    Matrix p0 = random_matrix(4, 4, rng);
    auto run = [&] {
        Tape t;
        Var p = t.leaf(p0, true);
        t.backward(t.mean(t.sigmoid(t.matmul(p, p))));
        return Matrix(t.grad(p));
    };
    Matrix g1 = run(), g2 = run();
    CHECK(memcmp(g1.data(), g2.data(), sizeof(double) * 16) == 0);
}

TEST_CASE("non-finite forward values are rejected") {
    Tape t;
    Matrix bad(1, 1);
    bad << std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(t.leaf(bad));
}
