#include "ocd/membership.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <random>

using namespace ocd;

TEST_CASE("threshold rule") {
    Matrix h(3, 3);
    h << 0.9, 0.05, 0.05,  //
        0.4, 0.35, 0.25,   //
        0.2, 0.45, 0.35;
    auto res = assign_communities(h, 0.3);
    // columns: 0 -> {0, 1}, 1 -> {1, 2}, 2 -> {2}
    REQUIRE(res.cover.size() == 3);
    CHECK(res.cover.communities[0] == std::vector<int>{0, 1});
    CHECK(res.cover.communities[1] == std::vector<int>{1, 2});
    CHECK(res.cover.communities[2] == std::vector<int>{2});
}

TEST_CASE("argmax fallback with first-index tie break") {
    Matrix h = Matrix::Constant(1, 5, 0.2);
    auto res = assign_communities(h, 0.3);
    REQUIRE(res.cover.size() == 1);
    CHECK(res.kept_columns == std::vector<int>{0});
    CHECK(res.cover.communities[0] == std::vector<int>{0});
}

TEST_CASE("empty communities are dropped and recorded") {
    Matrix h(2, 3);
    h << 0.8, 0.1, 0.1,  //
        0.7, 0.2, 0.1;
    auto res = assign_communities(h, 0.5);
    REQUIRE(res.cover.size() == 1);
    CHECK(res.kept_columns == std::vector<int>{0});
}

TEST_CASE("every node is covered; lowering zeta only adds assignments") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.01, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 5 + static_cast<int>(rng() % 20), k = 2 + static_cast<int>(rng() % 5);
        Matrix h(n, k);
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < k; ++c) h(i, c) = u(rng);
            h.row(i) /= h.row(i).sum();
        }
        auto high = assign_communities(h, 0.6);
        auto low = assign_communities(h, 0.2);

        std::vector<char> covered(n, 0);
        for (const auto& comm : high.cover.communities)
            for (int v : comm) covered[v] = 1;
        for (int v = 0; v < n; ++v) CHECK(covered[v]);

        // monotonicity over the threshold-made assignments: every (node,
        // column) present at high zeta by threshold is present at low zeta
        for (size_t c = 0; c < high.kept_columns.size(); ++c) {
            int col = high.kept_columns[c];
            for (int v : high.cover.communities[c]) {
                if (h(v, col) < 0.6) continue;  // fallback assignment
                auto it = std::find(low.kept_columns.begin(), low.kept_columns.end(), col);
                REQUIRE(it != low.kept_columns.end());
                const auto& lc = low.cover.communities[it - low.kept_columns.begin()];
                CHECK(std::binary_search(lc.begin(), lc.end(), v));
            }
        }

        // with zeta <= min row-max the fallback never fires: each node's
        // argmax column clears the threshold
        double min_row_max = 1.0;
        for (int i = 0; i < n; ++i) min_row_max = std::min(min_row_max, h.row(i).maxCoeff());
        auto res = assign_communities(h, min_row_max);
        int total = 0;
        for (const auto& comm : res.cover.communities) total += static_cast<int>(comm.size());
        int above = 0;
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < k; ++c)
                if (h(i, c) >= min_row_max) ++above;
        CHECK(total == above);
    }
}

TEST_CASE("zeta must be positive") {
    CHECK_THROWS(assign_communities(Matrix::Constant(1, 2, 0.5), 0.0));
}
