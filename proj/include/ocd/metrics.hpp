#pragma once

// Agreement metrics between overlapping covers: ONMI (lack-of-information
// formulation with best matching) and symmetric average best-match F1.

#include "ocd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <vector>

namespace ocd {

enum class OnmiVariant { Max, Sum };

namespace detail {

inline double h_count(double w, double n) { return w > 0 ? -w * std::log(w / n) : 0.0; }

/// Entropy of one community viewed as a binary membership variable.
inline double comm_entropy(double size, double n) {
    return h_count(size, n) + h_count(n - size, n);
}

/// H(Xk | Yl) under the standard constraint: if the constraint fails the
/// pair carries no information and H(Xk) is used instead.
inline double cond_entropy_pair(const std::vector<char>& x, const std::vector<char>& y, int n) {
    double a = 0, b = 0, c = 0, d = 0;  // neither / only-y / only-x / both
    for (int i = 0; i < n; ++i) {
        if (x[i] && y[i])
            d++;
        else if (x[i])
            c++;
        else if (y[i])
            b++;
        else
            a++;
    }
    double hx = comm_entropy(c + d, n);
    if (h_count(a, n) + h_count(d, n) < h_count(b, n) + h_count(c, n)) return hx;
    double joint = h_count(a, n) + h_count(b, n) + h_count(c, n) + h_count(d, n);
    double hy = comm_entropy(b + d, n);
    return joint - hy;
}

inline std::vector<std::vector<char>> indicator(const CommunityCover& cover) {
    std::vector<std::vector<char>> out;
    for (const auto& comm : cover.communities) {
        std::vector<char> row(cover.num_nodes, 0);
        for (int v : comm) row[v] = 1;
        out.push_back(std::move(row));
    }
    return out;
}

/// Normalized H(X|Y): mean over communities of best-match conditional
/// entropy divided by the community's own entropy (0/0 treated as 0).
inline double cond_entropy_norm(const std::vector<std::vector<char>>& x,
                                const std::vector<std::vector<char>>& y, int n) {
    double total = 0.0;
    for (const auto& xk : x) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& yl : y) best = std::min(best, cond_entropy_pair(xk, yl, n));
        double hx = 0;
        double size = 0;
        for (char v : xk) size += v;
        hx = comm_entropy(size, n);
        total += hx > 0 ? best / hx : 0.0;
    }
    return total / static_cast<double>(x.size());
}

inline double cover_entropy(const std::vector<std::vector<char>>& x, int n) {
    double total = 0.0;
    for (const auto& xk : x) {
        double size = 0;
        for (char v : xk) size += v;
        total += comm_entropy(size, n);
    }
    return total;
}

inline double cond_entropy_total(const std::vector<std::vector<char>>& x,
                                 const std::vector<std::vector<char>>& y, int n) {
    double total = 0.0;
    for (const auto& xk : x) {
        double best = std::numeric_limits<double>::infinity();
        for (const auto& yl : y) best = std::min(best, cond_entropy_pair(xk, yl, n));
        total += best;
    }
    return total;
}

}  // namespace detail

/// Overlapping NMI between two covers over the same node universe.
/// Max variant: I(X:Y) / max(H(X), H(Y)) with per-community best matching.
/// Sum variant: 1 - (H(X|Y)_norm + H(Y|X)_norm) / 2.
inline double onmi(const CommunityCover& pred, const CommunityCover& truth,
                   OnmiVariant variant = OnmiVariant::Max) {
    if (pred.num_nodes != truth.num_nodes)
        throw std::invalid_argument("onmi: covers address different node universes");
    if (pred.communities.empty() || truth.communities.empty()) {
        std::cerr << "onmi: empty cover, returning 0\n";
        return 0.0;
    }
    int n = pred.num_nodes;
    auto x = detail::indicator(pred);
    auto y = detail::indicator(truth);
    if (variant == OnmiVariant::Sum) {
        double v = 1.0 - 0.5 * (detail::cond_entropy_norm(x, y, n) +
                                detail::cond_entropy_norm(y, x, n));
        return std::clamp(v, 0.0, 1.0);
    }
    double hx = detail::cover_entropy(x, n);
    double hy = detail::cover_entropy(y, n);
    double ixy = 0.5 * ((hx - detail::cond_entropy_total(x, y, n)) +
                        (hy - detail::cond_entropy_total(y, x, n)));
    double denom = std::max(hx, hy);
    if (denom <= 0) return x.size() == y.size() ? 1.0 : 0.0;  // both covers trivial
    return std::clamp(ixy / denom, 0.0, 1.0);
}

namespace detail {

inline double set_f1(const std::vector<int>& a, const std::vector<int>& b) {
    // both sorted
    size_t inter = 0;
    auto ia = a.begin();
    for (int v : b) {
        ia = std::lower_bound(ia, a.end(), v);
        if (ia != a.end() && *ia == v) {
            ++inter;
            ++ia;
        }
    }
    if (inter == 0) return 0.0;
    double p = static_cast<double>(inter) / b.size();
    double r = static_cast<double>(inter) / a.size();
    return 2.0 * p * r / (p + r);
}

inline double best_match_mean(const CommunityCover& from, const CommunityCover& to) {
    double total = 0.0;
    for (const auto& c : from.communities) {
        double best = 0.0;
        for (const auto& d : to.communities) best = std::max(best, set_f1(c, d));
        total += best;
    }
    return total / static_cast<double>(from.communities.size());
}

}  // namespace detail

/// Symmetric average best-match F1 between two covers.
inline double overlapping_f1(const CommunityCover& pred, const CommunityCover& truth) {
    if (pred.num_nodes != truth.num_nodes)
        throw std::invalid_argument("overlapping_f1: covers address different node universes");
    if (pred.communities.empty() || truth.communities.empty()) return 0.0;
    return 0.5 * (detail::best_match_mean(pred, truth) + detail::best_match_mean(truth, pred));
}

}  // namespace ocd
