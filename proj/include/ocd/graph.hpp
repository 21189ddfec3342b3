#pragma once

// Attributed-graph container, loaders for the text formats, and the
// density-derived membership threshold.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ocd {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Overlapping community cover: a list of node sets that may share members.
struct CommunityCover {
    std::vector<std::vector<int>> communities;  // each sorted, no duplicates
    int num_nodes = 0;

    int size() const { return static_cast<int>(communities.size()); }
};

/// Sparse view of the 0/1 prior matrix: one entry per known (node, community).
struct PriorLabels {
    std::vector<std::pair<int, int>> entries;  // (node, community)
    int num_communities = 0;

    bool empty() const { return entries.empty(); }
    /// Number of distinct labeled nodes.
    int labeled_count() const {
        std::set<int> s;
        for (auto& e : entries) s.insert(e.first);
        return static_cast<int>(s.size());
    }
};

/// Undirected attributed graph, immutable after construction.
///
/// `edges` stores each undirected edge once with i < j and no self-loops.
/// `neighbors[i]` is the sorted adjacency list of i *plus* i itself; the
/// self-loop entry exists only for attention aggregation and is excluded
/// from `degrees`, `num_edges`, and the modularity null model.
struct AttributedGraph {
    int num_nodes = 0;
    long num_edges = 0;
    std::vector<std::pair<int, int>> edges;
    std::vector<std::vector<int>> neighbors;
    Matrix features;  // N x m
    std::vector<int> degrees;
    std::optional<CommunityCover> ground_truth;
    std::vector<long> original_ids;  // remapped index -> input-file id

    bool has_edge(int i, int j) const {
        if (i == j) return false;
        const auto& nb = neighbors[i];
        return std::binary_search(nb.begin(), nb.end(), j);
    }
};

inline void build_neighbor_index(AttributedGraph& g) {
    g.neighbors.assign(g.num_nodes, {});
    g.degrees.assign(g.num_nodes, 0);
    for (int i = 0; i < g.num_nodes; ++i) g.neighbors[i].push_back(i);
    for (auto [i, j] : g.edges) {
        g.neighbors[i].push_back(j);
        g.neighbors[j].push_back(i);
        g.degrees[i]++;
        g.degrees[j]++;
    }
    for (auto& nb : g.neighbors) std::sort(nb.begin(), nb.end());
}

/// Closed-form assignment threshold sqrt(-log(1 - 2M / (N(N-1)))).
/// Throws on density >= 1, where the log is singular.
inline double zeta_threshold(int num_nodes, long num_edges) {
    if (num_nodes < 2) throw std::invalid_argument("zeta_threshold: need at least 2 nodes");
    double density = 2.0 * static_cast<double>(num_edges) /
                     (static_cast<double>(num_nodes) * (num_nodes - 1));
    if (density >= 1.0)
        throw std::domain_error("zeta_threshold: edge density >= 1, threshold is singular");
    return std::sqrt(-std::log(1.0 - density));
}

inline double zeta_threshold(const AttributedGraph& g) {
    return zeta_threshold(g.num_nodes, g.num_edges);
}

/// Lists violated structural invariants; empty result means the graph is valid.
inline std::vector<std::string> validate_graph(const AttributedGraph& g) {
    std::vector<std::string> report;
    std::set<std::pair<int, int>> seen;
    long degree_sum = 0;
    for (auto [i, j] : g.edges) {
        if (i == j) report.push_back("self-loop in edge list: " + std::to_string(i));
        if (i < 0 || i >= g.num_nodes || j < 0 || j >= g.num_nodes)
            report.push_back("edge endpoint out of range: (" + std::to_string(i) + ", " +
                             std::to_string(j) + ")");
        auto key = std::minmax(i, j);
        if (!seen.insert(key).second)
            report.push_back("duplicate edge: (" + std::to_string(key.first) + ", " +
                             std::to_string(key.second) + ")");
    }
    if (static_cast<long>(g.edges.size()) != g.num_edges)
        report.push_back("num_edges does not match edge list size");
    if (static_cast<int>(g.degrees.size()) != g.num_nodes)
        report.push_back("degree array size does not match num_nodes");
    else {
        std::vector<int> expect(g.num_nodes, 0);
        for (auto [i, j] : g.edges) {
            if (i >= 0 && i < g.num_nodes) expect[i]++;
            if (j >= 0 && j < g.num_nodes) expect[j]++;
        }
        for (int v = 0; v < g.num_nodes; ++v) {
            if (g.degrees[v] != expect[v]) {
                report.push_back("degree mismatch at node " + std::to_string(v));
                break;
            }
        }
        for (int d : g.degrees) degree_sum += d;
        if (degree_sum != 2 * g.num_edges)
            report.push_back("degree sum " + std::to_string(degree_sum) + " != 2M");
    }
    if (g.features.rows() != g.num_nodes)
        report.push_back("feature matrix has " + std::to_string(g.features.rows()) +
                         " rows, expected " + std::to_string(g.num_nodes));
    if (g.ground_truth) {
        for (size_t c = 0; c < g.ground_truth->communities.size(); ++c) {
            const auto& comm = g.ground_truth->communities[c];
            if (comm.empty())
                report.push_back("ground-truth community " + std::to_string(c) + " is empty");
            for (int v : comm)
                if (v < 0 || v >= g.num_nodes) {
                    report.push_back("ground-truth member out of range in community " +
                                     std::to_string(c));
                    break;
                }
        }
    }
    return report;
}

namespace detail {

inline bool is_comment_or_blank(const std::string& line) {
    for (char c : line) {
        if (c == '#') return true;
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

inline std::runtime_error parse_error(const std::string& path, int line_no,
                                      const std::string& what) {
    return std::runtime_error(path + ":" + std::to_string(line_no) + ": " + what);
}

}  // namespace detail

/// Parses an edge file: one "i j" pair per line, '#' comments ignored.
/// Reversed and repeated lines collapse to one undirected edge.
inline std::vector<std::pair<long, long>> read_edge_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open edge file: " + path);
    std::vector<std::pair<long, long>> raw;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::is_comment_or_blank(line)) continue;
        std::istringstream ss(line);
        long a, b;
        if (!(ss >> a >> b)) throw detail::parse_error(path, line_no, "expected two node ids");
        if (a < 0 || b < 0) throw detail::parse_error(path, line_no, "negative node id");
        std::string extra;
        if (ss >> extra) throw detail::parse_error(path, line_no, "trailing token '" + extra + "'");
        raw.emplace_back(a, b);
    }
    return raw;
}

/// Dense CSV feature matrix; delimiter is comma or whitespace. A non-numeric
/// first line is treated as a header and skipped.
inline Matrix read_dense_features(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open feature file: " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::is_comment_or_blank(line)) continue;
        for (char& c : line)
            if (c == ',' || c == ';') c = ' ';
        std::istringstream ss(line);
        std::vector<double> row;
        double v;
        std::string tok;
        bool numeric = true;
        while (ss >> tok) {
            try {
                size_t pos;
                v = std::stod(tok, &pos);
                if (pos != tok.size()) numeric = false;
            } catch (...) {
                numeric = false;
            }
            if (!numeric) break;
            row.push_back(v);
        }
        if (!numeric) {
            if (line_no == 1 && rows.empty()) continue;  // header
            throw detail::parse_error(path, line_no, "non-numeric value '" + tok + "'");
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw detail::parse_error(path, line_no, "inconsistent column count");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw std::runtime_error("feature file is empty: " + path);
    Matrix X(rows.size(), rows.front().size());
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < rows[i].size(); ++j) X(i, j) = rows[i][j];
    return X;
}

/// Sparse coordinate features: "node_id feature_id value" triples (value
/// defaults to 1 when omitted). Node ids refer to the remapped index space.
inline Matrix read_sparse_features(const std::string& path, int num_nodes,
                                   const std::map<long, int>* remap) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open feature file: " + path);
    struct Entry {
        int node;
        long feat;
        double value;
    };
    std::vector<Entry> entries;
    long max_feat = -1;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::is_comment_or_blank(line)) continue;
        std::istringstream ss(line);
        long node_id, feat_id;
        double value = 1.0;
        if (!(ss >> node_id >> feat_id))
            throw detail::parse_error(path, line_no, "expected 'node feature [value]'");
        ss >> value;
        int node;
        if (remap) {
            auto it = remap->find(node_id);
            if (it == remap->end())
                throw detail::parse_error(path, line_no,
                                          "unknown node id " + std::to_string(node_id));
            node = it->second;
        } else {
            if (node_id < 0 || node_id >= num_nodes)
                throw detail::parse_error(path, line_no,
                                          "node id " + std::to_string(node_id) + " out of range");
            node = static_cast<int>(node_id);
        }
        if (feat_id < 0) throw detail::parse_error(path, line_no, "negative feature id");
        max_feat = std::max(max_feat, feat_id);
        entries.push_back({node, feat_id, value});
    }
    Matrix X = Matrix::Zero(num_nodes, max_feat + 1);
    for (auto& e : entries) X(e.node, e.feat) = e.value;
    return X;
}

/// Cover file: one community per line, whitespace-separated node ids.
inline CommunityCover read_cover_file(const std::string& path, int num_nodes,
                                      const std::map<long, int>* remap) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open cover file: " + path);
    CommunityCover cover;
    cover.num_nodes = num_nodes;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::is_comment_or_blank(line)) continue;
        std::istringstream ss(line);
        std::vector<int> comm;
        long id;
        while (ss >> id) {
            int node;
            if (remap) {
                auto it = remap->find(id);
                if (it == remap->end())
                    throw detail::parse_error(path, line_no,
                                              "community member id " + std::to_string(id) +
                                                  " not present in the graph");
                node = it->second;
            } else {
                if (id < 0 || id >= num_nodes)
                    throw detail::parse_error(path, line_no,
                                              "community member id " + std::to_string(id) +
                                                  " out of range");
                node = static_cast<int>(id);
            }
            comm.push_back(node);
        }
        if (comm.empty()) continue;
        std::sort(comm.begin(), comm.end());
        comm.erase(std::unique(comm.begin(), comm.end()), comm.end());
        cover.communities.push_back(std::move(comm));
    }
    return cover;
}

enum class FeatureFormat { Auto, Dense, Sparse };

/// Loads and validates a dataset from the three text files.
///
/// Node ids in the edge file may be arbitrary non-negative integers. When
/// they already form a dense 0..N-1 range they are kept as-is (this also
/// admits isolated nodes below the max id); otherwise the distinct ids are
/// remapped in ascending order and the mapping is kept in `original_ids`.
inline AttributedGraph load_dataset(const std::string& edge_path, const std::string& feature_path,
                                    const std::string& cover_path = "",
                                    FeatureFormat format = FeatureFormat::Auto) {
    auto raw = read_edge_file(edge_path);

    std::set<long> ids;
    long max_id = -1;
    for (auto [a, b] : raw) {
        ids.insert(a);
        ids.insert(b);
        max_id = std::max({max_id, a, b});
    }
    bool dense_ids = (max_id + 1 == static_cast<long>(ids.size())) || raw.empty();

    std::map<long, int> remap;
    AttributedGraph g;
    if (dense_ids) {
        g.num_nodes = static_cast<int>(max_id + 1);
        for (long id = 0; id <= max_id; ++id) {
            remap[id] = static_cast<int>(id);
            g.original_ids.push_back(id);
        }
    } else {
        for (long id : ids) {
            remap[id] = static_cast<int>(g.original_ids.size());
            g.original_ids.push_back(id);
        }
        g.num_nodes = static_cast<int>(g.original_ids.size());
    }

    std::set<std::pair<int, int>> dedup;
    for (auto [a, b] : raw) {
        if (a == b) continue;  // drop self-loop lines
        int i = remap[a], j = remap[b];
        dedup.insert(std::minmax(i, j));
    }
    g.edges.assign(dedup.begin(), dedup.end());
    g.num_edges = static_cast<long>(g.edges.size());

    if (format == FeatureFormat::Auto) {
        auto dot = feature_path.rfind('.');
        std::string ext = dot == std::string::npos ? "" : feature_path.substr(dot);
        format = (ext == ".csv") ? FeatureFormat::Dense : FeatureFormat::Sparse;
    }
    if (format == FeatureFormat::Dense) {
        g.features = read_dense_features(feature_path);
        if (g.num_nodes == 0) {
            // feature-only dataset: every node is isolated
            g.num_nodes = static_cast<int>(g.features.rows());
            for (int i = 0; i < g.num_nodes; ++i) g.original_ids.push_back(i);
        } else if (g.features.rows() != g.num_nodes) {
            throw std::runtime_error("feature file has " + std::to_string(g.features.rows()) +
                                     " rows but the graph has " + std::to_string(g.num_nodes) +
                                     " nodes");
        }
    } else {
        g.features = read_sparse_features(feature_path, g.num_nodes, dense_ids ? nullptr : &remap);
    }

    build_neighbor_index(g);

    if (!cover_path.empty())
        g.ground_truth = read_cover_file(cover_path, g.num_nodes, dense_ids ? nullptr : &remap);

    auto report = validate_graph(g);
    if (!report.empty()) throw std::runtime_error("invalid dataset: " + report.front());
    return g;
}

inline void write_edge_file(const AttributedGraph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write edge file: " + path);
    for (auto [i, j] : g.edges) out << i << ' ' << j << '\n';
}

inline void write_cover_file(const CommunityCover& cover, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write cover file: " + path);
    for (const auto& comm : cover.communities) {
        for (size_t t = 0; t < comm.size(); ++t) out << (t ? " " : "") << comm[t];
        out << '\n';
    }
}

inline void write_dense_features(const Matrix& X, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write feature file: " + path);
    out.precision(17);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        for (Eigen::Index j = 0; j < X.cols(); ++j) out << (j ? "," : "") << X(i, j);
        out << '\n';
    }
}

/// Row-wise L2 normalization; zero rows stay zero.
inline void normalize_rows(Matrix& X) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        double n = X.row(i).norm();
        if (n > 0) X.row(i) /= n;
    }
}

}  // namespace ocd
