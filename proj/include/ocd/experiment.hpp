#pragma once

// Experiment configuration (JSON), sweep orchestration, and report emission.

#include "ocd/graph.hpp"
#include "ocd/noise.hpp"
#include "ocd/synthetic.hpp"
#include "ocd/trainer.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <mutex>
#include <thread>

namespace ocd {

struct ExperimentConfig {
    std::string edge_path, feature_path, cover_path;
    FeatureFormat feature_format = FeatureFormat::Auto;
    bool normalize_features = false;

    int hidden_per_head = 64;
    int embed_per_head = 16;
    int heads = 8;
    int communities = 0;  // 0 = take k from the ground-truth cover

    TrainConfig train;
    std::vector<double> label_rates = {0.10};
    std::vector<double> p_mis = {0.0};
    NoiseMode noise_mode = NoiseMode::SwapPairs;

    std::string out_dir = "out";
    OnmiVariant onmi_variant = OnmiVariant::Max;
    double zeta_override = 0.0;  // 0 = compute from the graph
    int jobs = 1;
    bool export_perturbed = false;
    bool save_models = false;  // write model_<tag>_run<r>.ckpt per finished run

    void check() const {
        train.check();
        if (label_rates.empty() || p_mis.empty())
            throw std::invalid_argument("config: label_rates and p_mis must be non-empty");
        for (double r : label_rates)
            if (r < 0 || r > 1) throw std::invalid_argument("config: label rate out of [0, 1]");
        for (double p : p_mis)
            if (p < 0 || p > 1) throw std::invalid_argument("config: p_mis out of [0, 1]");
        if (jobs < 1) throw std::invalid_argument("config: jobs must be >= 1");
    }
};

namespace detail {

template <typename T>
void take(nlohmann::json& j, const char* key, T& into) {
    if (auto it = j.find(key); it != j.end()) {
        into = it->get<T>();
        j.erase(it);
    }
}

}  // namespace detail

/// Parses the JSON config; absent fields keep their defaults, unknown keys
/// are rejected by name.
inline ExperimentConfig parse_config_json(const nlohmann::json& input) {
    nlohmann::json j = input;
    ExperimentConfig c;
    detail::take(j, "edge_path", c.edge_path);
    detail::take(j, "feature_path", c.feature_path);
    detail::take(j, "cover_path", c.cover_path);
    std::string fmt = "auto";
    detail::take(j, "feature_format", fmt);
    if (fmt == "auto")
        c.feature_format = FeatureFormat::Auto;
    else if (fmt == "dense")
        c.feature_format = FeatureFormat::Dense;
    else if (fmt == "sparse")
        c.feature_format = FeatureFormat::Sparse;
    else
        throw std::invalid_argument("config: feature_format must be auto/dense/sparse");
    detail::take(j, "normalize_features", c.normalize_features);
    detail::take(j, "hidden_per_head", c.hidden_per_head);
    detail::take(j, "embed_per_head", c.embed_per_head);
    detail::take(j, "heads", c.heads);
    detail::take(j, "communities", c.communities);
    detail::take(j, "epochs", c.train.epochs);
    detail::take(j, "lr", c.train.lr);
    detail::take(j, "alpha", c.train.alpha);
    detail::take(j, "beta", c.train.beta);
    detail::take(j, "seed", c.train.seed);
    detail::take(j, "runs", c.train.runs);
    detail::take(j, "early_stop_tol", c.train.early_stop_tol);
    detail::take(j, "early_stop_patience", c.train.early_stop_patience);
    detail::take(j, "label_rates", c.label_rates);
    detail::take(j, "p_mis", c.p_mis);
    std::string noise = "swap";
    detail::take(j, "noise_mode", noise);
    if (noise == "swap")
        c.noise_mode = NoiseMode::SwapPairs;
    else if (noise == "shuffle")
        c.noise_mode = NoiseMode::Shuffle;
    else
        throw std::invalid_argument("config: noise_mode must be swap or shuffle");
    detail::take(j, "out_dir", c.out_dir);
    std::string variant = "max";
    detail::take(j, "onmi_variant", variant);
    if (variant == "max")
        c.onmi_variant = OnmiVariant::Max;
    else if (variant == "sum")
        c.onmi_variant = OnmiVariant::Sum;
    else
        throw std::invalid_argument("config: onmi_variant must be max or sum");
    std::string mform = "membership";
    detail::take(j, "modularity_form", mform);
    if (mform == "membership")
        c.train.modularity_form = ModularityForm::Membership;
    else if (mform == "embedding")
        c.train.modularity_form = ModularityForm::Embedding;
    else
        throw std::invalid_argument("config: modularity_form must be membership or embedding");
    detail::take(j, "zeta", c.zeta_override);
    detail::take(j, "jobs", c.jobs);
    detail::take(j, "export_perturbed", c.export_perturbed);
    detail::take(j, "save_models", c.save_models);
    if (!j.empty())
        throw std::invalid_argument("config: unknown key '" + j.begin().key() + "'");
    c.check();
    return c;
}

inline ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("config parse error in " + path + ": " + e.what());
    }
    return parse_config_json(j);
}

struct GridResult {
    double label_rate = 0, p_mis = 0;
    MetricStats stats;
    bool failed = false;
    std::string error;
};

/// Seed for one grid point, derived from the base seed and grid coordinates
/// so every source of randomness flows from the config seed.
inline uint64_t grid_seed(uint64_t base, size_t li, size_t pi) {
    return base + 1000003ull * (li * 97 + pi + 1);
}

/// Runs the full (label_rate x p_mis) grid and writes results.csv, per-run
/// traces and predicted covers under config.out_dir.
inline std::vector<GridResult> run_experiment(const ExperimentConfig& config,
                                              const AttributedGraph& graph) {
    config.check();
    if (!graph.ground_truth)
        throw std::invalid_argument("run_experiment: dataset has no ground-truth cover");
    const CommunityCover& cover = *graph.ground_truth;

    namespace fs = std::filesystem;
    fs::create_directories(config.out_dir);

    Dims dims;
    dims.input = static_cast<int>(graph.features.cols());
    dims.hidden_per_head = config.hidden_per_head;
    dims.embed_per_head = config.embed_per_head;
    dims.heads = config.heads;
    dims.communities = config.communities > 0 ? config.communities : cover.size();

    double zeta = config.zeta_override > 0 ? config.zeta_override : zeta_threshold(graph);

    std::ofstream log(fs::path(config.out_dir) / "run.log");
    std::mutex log_mu;
    auto logline = [&](const std::string& msg) {
        std::lock_guard<std::mutex> lk(log_mu);
        auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        log << std::put_time(std::gmtime(&now), "%F %T") << " " << msg << "\n" << std::flush;
    };
    logline("base seed " + std::to_string(config.train.seed) + ", zeta " + std::to_string(zeta));

    struct Point {
        size_t li, pi;
    };
    std::vector<Point> points;
    for (size_t li = 0; li < config.label_rates.size(); ++li)
        for (size_t pi = 0; pi < config.p_mis.size(); ++pi) points.push_back({li, pi});
    std::vector<GridResult> results(points.size());

    auto run_point = [&](size_t t) {
        auto [li, pi] = points[t];
        GridResult& res = results[t];
        res.label_rate = config.label_rates[li];
        res.p_mis = config.p_mis[pi];
        uint64_t pseed = grid_seed(config.train.seed, li, pi);
        try {
            AttributedGraph working = graph;
            if (res.p_mis > 0)
                working.features =
                    perturb_attributes(graph.features, res.p_mis, pseed, config.noise_mode);
            std::string tag = "lr" + std::to_string(res.label_rate) + "_pmis" +
                              std::to_string(res.p_mis);
            if (config.export_perturbed && res.p_mis > 0)
                write_dense_features(working.features,
                                     (fs::path(config.out_dir) / ("features_" + tag + ".csv"))
                                         .string());

            MetricStats stats;
            for (int run = 0; run < config.train.runs; ++run) {
                uint64_t seed = config.train.seed + static_cast<uint64_t>(run);
                PriorLabels prior = sample_prior_labels(cover, res.label_rate, seed);
                ModelParams params = init_params(seed, dims);
                TrainConfig run_cfg = config.train;
                run_cfg.label_rate = res.label_rate;
                run_cfg.seed = seed;
                TrainTrace trace = train(working, prior, run_cfg, params);
                std::string run_tag = tag + "_run" + std::to_string(run);
                write_trace_csv(trace,
                                (fs::path(config.out_dir) / ("trace_" + run_tag + ".csv"))
                                    .string());
                if (config.save_models)
                    save_checkpoint(
                        (fs::path(config.out_dir) / ("model_" + run_tag + ".ckpt")).string(),
                        params);
                if (trace.diverged) {
                    stats.failed_runs++;
                    logline("grid " + tag + " run " + std::to_string(run) + " diverged");
                    continue;
                }
                auto assigned = assign_communities(trace.final_output.h, zeta);
                write_cover_file(assigned.cover,
                                 (fs::path(config.out_dir) / ("cover_" + run_tag + ".txt"))
                                     .string());
                stats.onmi_runs.push_back(onmi(assigned.cover, cover, config.onmi_variant));
                stats.f1_runs.push_back(overlapping_f1(assigned.cover, cover));
            }
            auto mean_std = [](const std::vector<double>& xs, double& mean, double& sd) {
                if (xs.empty()) return;
                double s = 0;
                for (double x : xs) s += x;
                mean = s / xs.size();
                double var = 0;
                for (double x : xs) var += (x - mean) * (x - mean);
                sd = std::sqrt(var / xs.size());
            };
            mean_std(stats.onmi_runs, stats.onmi_mean, stats.onmi_std);
            mean_std(stats.f1_runs, stats.f1_mean, stats.f1_std);
            res.stats = std::move(stats);
            logline("grid " + tag + " done: onmi " + std::to_string(res.stats.onmi_mean) +
                    ", f1 " + std::to_string(res.stats.f1_mean));
        } catch (const std::exception& e) {
            res.failed = true;
            res.error = e.what();
            logline("grid point failed: " + std::string(e.what()));
        }
    };

    if (config.jobs <= 1 || points.size() <= 1) {
        for (size_t t = 0; t < points.size(); ++t) run_point(t);
    } else {
        std::atomic<size_t> next{0};
        auto worker = [&] {
            for (size_t t = next.fetch_add(1); t < points.size(); t = next.fetch_add(1))
                run_point(t);
        };
        std::vector<std::thread> pool;
        int n = std::min<int>(config.jobs, static_cast<int>(points.size()));
        for (int w = 0; w < n; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::ofstream csv(fs::path(config.out_dir) / "results.csv");
    csv << "label_rate,p_mis,onmi_mean,onmi_std,f1_mean,f1_std,failed_runs,status\n";
    csv << std::fixed << std::setprecision(6);
    for (const auto& r : results) {
        csv << r.label_rate << ',' << r.p_mis << ',' << r.stats.onmi_mean << ','
            << r.stats.onmi_std << ',' << r.stats.f1_mean << ',' << r.stats.f1_std << ','
            << r.stats.failed_runs << ',' << (r.failed ? "failed" : "ok") << '\n';
    }
    return results;
}

inline std::vector<GridResult> run_experiment(const ExperimentConfig& config) {
    AttributedGraph graph = load_dataset(config.edge_path, config.feature_path, config.cover_path,
                                         config.feature_format);
    if (config.normalize_features) normalize_rows(graph.features);
    return run_experiment(config, graph);
}

}  // namespace ocd
