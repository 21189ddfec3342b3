#pragma once

// Semi-supervised training loop: prior sampling, Adam, epoch schedule with
// early stopping, and multi-run averaging of the evaluation metrics.

#include "ocd/graph.hpp"
#include "ocd/membership.hpp"
#include "ocd/metrics.hpp"
#include "ocd/model.hpp"
#include "ocd/objectives.hpp"
#include "ocd/tape.hpp"

#include <chrono>
#include <numeric>
#include <random>

namespace ocd {

struct TrainConfig {
    int epochs = 500;
    double lr = 0.006;
    double alpha = 0.5;
    double beta = 1e-6;
    double label_rate = 0.10;
    uint64_t seed = 1;
    int runs = 10;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    double early_stop_tol = 1e-5;  // min improvement of the total loss
    int early_stop_patience = 50;  // consecutive epochs without it
    ModularityForm modularity_form = ModularityForm::Membership;

    void check() const {
        if (lr <= 0) throw std::invalid_argument("config: lr must be positive");
        if (label_rate < 0 || label_rate > 1)
            throw std::invalid_argument("config: label_rate must lie in [0, 1]");
        if (runs < 1) throw std::invalid_argument("config: runs must be >= 1");
        if (epochs < 0) throw std::invalid_argument("config: epochs must be >= 0");
        if (alpha < 0 || beta < 0)
            throw std::invalid_argument("config: alpha and beta must be non-negative");
    }
};

struct EpochRecord {
    double l_r, l_s, l_c, total;
};

struct TrainTrace {
    std::vector<EpochRecord> epochs;
    EncoderOutput final_output;
    double wall_seconds = 0.0;
    bool diverged = false;
};

/// Uniformly samples floor(rate * N) distinct nodes; each selected node
/// reveals all of its ground-truth communities.
inline PriorLabels sample_prior_labels(const CommunityCover& cover, double rate, uint64_t seed) {
    if (rate < 0 || rate > 1)
        throw std::invalid_argument("sample_prior_labels: rate must lie in [0, 1]");
    PriorLabels prior;
    prior.num_communities = cover.size();
    int n = cover.num_nodes;
    int count = static_cast<int>(rate * n);
    if (count == 0) return prior;

    std::vector<int> pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<int> u(i, n - 1);
        std::swap(pool[i], pool[u(rng)]);
    }
    std::vector<char> selected(n, 0);
    for (int i = 0; i < count; ++i) selected[pool[i]] = 1;

    for (int c = 0; c < cover.size(); ++c)
        for (int v : cover.communities[c])
            if (selected[v]) prior.entries.emplace_back(v, c);
    std::sort(prior.entries.begin(), prior.entries.end());
    return prior;
}

/// Adam with bias correction. Moments are stored per parameter in the
/// order of ModelParams::flat().
class AdamOptimizer {
public:
    AdamOptimizer(const std::vector<Matrix*>& params, const TrainConfig& cfg) : cfg_(cfg) {
        for (auto* p : params) {
            m_.push_back(Matrix::Zero(p->rows(), p->cols()));
            v_.push_back(Matrix::Zero(p->rows(), p->cols()));
        }
    }

    void step(std::vector<Matrix*>& params, const std::vector<Matrix>& grads) {
        ++t_;
        double bc1 = 1.0 - std::pow(cfg_.adam_beta1, t_);
        double bc2 = 1.0 - std::pow(cfg_.adam_beta2, t_);
        for (size_t k = 0; k < params.size(); ++k) {
            if (!grads[k].allFinite())
                throw std::runtime_error("optimizer_step: non-finite gradient");
            m_[k] = cfg_.adam_beta1 * m_[k] + (1.0 - cfg_.adam_beta1) * grads[k];
            v_[k] = cfg_.adam_beta2 * v_[k] +
                    (1.0 - cfg_.adam_beta2) * grads[k].cwiseProduct(grads[k]);
            Matrix m_hat = m_[k] / bc1;
            Matrix v_hat = v_[k] / bc2;
            params[k]->array() -=
                cfg_.lr * m_hat.array() / (v_hat.array().sqrt() + cfg_.adam_eps);
        }
    }

    int step_count() const { return t_; }

private:
    TrainConfig cfg_;
    std::vector<Matrix> m_, v_;
    int t_ = 0;
};

/// Full-graph training of the total objective. Deterministic per
/// (graph, prior, config). An empty prior trains unsupervised.
inline TrainTrace train(const AttributedGraph& graph, const PriorLabels& prior,
                        const TrainConfig& config, ModelParams& params) {
    config.check();
    auto t0 = std::chrono::steady_clock::now();
    TrainTrace trace;
    auto idx = build_attention_index(graph);
    auto flat = params.flat();
    AdamOptimizer opt(flat, config);
    bool supervised = !prior.empty();
    double best = std::numeric_limits<double>::infinity();
    int stall = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        Tape t;
        auto pv = register_params(t, params);
        Var x = t.leaf(graph.features, false);
        auto enc = encode_on_tape(t, pv, x, idx);
        Var l_r = reconstruction_loss(t, enc.z, graph);
        Var mod_arg = config.modularity_form == ModularityForm::Membership ? enc.h : enc.z;
        Var l_c = modularity_loss(t, mod_arg, graph);
        Var total;
        EpochRecord rec{};
        rec.l_r = t.value(l_r)(0, 0);
        rec.l_c = t.value(l_c)(0, 0);
        if (supervised) {
            Var l_s = supervision_loss(t, enc.h, prior);
            rec.l_s = t.value(l_s)(0, 0);
            total = total_loss(t, l_r, l_s, l_c, config.alpha, config.beta);
        } else {
            rec.l_s = 0.0;
            total = total_loss_unsupervised(t, l_r, l_c, config.beta);
        }
        rec.total = t.value(total)(0, 0);
        if (!std::isfinite(rec.total)) {
            trace.diverged = true;
            break;
        }
        trace.epochs.push_back(rec);

        try {
            t.backward(total);
            std::vector<Matrix> grads;
            for (Var p : pv.flat) grads.push_back(t.grad(p));
            opt.step(flat, grads);
        } catch (const std::runtime_error&) {
            trace.diverged = true;
            break;
        }

        if (best - rec.total < config.early_stop_tol)
            ++stall;
        else
            stall = 0;
        best = std::min(best, rec.total);
        if (stall >= config.early_stop_patience) break;
    }

    trace.final_output = encode(params, graph);
    trace.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return trace;
}

struct MetricStats {
    double onmi_mean = 0, onmi_std = 0, f1_mean = 0, f1_std = 0;
    std::vector<double> onmi_runs, f1_runs;
    int failed_runs = 0;
};

/// Runs config.runs independent trainings (seed = base + run index for both
/// label sampling and initialization) and reports mean/std of ONMI and F1
/// against the ground truth, thresholded at zeta.
inline MetricStats train_averaged(const AttributedGraph& graph, const CommunityCover& cover,
                                  const TrainConfig& config, const Dims& dims,
                                  OnmiVariant variant = OnmiVariant::Max,
                                  double zeta_override = 0.0) {
    config.check();
    double zeta = zeta_override > 0 ? zeta_override : zeta_threshold(graph);
    MetricStats stats;
    for (int run = 0; run < config.runs; ++run) {
        uint64_t seed = config.seed + static_cast<uint64_t>(run);
        PriorLabels prior = sample_prior_labels(cover, config.label_rate, seed);
        ModelParams params = init_params(seed, dims);
        TrainConfig run_cfg = config;
        run_cfg.seed = seed;
        TrainTrace trace = train(graph, prior, run_cfg, params);
        if (trace.diverged) {
            stats.failed_runs++;
            continue;
        }
        auto assigned = assign_communities(trace.final_output.h, zeta);
        stats.onmi_runs.push_back(onmi(assigned.cover, cover, variant));
        stats.f1_runs.push_back(overlapping_f1(assigned.cover, cover));
    }
    auto mean_std = [](const std::vector<double>& xs, double& mean, double& sd) {
        if (xs.empty()) return;
        mean = std::accumulate(xs.begin(), xs.end(), 0.0) / xs.size();
        double var = 0;
        for (double x : xs) var += (x - mean) * (x - mean);
        sd = xs.size() > 1 ? std::sqrt(var / xs.size()) : 0.0;
    };
    mean_std(stats.onmi_runs, stats.onmi_mean, stats.onmi_std);
    mean_std(stats.f1_runs, stats.f1_mean, stats.f1_std);
    return stats;
}

/// Trace export: CSV with one row per epoch.
inline void write_trace_csv(const TrainTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write trace file: " + path);
    out << "epoch,l_r,l_s,l_c,total\n";
    out.precision(12);
    for (size_t e = 0; e < trace.epochs.size(); ++e) {
        const auto& r = trace.epochs[e];
        out << e << ',' << r.l_r << ',' << r.l_s << ',' << r.l_c << ',' << r.total << '\n';
    }
}

}  // namespace ocd
