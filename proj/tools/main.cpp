// Command-line front end: train, eval, sweep, perturb, validate, synth.

#include "ocd/experiment.hpp"
#include "ocd/graph.hpp"
#include "ocd/membership.hpp"
#include "ocd/metrics.hpp"
#include "ocd/noise.hpp"
#include "ocd/synthetic.hpp"
#include "ocd/trainer.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <iomanip>
#include <iostream>

namespace {

struct CommonFlags {
    std::string config_path;
    std::vector<double> label_rates, p_mis;
    double zeta = 0.0;
    long seed = -1;
    int jobs = 0;
    bool normalize = false;
    std::string onmi_variant, modularity_form, out_dir;
    int epochs = -1, runs = -1;
    bool save_models = false;
};

void add_override_flags(CLI::App* cmd, CommonFlags& f) {
    cmd->add_option("--config", f.config_path, "JSON experiment config");
    cmd->add_option("--seed", f.seed, "base seed (overrides config)");
    cmd->add_option("--label-rate", f.label_rates, "label-rate grid, fractions in [0,1]");
    cmd->add_option("--p-mis", f.p_mis, "attribute-noise grid, fractions in [0,1]");
    cmd->add_option("--out-dir", f.out_dir, "output directory");
    cmd->add_option("--jobs", f.jobs, "concurrent grid points");
    cmd->add_option("--zeta", f.zeta, "override the assignment threshold");
    cmd->add_option("--onmi-variant", f.onmi_variant, "max or sum");
    cmd->add_option("--modularity-form", f.modularity_form, "membership or embedding");
    cmd->add_option("--epochs", f.epochs, "training epochs");
    cmd->add_option("--runs", f.runs, "runs to average");
    cmd->add_flag("--normalize-features", f.normalize, "row-L2 normalize features");
    cmd->add_flag("--save-models", f.save_models, "write a model checkpoint per run");
}

ocd::ExperimentConfig resolve_config(const CommonFlags& f) {
    ocd::ExperimentConfig cfg;
    if (!f.config_path.empty()) cfg = ocd::parse_config(f.config_path);
    if (f.seed >= 0) cfg.train.seed = static_cast<uint64_t>(f.seed);
    if (!f.label_rates.empty()) cfg.label_rates = f.label_rates;
    if (!f.p_mis.empty()) cfg.p_mis = f.p_mis;
    if (!f.out_dir.empty()) cfg.out_dir = f.out_dir;
    if (f.jobs > 0) cfg.jobs = f.jobs;
    if (f.zeta > 0) cfg.zeta_override = f.zeta;
    if (f.normalize) cfg.normalize_features = true;
    if (f.save_models) cfg.save_models = true;
    if (f.epochs >= 0) cfg.train.epochs = f.epochs;
    if (f.runs > 0) cfg.train.runs = f.runs;
    if (!f.onmi_variant.empty())
        cfg.onmi_variant = f.onmi_variant == "sum" ? ocd::OnmiVariant::Sum : ocd::OnmiVariant::Max;
    if (!f.modularity_form.empty())
        cfg.train.modularity_form = f.modularity_form == "embedding"
                                        ? ocd::ModularityForm::Embedding
                                        : ocd::ModularityForm::Membership;
    return cfg;
}

int cmd_eval(const std::string& pred_path, const std::string& truth_path,
             const std::string& variant) {
    // node universe: covers are read against the max id either file mentions
    auto read_raw = [](const std::string& path, long& max_id) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open cover file: " + path);
        std::vector<std::vector<long>> comms;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ss(line);
            std::vector<long> comm;
            long id;
            while (ss >> id) {
                comm.push_back(id);
                max_id = std::max(max_id, id);
            }
            if (!comm.empty()) comms.push_back(std::move(comm));
        }
        return comms;
    };
    long max_id = -1;
    auto pc = read_raw(pred_path, max_id);
    auto tc = read_raw(truth_path, max_id);
    auto to_cover = [&](const std::vector<std::vector<long>>& comms) {
        ocd::CommunityCover c;
        c.num_nodes = static_cast<int>(max_id + 1);
        for (const auto& comm : comms) {
            std::vector<int> v(comm.begin(), comm.end());
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
            c.communities.push_back(std::move(v));
        }
        return c;
    };
    auto pred = to_cover(pc), truth = to_cover(tc);
    auto var = variant == "sum" ? ocd::OnmiVariant::Sum : ocd::OnmiVariant::Max;
    std::cout << std::fixed << std::setprecision(4);
    std::cout << "onmi " << ocd::onmi(pred, truth, var) << "\n";
    std::cout << "f1   " << ocd::overlapping_f1(pred, truth) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Overlapping community detection with a semi-supervised attention autoencoder"};
    app.require_subcommand(1);

    CommonFlags train_flags, sweep_flags;
    std::string edge_path, feature_path, cover_path, feature_format = "auto";

    auto add_dataset_flags = [&](CLI::App* cmd, bool cover_required) {
        cmd->add_option("--edges", edge_path, "edge list file")->required();
        cmd->add_option("--features", feature_path, "feature file (dense csv or sparse triples)")
            ->required();
        auto* c = cmd->add_option("--cover", cover_path, "ground-truth cover file");
        if (cover_required) c->required();
        cmd->add_option("--feature-format", feature_format, "auto, dense, or sparse");
    };

    auto* train_cmd =
        app.add_subcommand("train", "train on one dataset at a single grid point");
    add_dataset_flags(train_cmd, true);
    add_override_flags(train_cmd, train_flags);

    auto* sweep_cmd = app.add_subcommand("sweep", "run the label-rate x noise grid");
    add_dataset_flags(sweep_cmd, true);
    add_override_flags(sweep_cmd, sweep_flags);

    std::string pred_path, truth_path, eval_variant = "max";
    auto* eval_cmd = app.add_subcommand("eval", "compare two cover files");
    eval_cmd->add_option("pred", pred_path, "predicted cover")->required();
    eval_cmd->add_option("truth", truth_path, "ground-truth cover")->required();
    eval_cmd->add_option("--onmi-variant", eval_variant, "max or sum");

    std::string perturb_in, perturb_out, noise_mode = "swap";
    double perturb_rate = 0.0;
    long perturb_seed = 1;
    auto* perturb_cmd = app.add_subcommand("perturb", "emit corrupted feature file");
    perturb_cmd->add_option("--features", perturb_in, "dense csv feature file")->required();
    perturb_cmd->add_option("--out", perturb_out, "output csv")->required();
    perturb_cmd->add_option("--p-mis", perturb_rate, "fraction of nodes to exchange")->required();
    perturb_cmd->add_option("--seed", perturb_seed, "rng seed");
    perturb_cmd->add_option("--noise-mode", noise_mode, "swap or shuffle");

    auto* validate_cmd = app.add_subcommand("validate", "check a dataset and print stats");
    add_dataset_flags(validate_cmd, false);

    std::string synth_dir = "synth";
    int synth_nodes = 40, synth_blocks = 2;
    double synth_pin = 0.5, synth_pout = 0.02;
    long synth_seed = 1;
    auto* synth_cmd = app.add_subcommand("synth", "write a planted-partition dataset");
    synth_cmd->add_option("--out-dir", synth_dir, "output directory");
    synth_cmd->add_option("--nodes", synth_nodes, "node count");
    synth_cmd->add_option("--blocks", synth_blocks, "community count");
    synth_cmd->add_option("--p-in", synth_pin, "intra-block edge probability");
    synth_cmd->add_option("--p-out", synth_pout, "inter-block edge probability");
    synth_cmd->add_option("--seed", synth_seed, "rng seed");

    CLI11_PARSE(app, argc, argv);

    try {
        auto parse_format = [&] {
            if (feature_format == "dense") return ocd::FeatureFormat::Dense;
            if (feature_format == "sparse") return ocd::FeatureFormat::Sparse;
            return ocd::FeatureFormat::Auto;
        };

        if (eval_cmd->parsed()) return cmd_eval(pred_path, truth_path, eval_variant);

        if (perturb_cmd->parsed()) {
            ocd::Matrix x = ocd::read_dense_features(perturb_in);
            auto mode =
                noise_mode == "shuffle" ? ocd::NoiseMode::Shuffle : ocd::NoiseMode::SwapPairs;
            ocd::write_dense_features(
                ocd::perturb_attributes(x, perturb_rate, static_cast<uint64_t>(perturb_seed), mode),
                perturb_out);
            return 0;
        }

        if (validate_cmd->parsed()) {
            auto g = ocd::load_dataset(edge_path, feature_path, cover_path, parse_format());
            auto report = ocd::validate_graph(g);
            std::cout << "nodes " << g.num_nodes << ", edges " << g.num_edges << ", features "
                      << g.features.cols();
            if (g.ground_truth) std::cout << ", communities " << g.ground_truth->size();
            std::cout << ", zeta " << ocd::zeta_threshold(g) << "\n";
            for (const auto& line : report) std::cout << "violation: " << line << "\n";
            return report.empty() ? 0 : 1;
        }

        if (synth_cmd->parsed()) {
            ocd::PlantedConfig pc;
            pc.num_nodes = synth_nodes;
            pc.num_blocks = synth_blocks;
            pc.p_in = synth_pin;
            pc.p_out = synth_pout;
            pc.seed = static_cast<uint64_t>(synth_seed);
            auto g = ocd::planted_partition(pc);
            namespace fs = std::filesystem;
            fs::create_directories(synth_dir);
            ocd::write_edge_file(g, (fs::path(synth_dir) / "edges.txt").string());
            ocd::write_dense_features(g.features, (fs::path(synth_dir) / "features.csv").string());
            ocd::write_cover_file(*g.ground_truth, (fs::path(synth_dir) / "cover.txt").string());
            std::cout << "wrote " << synth_dir << " (" << g.num_nodes << " nodes, " << g.num_edges
                      << " edges)\n";
            return 0;
        }

        // train / sweep share the grid runner; train restricts to one point
        CommonFlags& flags = train_cmd->parsed() ? train_flags : sweep_flags;
        ocd::ExperimentConfig cfg = resolve_config(flags);
        cfg.edge_path = edge_path;
        cfg.feature_path = feature_path;
        cfg.cover_path = cover_path;
        cfg.feature_format = parse_format();
        if (train_cmd->parsed()) {
            cfg.label_rates = {cfg.label_rates.front()};
            cfg.p_mis = {cfg.p_mis.front()};
        }
        auto results = ocd::run_experiment(cfg);
        std::cout << std::fixed << std::setprecision(4);
        bool any_failed = false;
        for (const auto& r : results) {
            std::cout << "label_rate " << r.label_rate << "  p_mis " << r.p_mis;
            if (r.failed) {
                std::cout << "  FAILED: " << r.error << "\n";
                any_failed = true;
            } else {
                std::cout << "  onmi " << r.stats.onmi_mean << " +/- " << r.stats.onmi_std
                          << "  f1 " << r.stats.f1_mean << " +/- " << r.stats.f1_std << "\n";
            }
        }
        std::cout << "results written to " << cfg.out_dir << "/results.csv\n";
        return any_failed ? 1 : 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
