#include <atomic>
#include <mutex>
#include <thread>

#include "checkpoint.hpp"
#include "commands.hpp"

namespace gpnkit::cli {

namespace {

constexpr int kSelectionSamples = 100;

json load_run_config(const GlobalOptions& g) {
    json cfg = resolve_config(g.config.empty() ? json::object() : read_json_file(g.config));
    if (g.seed) cfg["seed"] = *g.seed;
    if (g.threads) cfg["threads"] = *g.threads;
    if (get<int>(cfg, "epochs") < 0) throw ConfigError("epochs must be >= 0");
    if (get<int>(cfg, "threads") < 1) throw ConfigError("threads must be >= 1");
    const auto model = get<std::string>(cfg, "model");
    if (model != "gpn" && model != "ensemble") throw ConfigError("model must be gpn or ensemble");
    return cfg;
}

/// Mean Gaussian negative log likelihood of y under per-point predictives
/// N(sample mean, sample variance + noise variance).
double predictive_nll(const PosteriorSampleSet& s, const MatrixXd& y, double noise_std) {
    const MatrixXd mu = s.mean(), var = s.variance().array() + noise_std * noise_std;
    const double two_pi = 2.0 * 3.14159265358979323846;
    return (0.5 * (two_pi * var.array()).log() + 0.5 * (y - mu).array().square() / var.array()).mean();
}

struct GpnRun {
    GpnModel model;
    GpnTrainLog log;
    double seconds = 0.0;
};

GpnRun fit_gpn(const GpnConfig& cfg, const LabeledDataset& train, const UnlabeledPool& pool, int epochs, std::uint64_t seed) {
    GpnRun r;
    Stopwatch clock;
    r.model = init_gpn(cfg, derive_seed(seed, {1}));
    r.log = train_gpn(r.model, train, pool, epochs, derive_seed(seed, {2}));
    r.seconds = clock.seconds();
    return r;
}

double select_beta(const json& cfg, const Problem& p, std::uint64_t seed, json& outputs, const std::string& dir) {
    const json& g = cfg.at("gpn");
    const auto grid = get<std::vector<double>>(g, "beta_grid");
    if (grid.empty()) return get<double>(g, "beta");
    const double frac = get<double>(g, "validation_fraction");
    if (!(frac > 0 && frac < 1)) throw ConfigError("gpn.validation_fraction must lie in (0, 1)");
    const auto split = split_dataset(p.train, SplitSpec::random(1.0 - frac, derive_seed(seed, {7})));
    if (split.second.size() < 1 || split.first.size() < 1)
        throw ConfigError("beta_grid needs enough labeled rows for a validation split of fraction " + num(frac));
    const double noise = get<double>(cfg, "noise_std");
    std::string csv = "beta,validation_nll\n";
    double best = grid.front(), best_nll = INFINITY;
    for (double beta : grid) {
        const auto run = fit_gpn(gpn_config(cfg, p.train.input_dim(), beta), split.first, p.pool, get<int>(cfg, "epochs"), seed);
        const double nll = predictive_nll(sample_posterior(run.model, split.second.x, kSelectionSamples, derive_seed(seed, {8})),
                                          split.second.y, noise);
        note("beta " + brief(beta) + ": validation NLL " + brief(nll));
        csv += num(beta) + "," + num(nll) + "\n";
        if (nll < best_nll) best = beta, best_nll = nll;
    }
    write_file(fs::path(dir) / "beta_selection.csv", csv);
    outputs["beta_selection.csv"] = content_hash(csv);
    return best;
}

void emit(const std::string& dir, const std::string& name, const std::string& bytes, json& outputs) {
    write_file(fs::path(dir) / name, bytes);
    outputs[name] = content_hash(bytes);
}

}  // namespace

int run_train(const GlobalOptions& g) {
    const json cfg = load_run_config(g);
    const std::string dir = prepare_out_dir(g.out);
    const auto seed = get<std::uint64_t>(cfg, "seed");
    const int epochs = get<int>(cfg, "epochs");
    const int threads = get<int>(cfg, "threads");
    const Problem p = build_problem(cfg);
    const int dim = static_cast<int>(p.train.input_dim());

    json outputs = json::object();
    json manifest{{"tool", kToolVersion}, {"command", "train"}, {"config", cfg}, {"seed", seed}, {"data_dim", dim},
                  {"inputs", p.inputs},   {"problem", p.notes}};
    std::string timing = "unit,seconds\n";  // unit: ensemble member index, 0 for a GPN

    if (get<std::string>(cfg, "model") == "gpn") {
        const double beta = select_beta(cfg, p, seed, outputs, dir);
        const auto run = fit_gpn(gpn_config(cfg, dim, beta), p.train, p.pool, epochs, seed);
        manifest["selected_beta"] = beta;
        manifest["steps"] = run.log.steps;
        emit(dir, "generator.bin", params_bytes({run.model.generator}), outputs);
        emit(dir, "bootstrap.bin", params_bytes(run.model.bootstrap), outputs);
        if (!run.model.covariance_bank.empty()) emit(dir, "covariance_bank.bin", params_bytes(run.model.covariance_bank), outputs);
        emit(dir, "embeddings.csv", matrix_csv(run.model.embeddings), outputs);
        emit(dir, "pair_noise.csv", matrix_csv(run.model.pair_noise), outputs);
        std::string loss = "epoch,loss,anchor_term\n";
        for (std::size_t e = 0; e < run.log.epoch_loss.size(); ++e)
            loss += std::to_string(e + 1) + "," + num(run.log.epoch_loss[e]) + "," + num(run.log.epoch_anchor_term[e]) + "\n";
        emit(dir, "training_loss.csv", loss, outputs);
        timing += "0," + num(run.seconds) + "\n";
        note("trained GPN (beta " + brief(beta) + ", " + std::to_string(run.log.steps) + " steps) in " + brief(run.seconds) + " s");
    } else {
        const EnsembleConfig ecfg = ensemble_config(cfg, dim, threads);
        const int members = ecfg.members;
        std::vector<MemberResult> results(static_cast<std::size_t>(members));
        std::vector<double> seconds(static_cast<std::size_t>(members));
        std::atomic<int> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        // per-member timing is what the scaling curve needs, so members are
        // scheduled here rather than through train_ensemble
        auto worker = [&] {
            for (int i = next++; i < members; i = next++) {
                try {
                    Stopwatch clock;
                    results[static_cast<std::size_t>(i)] = train_member(ecfg, p.train, p.pool, epochs, seed, i);
                    seconds[static_cast<std::size_t>(i)] = clock.seconds();
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        for (int t = 1; t < std::min(threads, members); ++t) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);

        std::vector<ParamVector> trained, anchors;
        std::string loss = "member,epoch,loss\n";
        for (int i = 0; i < members; ++i) {
            auto& r = results[static_cast<std::size_t>(i)];
            trained.push_back(r.member);
            anchors.push_back(r.anchor);
            for (std::size_t e = 0; e < r.epoch_loss.size(); ++e)
                loss += std::to_string(i) + "," + std::to_string(e + 1) + "," + num(r.epoch_loss[e]) + "\n";
            timing += std::to_string(i) + "," + num(seconds[static_cast<std::size_t>(i)]) + "\n";
        }
        emit(dir, "members.bin", params_bytes(trained), outputs);
        emit(dir, "anchors.bin", params_bytes(anchors), outputs);
        emit(dir, "training_loss.csv", loss, outputs);
        double total = 0.0;
        for (double s : seconds) total += s;
        note("trained " + std::to_string(members) + " ensemble members in " + brief(total) + " s of compute");
    }

    // timing changes run to run; it stays out of the manifest
    write_file(fs::path(dir) / "timing.csv", timing);
    manifest["outputs"] = outputs;
    write_file(manifest_path(dir), manifest.dump(2) + "\n");
    std::cout << "checkpoint " << content_hash(outputs.dump()) << " " << dir << "\n";
    return 0;
}

}  // namespace gpnkit::cli
