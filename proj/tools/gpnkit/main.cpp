#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"

using namespace gpnkit;
using namespace gpnkit::cli;

namespace {

enum Exit { ok = 0, config = 2, data = 3, numeric = 4, verification = 5 };

int report(const char* kind, const std::exception& e, int code) {
    std::cerr << "gpnkit: " << kind << ": " << e.what() << '\n';
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generative posterior networks: training, evaluation, verification and figures"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);

    GlobalOptions g;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    auto add_globals = [&](CLI::App* sub) {
        sub->add_option("--config", g.config, "JSON config file (env GPNKIT_CONFIG)");
        sub->add_option("--seed", seed, "master seed (env GPNKIT_SEED)");
        sub->add_option("--threads", threads, "worker threads (env GPNKIT_THREADS)")->check(CLI::PositiveNumber);
        sub->add_option("--out", g.out, "output directory (env GPNKIT_OUT)");
    };

    auto* train = app.add_subcommand("train", "train a GPN or an ensemble and write a checkpoint directory");
    add_globals(train);

    EvalOptions eval_opts;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint: metrics, ROC, posterior band, scaling table");
    add_globals(eval);
    eval->add_option("--checkpoint", eval_opts.checkpoint, "checkpoint directory written by train");

    VerifyOptions verify_opts;
    auto* verify = app.add_subcommand("verify", "run a self-check suite; exits 5 when a check fails");
    add_globals(verify);
    verify->add_option("--suite", verify_opts.suite, "conjugate | theorem1 | mcmc_smoke")
        ->check(CLI::IsMember({"conjugate", "theorem1", "mcmc_smoke"}));
    verify->add_flag("--negative-control", verify_opts.negative_control,
                     "theorem1 with deliberately wrong anchors; expected to fail");

    FigureOptions figure_opts;
    auto* figure = app.add_subcommand("figure", "render SVG and CSV figures from eval output directories");
    add_globals(figure);
    figure->add_option("--kind", figure_opts.kind, "posterior_band | roc | scaling");
    figure->add_option("--input", figure_opts.inputs, "eval output directory (repeatable)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? Exit::ok : Exit::config;
    }
    g.seed = seed;
    g.threads = threads;

    try {
        apply_environment(g);
        if (train->parsed()) return run_train(g);
        if (eval->parsed()) return run_eval(g, eval_opts);
        if (verify->parsed()) return run_verify(g, verify_opts);
        return run_figure(g, figure_opts);
    } catch (const VerificationFailure& e) {
        return report("verification failed", e, Exit::verification);
    } catch (const ConfigError& e) {
        return report("config error", e, Exit::config);
    } catch (const DataError& e) {
        return report("data error", e, Exit::data);
    } catch (const NumericalError& e) {
        return report("numerical divergence", e, Exit::numeric);
    } catch (const LinAlgError& e) {
        return report("numerical divergence", e, Exit::numeric);
    } catch (const ShapeError& e) {
        return report("config error", e, Exit::config);
    } catch (const PreconditionError& e) {
        return report("config error", e, Exit::config);
    } catch (const std::exception& e) {
        return report("error", e, 1);
    }
}
