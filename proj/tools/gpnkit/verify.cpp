#include "common.hpp"
#include "commands.hpp"

namespace gpnkit::cli {

namespace {

constexpr int kInstances = 10;
constexpr int kAnchors = 50000;

struct Report {
    std::string csv = "suite,check,value,tolerance,pass\n";
    bool ok = true;

    void check(const std::string& suite, const std::string& name, double value, double tol, bool pass) {
        csv += suite + "," + name + "," + num(value) + "," + num(tol) + "," + (pass ? "1" : "0") + "\n";
        std::cout << (pass ? "[PASS] " : "[FAIL] ") << suite << " " << name << " = " << value << " (tolerance " << tol << ")\n";
        ok = ok && pass;
    }
};

void conjugate(std::uint64_t seed, Report& r) {
    for (int s = 0; s < kInstances; ++s) {
        const auto inst = random_linear_instance(derive_seed(seed, {1, static_cast<std::uint64_t>(s)}));
        GaussianSampler anchors(exact_anchor_dist(inst.model));
        Rng rng(derive_seed(seed, {2, static_cast<std::uint64_t>(s)}));
        MatrixXd maps(kAnchors, inst.model.num_params());
        for (int i = 0; i < kAnchors; ++i) maps.row(i) = rms_map_linear(inst.model, anchors(rng)).transpose();
        const auto m = moment_check(maps, analytic_posterior(inst.model));
        const std::string tag = "instance_" + std::to_string(s);
        r.check("conjugate", tag + "_mean_z", m.max_mean_z, 3.0, m.max_mean_z < 3.0);
        r.check("conjugate", tag + "_cov_rel_frobenius", m.rel_cov_frobenius, 0.02, m.rel_cov_frobenius < 0.02);
    }
}

void theorem1(std::uint64_t seed, bool negative_control, Report& r) {
    for (int s = 0; s < kInstances; ++s) {
        const auto inst = random_linear_instance(derive_seed(seed, {3, static_cast<std::uint64_t>(s)}));
        const auto prior = output_prior(inst.model, inst.output_features);
        const auto like = output_likelihood(inst.model, inst.output_features);
        // the control draws anchors from half the correct covariance
        const GaussianDist anchor_dist = negative_control ? GaussianDist{prior.mean, 0.5 * prior.cov}
                                                          : output_exact_anchor_dist(prior, like);
        GaussianSampler anchors(anchor_dist);
        Rng rng(derive_seed(seed, {4, static_cast<std::uint64_t>(s)}));
        MatrixXd maps(kAnchors, prior.dim());
        for (int i = 0; i < kAnchors; ++i) maps.row(i) = output_map(like, prior.cov, anchors(rng)).transpose();
        const auto m = moment_check(maps, output_space_posterior(inst.model, inst.output_features));
        const std::string tag = "instance_" + std::to_string(s);
        r.check("theorem1", tag + "_mean_z", m.max_mean_z, 3.0, m.max_mean_z < 3.0);
        r.check("theorem1", tag + "_cov_rel_frobenius", m.rel_cov_frobenius, 0.02, m.rel_cov_frobenius < 0.02);
    }
}

void standard_normal_smoke(std::uint64_t seed, int threads, Report& r) {
    McmcConfig cfg;
    cfg.n_chains = 4;
    cfg.burn_in = 2000;
    cfg.thin = 5;
    cfg.n_samples = 5000;
    cfg.proposal_std = 1.0;
    cfg.seed = derive_seed(seed, {7});
    cfg.threads = threads;
    const auto chains = run_mh([](const VectorXd& t) { return -0.5 * t.squaredNorm(); }, VectorXd::Zero(1), cfg);
    std::vector<double> all;
    for (const auto& c : chains)
        for (const auto& s : c.samples) all.push_back(s[0]);
    const VectorXd v = Eigen::Map<const VectorXd>(all.data(), static_cast<Index>(all.size()));
    const double mean = v.mean(), var = (v.array() - mean).square().sum() / (v.size() - 1.0);
    r.check("mcmc_smoke", "normal_mean", mean, 0.05, std::abs(mean) < 0.05);
    r.check("mcmc_smoke", "normal_variance_gap", std::abs(var - 1.0), 0.05, std::abs(var - 1.0) < 0.05);
}

void mcmc_smoke(std::uint64_t seed, int threads, Report& r) {
    standard_normal_smoke(seed, threads, r);
    const auto inst = random_linear_instance(derive_seed(seed, {5}), 3, 20, 5);
    const auto& m = inst.model;
    const auto post = analytic_posterior(m);
    const MatrixXd prior_prec = m.prior.cov.inverse();
    const LogDensity target = [&](const VectorXd& t) {
        const VectorXd resid = m.y_obs - m.design * t, d = t - m.prior.mean;
        return -0.5 * resid.squaredNorm() / (m.noise_std * m.noise_std) - 0.5 * d.dot(prior_prec * d);
    };
    McmcConfig cfg;
    cfg.n_chains = 4;
    cfg.burn_in = 5000;
    cfg.thin = 10;
    cfg.n_samples = 2000;
    cfg.proposal_std = 0.1;
    cfg.seed = derive_seed(seed, {6});
    cfg.threads = threads;
    const auto chains = run_mh(target, m.prior.mean, cfg);

    MatrixXd all(static_cast<Index>(cfg.n_chains * cfg.n_samples), m.num_params());
    Index row = 0;
    double worst_rhat = 0.0;
    for (const auto& c : chains)
        for (const auto& s : c.samples) all.row(row++) = s.transpose();
    for (Index j = 0; j < m.num_params(); ++j) {
        std::vector<VectorXd> traces;
        for (const auto& c : chains) {
            VectorXd t(static_cast<Index>(c.samples.size()));
            for (std::size_t i = 0; i < c.samples.size(); ++i) t[static_cast<Index>(i)] = c.samples[i][j];
            traces.push_back(t);
        }
        worst_rhat = std::max(worst_rhat, split_rhat(traces));
    }
    const VectorXd mean = all.colwise().mean().transpose();
    const MatrixXd centered = all.rowwise() - mean.transpose();
    const VectorXd var = (centered.array().square().colwise().sum() / (all.rows() - 1.0)).transpose();
    const VectorXd sd = post.cov.diagonal().cwiseSqrt();
    const double mean_gap = ((mean - post.mean).array() / sd.array()).abs().maxCoeff();
    const double var_gap = (var.array() / post.cov.diagonal().array() - 1.0).abs().maxCoeff();
    r.check("mcmc_smoke", "split_rhat", worst_rhat, 1.05, worst_rhat < 1.05);
    r.check("mcmc_smoke", "mean_gap_in_posterior_sd", mean_gap, 0.1, mean_gap < 0.1);
    r.check("mcmc_smoke", "relative_variance_gap", var_gap, 0.15, var_gap < 0.15);
    double acceptance = 0.0;
    for (const auto& c : chains) acceptance += c.acceptance_rate / cfg.n_chains;
    r.check("mcmc_smoke", "acceptance_rate", acceptance, 0.0, acceptance > 0.0 && acceptance < 1.0);
}

}  // namespace

int run_verify(const GlobalOptions& g, const VerifyOptions& v) {
    if (!g.config.empty()) throw ConfigError("verify takes no config file");
    if (v.negative_control && v.suite != "theorem1") throw ConfigError("--negative-control applies to the theorem1 suite only");
    const std::uint64_t seed = g.seed.value_or(0);
    Report r;
    if (v.suite == "conjugate") conjugate(seed, r);
    else if (v.suite == "theorem1") theorem1(seed, v.negative_control, r);
    else if (v.suite == "mcmc_smoke") mcmc_smoke(seed, g.threads.value_or(1), r);
    else throw ConfigError("unknown verify suite '" + v.suite + "'");
    if (!g.out.empty()) write_file(fs::path(prepare_out_dir(g.out)) / ("verify_" + v.suite + ".csv"), r.csv);
    if (!r.ok) throw VerificationFailure("verify suite '" + v.suite + "' failed" + (v.negative_control ? " (negative control)" : ""));
    return 0;
}

}  // namespace gpnkit::cli
