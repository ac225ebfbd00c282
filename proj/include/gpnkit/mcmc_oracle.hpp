#pragma once

// Random-walk Metropolis-Hastings over network parameters, used as the
// ground-truth posterior for small problems.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <thread>
#include <vector>

#include "eval_metrics.hpp"
#include "nn_core.hpp"
#include "prior.hpp"
#include "random.hpp"

namespace gpnkit {

struct McmcConfig {
    double proposal_std = 0.05;
    int n_chains = 4;
    int burn_in = 1000;
    int thin = 1;
    int n_samples = 1000;  // kept samples per chain
    std::uint64_t seed = 0;
    bool adapt = true;     // tune proposal_std during burn-in
    double target_acceptance = 0.3;
    int adapt_window = 100;
    int threads = 1;

    void validate() const {
        if (!(proposal_std >= 0)) throw ConfigError("McmcConfig.proposal_std must be >= 0");
        if (n_chains < 1 || burn_in < 0 || thin < 1 || n_samples < 1) throw ConfigError("invalid McmcConfig counts");
    }
};

struct McmcChain {
    std::vector<VectorXd> samples;
    std::vector<double> log_posts;
    double acceptance_rate = 0.0;  // over post-burn-in iterations
    std::int64_t accepted = 0;
    std::int64_t proposed = 0;
    double proposal_std = 0.0;     // after adaptation
};

using LogDensity = std::function<double(const VectorXd&)>;

/// -sum ||y_i - f(x_i)||^2 / (2 sigma^2) - sum_d theta_d^2 / (2 prior_var_d),
/// without normalizing constants. Zero-variance coordinates must be zero.
inline double log_unnorm_posterior(const ParamVector& theta, const MatrixXd& x, const MatrixXd& y, double noise_std,
                                   const VectorXd& prior_var) {
    double lp = 0.0;
    for (Index d = 0; d < theta.size(); ++d) {
        const double v = theta.values[d];
        if (prior_var[d] > 0) lp -= v * v / (2.0 * prior_var[d]);
        else if (v != 0.0) return -std::numeric_limits<double>::infinity();
    }
    if (x.rows() > 0) lp -= (forward(theta, x) - y).squaredNorm() / (2.0 * noise_std * noise_std);
    return lp;
}

inline double log_unnorm_posterior(const ParamVector& theta, const MatrixXd& x, const MatrixXd& y, double noise_std,
                                   const PriorSpec& prior) {
    return log_unnorm_posterior(theta, x, y, noise_std, prior_variances(prior, theta.arch));
}

/// One chain from `init`. The proposal is isotropic Gaussian; during
/// burn-in its scale is multiplied by exp(2 (rate - target)) after every
/// adaptation window.
inline McmcChain run_chain(const LogDensity& target, const VectorXd& init, const McmcConfig& cfg, std::uint64_t chain_seed) {
    cfg.validate();
    double lp = target(init);
    if (!std::isfinite(lp)) throw PreconditionError("run_mh: target is not finite at the initial point");
    Rng rng(chain_seed);
    std::normal_distribution<double> n01(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    McmcChain chain;
    double step = cfg.proposal_std;
    VectorXd cur = init, prop(init.size());
    int window_acc = 0, window_n = 0;
    const std::int64_t total = static_cast<std::int64_t>(cfg.burn_in) + static_cast<std::int64_t>(cfg.n_samples) * cfg.thin;
    chain.samples.reserve(static_cast<std::size_t>(cfg.n_samples));
    for (std::int64_t it = 0; it < total; ++it) {
        for (Index i = 0; i < prop.size(); ++i) prop[i] = cur[i] + step * n01(rng);
        const double lp_prop = target(prop);
        const bool accept = std::log(u01(rng)) < lp_prop - lp;
        if (accept) {
            cur.swap(prop);
            lp = lp_prop;
        }
        if (it < cfg.burn_in) {
            if (cfg.adapt) {
                window_acc += accept;
                if (++window_n == cfg.adapt_window) {
                    step *= std::exp(2.0 * (static_cast<double>(window_acc) / window_n - cfg.target_acceptance));
                    window_acc = window_n = 0;
                }
            }
            continue;
        }
        ++chain.proposed;
        chain.accepted += accept;
        if ((it - cfg.burn_in + 1) % cfg.thin == 0) {
            chain.samples.push_back(cur);
            chain.log_posts.push_back(lp);
        }
    }
    chain.acceptance_rate = chain.proposed > 0 ? static_cast<double>(chain.accepted) / static_cast<double>(chain.proposed) : 0.0;
    chain.proposal_std = step;
    return chain;
}

/// cfg.n_chains independent chains, chain c starting from inits[c % inits.size()].
inline std::vector<McmcChain> run_mh(const LogDensity& target, const std::vector<VectorXd>& inits, const McmcConfig& cfg) {
    cfg.validate();
    if (inits.empty()) throw PreconditionError("run_mh needs at least one initial point");
    std::vector<McmcChain> chains(static_cast<std::size_t>(cfg.n_chains));
    auto run = [&](int c) {
        chains[static_cast<std::size_t>(c)] =
            run_chain(target, inits[static_cast<std::size_t>(c) % inits.size()], cfg, derive_seed(cfg.seed, {static_cast<std::uint64_t>(c)}));
    };
    if (cfg.threads <= 1 || cfg.n_chains == 1) {
        for (int c = 0; c < cfg.n_chains; ++c) run(c);
    } else {
        std::vector<std::thread> pool;
        for (int c = 0; c < cfg.n_chains; ++c) pool.emplace_back(run, c);
        for (auto& t : pool) t.join();
    }
    return chains;
}

inline std::vector<McmcChain> run_mh(const LogDensity& target, const VectorXd& init, const McmcConfig& cfg) {
    return run_mh(target, std::vector<VectorXd>{init}, cfg);
}

/// Split-R-hat of one scalar statistic traced through each chain.
inline double split_rhat(const std::vector<VectorXd>& traces) {
    std::vector<VectorXd> halves;
    for (const auto& t : traces) {
        const Index h = t.size() / 2;
        if (h < 2) throw PreconditionError("split_rhat needs chains of length >= 4");
        halves.push_back(t.head(h));
        halves.push_back(t.segment(t.size() - h, h));
    }
    const Index n = std::min_element(halves.begin(), halves.end(), [](auto& a, auto& b) { return a.size() < b.size(); })->size();
    const double m = static_cast<double>(halves.size());
    VectorXd means(halves.size());
    double w = 0.0;
    for (std::size_t i = 0; i < halves.size(); ++i) {
        const VectorXd v = halves[i].head(n);
        means[static_cast<Index>(i)] = v.mean();
        w += (v.array() - v.mean()).square().sum() / static_cast<double>(n - 1);
    }
    w /= m;
    const double b = static_cast<double>(n) * (means.array() - means.mean()).square().sum() / (m - 1.0);
    if (w <= 0.0) return b > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    const double var_plus = (static_cast<double>(n) - 1.0) / static_cast<double>(n) * w + b / static_cast<double>(n);
    return std::sqrt(var_plus / w);
}

/// f(x_grid; theta_s) for every kept sample of every chain.
inline PosteriorSampleSet posterior_predictive(const std::vector<McmcChain>& chains, const MatrixXd& x_grid,
                                               const MlpArchitecture& arch) {
    PosteriorSampleSet set;
    set.kind = SampleKind::regression_values;
    for (const auto& ch : chains)
        for (const auto& s : ch.samples) set.draws.push_back(forward(ParamVector(arch, s), x_grid));
    return set;
}

inline PosteriorSampleSet posterior_predictive(const McmcChain& chain, const MatrixXd& x_grid, const MlpArchitecture& arch) {
    return posterior_predictive(std::vector<McmcChain>{chain}, x_grid, arch);
}

/// Largest split-R-hat over the predictive values f(x_g) at each grid input
/// and the log-posterior trace; parameter-space R-hat is meaningless for
/// networks because of weight-space symmetries.
inline double predictive_rhat(const std::vector<McmcChain>& chains, const MatrixXd& x_grid, const MlpArchitecture& arch) {
    std::vector<MatrixXd> per_chain;  // samples x grid
    for (const auto& ch : chains) {
        MatrixXd m(static_cast<Index>(ch.samples.size()), x_grid.rows());
        for (std::size_t s = 0; s < ch.samples.size(); ++s)
            m.row(static_cast<Index>(s)) = forward(ParamVector(arch, ch.samples[s]), x_grid).col(0).transpose();
        per_chain.push_back(std::move(m));
    }
    double worst = 0.0;
    for (Index g = 0; g < x_grid.rows(); ++g) {
        std::vector<VectorXd> traces;
        for (const auto& m : per_chain) traces.emplace_back(m.col(g));
        worst = std::max(worst, split_rhat(traces));
    }
    std::vector<VectorXd> lp;
    for (const auto& ch : chains) lp.emplace_back(Eigen::Map<const VectorXd>(ch.log_posts.data(), static_cast<Index>(ch.log_posts.size())));
    return std::max(worst, split_rhat(lp));
}

}  // namespace gpnkit
