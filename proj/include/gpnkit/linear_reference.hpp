#pragma once

// Exact conjugate Bayesian linear regression and randomized-MAP sampling
// (RMS) in closed form, in parameter space and in output space. Every
// formula goes through precision matrices (design^T design / sigma^2), so
// rank-deficient likelihoods (N < P) need no special handling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "errors.hpp"
#include "random.hpp"

namespace gpnkit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct GaussianDist {
    VectorXd mean;
    MatrixXd cov;

    Index dim() const { return mean.size(); }

    /// Throws unless cov is square, matches mean, symmetric to 1e-10 and
    /// PSD up to round-off (eigenvalues >= -1e-8).
    void validate() const {
        if (cov.rows() != mean.size() || cov.cols() != mean.size())
            throw ShapeError("GaussianDist covariance size", static_cast<std::size_t>(mean.size()),
                             static_cast<std::size_t>(cov.rows()));
        const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
        if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
            throw LinAlgError("GaussianDist covariance is not symmetric");
        if (mean.size() > 0) {
            Eigen::SelfAdjointEigenSolver<MatrixXd> es(cov, Eigen::EigenvaluesOnly);
            if (es.eigenvalues().minCoeff() < -1e-8 * scale) throw LinAlgError("GaussianDist covariance is not PSD");
        }
    }
};

struct LinearGaussianModel {
    MatrixXd design;  // N x P
    VectorXd y_obs;   // N
    double noise_std = 1.0;
    GaussianDist prior;

    Index num_params() const { return prior.mean.size(); }
    Index num_obs() const { return y_obs.size(); }

    void validate() const {
        if (design.rows() != y_obs.size())
            throw ShapeError("design rows vs y_obs", static_cast<std::size_t>(y_obs.size()),
                             static_cast<std::size_t>(design.rows()));
        if (design.cols() != prior.mean.size())
            throw ShapeError("design columns vs prior dimension", static_cast<std::size_t>(prior.mean.size()),
                             static_cast<std::size_t>(design.cols()));
        if (!(noise_std > 0.0)) throw PreconditionError("noise_std must be positive");
    }
};

namespace detail {

inline MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

/// Cholesky of a symmetric PSD matrix; on failure retries with jitter
/// 1e-10, 1e-9, ..., 1e-6 times the identity.
inline Eigen::LLT<MatrixXd> psd_factor(const MatrixXd& a) {
    Eigen::LLT<MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) return llt;
    const MatrixXd id = MatrixXd::Identity(a.rows(), a.cols());
    for (double jitter = 1e-10; jitter <= 1.0001e-6; jitter *= 10.0) {
        llt.compute(a + jitter * id);
        if (llt.info() == Eigen::Success) return llt;
    }
    throw LinAlgError("matrix is not positive definite even with jitter 1e-6");
}

inline MatrixXd psd_inverse(const MatrixXd& a) {
    auto llt = psd_factor(a);
    return symmetrize(llt.solve(MatrixXd::Identity(a.rows(), a.cols())));
}

}  // namespace detail

/// Draws from N(mean, cov) through a symmetric square root, so singular
/// (PSD) covariances are fine.
class GaussianSampler {
public:
    explicit GaussianSampler(const GaussianDist& d) : mean_(d.mean) {
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(detail::symmetrize(d.cov));
        root_ = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    }
    VectorXd operator()(Rng& rng) const { return mean_ + root_ * standard_normal_vector(mean_.size(), rng); }

private:
    VectorXd mean_;
    MatrixXd root_;
};

// ---------------------------------------------------------------------------
// Parameter space

/// Precision contributed by the likelihood, design^T design / sigma^2.
inline MatrixXd likelihood_precision(const LinearGaussianModel& m) {
    return m.design.transpose() * m.design / (m.noise_std * m.noise_std);
}

/// Linear term of the log-likelihood, design^T y / sigma^2.
inline VectorXd likelihood_shift(const LinearGaussianModel& m) {
    return m.design.transpose() * m.y_obs / (m.noise_std * m.noise_std);
}

inline GaussianDist analytic_posterior(const LinearGaussianModel& m) {
    m.validate();
    if (m.num_obs() == 0) return m.prior;
    Eigen::LLT<MatrixXd> prior_llt(m.prior.cov);
    if (prior_llt.info() != Eigen::Success) throw LinAlgError("analytic_posterior: prior covariance is singular");
    const MatrixXd prior_prec = detail::symmetrize(prior_llt.solve(MatrixXd::Identity(m.num_params(), m.num_params())));
    const MatrixXd post_prec = prior_prec + likelihood_precision(m);
    GaussianDist post;
    post.cov = detail::psd_inverse(post_prec);
    post.mean = post.cov * (likelihood_shift(m) + prior_prec * m.prior.mean);
    return post;
}

/// MAP under the likelihood times a shifted prior N(anchor, regularizer_cov).
inline VectorXd rms_map_linear(const LinearGaussianModel& m, const VectorXd& anchor, const MatrixXd& regularizer_cov) {
    m.validate();
    if (anchor.size() != m.num_params())
        throw ShapeError("rms_map_linear: anchor length", static_cast<std::size_t>(m.num_params()),
                         static_cast<std::size_t>(anchor.size()));
    if (m.num_obs() == 0) return anchor;
    Eigen::LLT<MatrixXd> reg_llt(regularizer_cov);
    if (reg_llt.info() != Eigen::Success) throw LinAlgError("rms_map_linear: regularizer covariance is singular");
    const VectorXd reg_anchor = reg_llt.solve(anchor);
    const MatrixXd reg_prec = reg_llt.solve(MatrixXd::Identity(m.num_params(), m.num_params()));
    const MatrixXd lhs = detail::symmetrize(likelihood_precision(m) + reg_prec);
    return detail::psd_factor(lhs).solve(likelihood_shift(m) + reg_anchor);
}

/// RMS map with the prior covariance as regularizer (the shifted prior
/// N(anchor, Sigma_prior)); anchors are what get drawn from the anchor
/// distribution.
inline VectorXd rms_map_linear(const LinearGaussianModel& m, const VectorXd& anchor) {
    return rms_map_linear(m, anchor, m.prior.cov);
}

/// Anchor distribution N(mu_prior, Sigma_prior + Sigma_prior Lambda_like Sigma_prior)
/// whose MAP images are distributed exactly as the posterior.
inline GaussianDist exact_anchor_dist(const LinearGaussianModel& m) {
    m.validate();
    const MatrixXd& s = m.prior.cov;
    return {m.prior.mean, detail::symmetrize(s + s * likelihood_precision(m) * s)};
}

/// Practical approximation Sigma_anc = Sigma_prior.
inline GaussianDist approx_anchor_dist(const LinearGaussianModel& m) { return m.prior; }

// ---------------------------------------------------------------------------
// Output space: Yhat = F theta at M sample inputs with feature rows F.

inline GaussianDist output_prior(const LinearGaussianModel& m, const MatrixXd& features) {
    if (features.cols() != m.num_params())
        throw ShapeError("output features columns", static_cast<std::size_t>(m.num_params()),
                         static_cast<std::size_t>(features.cols()));
    return {features * m.prior.mean, detail::symmetrize(features * m.prior.cov * features.transpose())};
}

/// Parameter posterior pushed through the linear map F.
inline GaussianDist output_space_posterior(const LinearGaussianModel& m, const MatrixXd& features) {
    if (features.cols() != m.num_params())
        throw ShapeError("output features columns", static_cast<std::size_t>(m.num_params()),
                         static_cast<std::size_t>(features.cols()));
    const GaussianDist post = analytic_posterior(m);
    return {features * post.mean, detail::symmetrize(features * post.cov * features.transpose())};
}

/// log P(y_obs | Yhat) = -1/2 Yhat^T precision Yhat + shift^T Yhat + const.
struct OutputLikelihood {
    MatrixXd precision;
    VectorXd shift;
};

/// Likelihood of the observations as a function of Yhat, obtained by
/// conditioning the joint Gaussian of (Yhat, f(x_obs), y_obs). Requires the
/// output prior covariance F Sigma_prior F^T to be invertible (M <= P, F full
/// row rank).
inline OutputLikelihood output_likelihood(const LinearGaussianModel& m, const MatrixXd& features) {
    m.validate();
    const Index out_dim = features.rows();
    if (m.num_obs() == 0) return {MatrixXd::Zero(out_dim, out_dim), VectorXd::Zero(out_dim)};
    const GaussianDist oprior = output_prior(m, features);
    Eigen::LLT<MatrixXd> oprior_llt(oprior.cov);
    if (oprior_llt.info() != Eigen::Success) throw LinAlgError("output prior covariance is singular");
    // K = Sigma_p F^T Sigma_Y^{-1}: E[theta | Yhat] = mu_p + K (Yhat - F mu_p)
    const MatrixXd cross = m.prior.cov * features.transpose();
    const MatrixXd gain = oprior_llt.solve(cross.transpose()).transpose();
    const MatrixXd cond_cov = detail::symmetrize(m.prior.cov - gain * cross.transpose());
    const MatrixXd resid_cov = detail::symmetrize(m.design * cond_cov * m.design.transpose() +
                                                  m.noise_std * m.noise_std * MatrixXd::Identity(m.num_obs(), m.num_obs()));
    const MatrixXd obs_gain = m.design * gain;  // N x M
    const VectorXd offset = m.design * (m.prior.mean - gain * features * m.prior.mean);
    auto resid_llt = detail::psd_factor(resid_cov);
    const MatrixXd w = resid_llt.solve(obs_gain);
    return {detail::symmetrize(obs_gain.transpose() * w), w.transpose() * (m.y_obs - offset)};
}

/// Bayes' rule in output space: N(mu_Y, Sigma_Y) prior times the output likelihood.
inline GaussianDist output_bayes_posterior(const GaussianDist& output_prior_dist, const OutputLikelihood& like) {
    const MatrixXd prior_prec = detail::psd_inverse(output_prior_dist.cov);
    GaussianDist post;
    post.cov = detail::psd_inverse(prior_prec + like.precision);
    post.mean = post.cov * (like.shift + prior_prec * output_prior_dist.mean);
    return post;
}

/// Output-space MAP for anchor Yhat_anc with regularizer N(Yhat_anc, regularizer_cov).
inline VectorXd output_map(const OutputLikelihood& like, const MatrixXd& regularizer_cov, const VectorXd& anchor) {
    auto reg_llt = detail::psd_factor(regularizer_cov);
    const MatrixXd reg_prec = reg_llt.solve(MatrixXd::Identity(anchor.size(), anchor.size()));
    return detail::psd_factor(detail::symmetrize(like.precision + reg_prec)).solve(like.shift + reg_prec * anchor);
}

/// Output-space anchor distribution N(mu_Y, Sigma_Y + Sigma_Y Lambda Sigma_Y).
inline GaussianDist output_exact_anchor_dist(const GaussianDist& output_prior_dist, const OutputLikelihood& like) {
    const MatrixXd& s = output_prior_dist.cov;
    return {output_prior_dist.mean, detail::symmetrize(s + s * like.precision * s)};
}

// ---------------------------------------------------------------------------
// Monte-Carlo moment comparison

struct MomentCheck {
    double max_mean_z = 0.0;         // max_i |mean_i - target_i| / SE_i
    double rel_cov_frobenius = 0.0;  // ||S - Sigma||_F / ||Sigma||_F
    VectorXd sample_mean;
    MatrixXd sample_cov;
    VectorXd var_excess_z;           // (sample var - target var) / SE(var), per coordinate
    Index n = 0;

    bool matches(double mean_z_tol = 3.0, double frob_tol = 0.02) const {
        return max_mean_z < mean_z_tol && rel_cov_frobenius < frob_tol;
    }
};

/// Compares the rows of `samples` (n x P) with a Gaussian target. Standard
/// errors use the target moments: SE(mean_i) = sqrt(Sigma_ii / n),
/// SE(var_i) = Sigma_ii sqrt(2 / (n - 1)).
inline MomentCheck moment_check(const MatrixXd& samples, const GaussianDist& target) {
    if (samples.cols() != target.dim())
        throw ShapeError("moment_check: sample dimension", static_cast<std::size_t>(target.dim()),
                         static_cast<std::size_t>(samples.cols()));
    if (samples.rows() < 2) throw PreconditionError("moment_check needs at least 2 samples");
    MomentCheck r;
    r.n = samples.rows();
    const double n = static_cast<double>(r.n);
    r.sample_mean = samples.colwise().mean().transpose();
    const MatrixXd centered = samples.rowwise() - r.sample_mean.transpose();
    r.sample_cov = centered.transpose() * centered / (n - 1.0);
    r.var_excess_z.resize(target.dim());
    for (Index i = 0; i < target.dim(); ++i) {
        const double var = target.cov(i, i);
        const double se_mean = std::sqrt(std::max(var, 0.0) / n);
        const double err = std::abs(r.sample_mean[i] - target.mean[i]);
        r.max_mean_z = std::max(r.max_mean_z, se_mean > 0 ? err / se_mean : (err > 0 ? INFINITY : 0.0));
        const double se_var = var * std::sqrt(2.0 / (n - 1.0));
        r.var_excess_z[i] = se_var > 0 ? (r.sample_cov(i, i) - var) / se_var : 0.0;
    }
    const double denom = target.cov.norm();
    r.rel_cov_frobenius = denom > 0 ? (r.sample_cov - target.cov).norm() / denom : r.sample_cov.norm();
    return r;
}

// ---------------------------------------------------------------------------
// Seeded random instances for verification runs

struct LinearInstance {
    LinearGaussianModel model;
    MatrixXd output_features;  // M x P with M <= P
};

/// A random linear-Gaussian problem with 1 <= P <= max_params and
/// 0 <= N <= max_obs. The prior covariance is a random SPD matrix, the
/// observations come from a prior draw plus noise.
inline LinearInstance random_linear_instance(std::uint64_t seed, int max_params = 5, int max_obs = 30, int min_obs = 1) {
    Rng rng(seed);
    std::uniform_int_distribution<int> pdist(1, max_params);
    std::uniform_int_distribution<int> ndist(min_obs, max_obs);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int p = pdist(rng);
    const int n = ndist(rng);
    LinearInstance inst;
    auto& m = inst.model;
    const MatrixXd a = standard_normal_matrix(p, p, rng);
    m.prior.cov = detail::symmetrize(a * a.transpose() / p + 0.3 * MatrixXd::Identity(p, p));
    m.prior.mean = 0.5 * standard_normal_vector(p, rng);
    m.design = standard_normal_matrix(n, p, rng);
    m.noise_std = 0.3 + 1.2 * unif(rng);
    const VectorXd theta = GaussianSampler(m.prior)(rng);
    m.y_obs = m.design * theta + m.noise_std * standard_normal_vector(n, rng);
    std::uniform_int_distribution<int> mdist(1, p);
    inst.output_features = standard_normal_matrix(mdist(rng), p, rng);
    return inst;
}

}  // namespace gpnkit
