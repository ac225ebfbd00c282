#pragma once

// Anchored ensembles. Each member is trained to its own anchor: either a
// parameter-space anchor drawn from the prior (PR, regularizer
// sigma^2 (theta - theta_anc)^T Sigma_prior^{-1} (theta - theta_anc) / N) or a
// frozen prior network whose outputs on unlabeled inputs the member is pulled
// towards (OR, regularizer beta * mean ||delta||^2).

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>
#include <vector>

#include "data_io.hpp"
#include "eval_metrics.hpp"
#include "nn_core.hpp"
#include "prior.hpp"
#include "random.hpp"

namespace gpnkit {

enum class Regularization { parameter, output };

struct LossAndGrad {
    double loss = 0.0;
    VectorXd grad;
};

namespace detail {

/// mean_i ||y_i - f_i||^2 and its gradient with respect to f.
inline double mse_term(const MatrixXd& pred, const MatrixXd& y, MatrixXd& grad_out) {
    if (pred.rows() == 0) {
        grad_out.resize(0, pred.cols());
        return 0.0;
    }
    const MatrixXd r = pred - y;
    const double n = static_cast<double>(pred.rows());
    grad_out = 2.0 * r / n;
    return r.squaredNorm() / n;
}

inline void check_finite_loss(double loss, const char* what) {
    if (!std::isfinite(loss)) throw NumericalError(std::string(what) + ": non-finite loss", 0);
}

}  // namespace detail

/// PR member loss: MSE + sigma^2 (theta - anchor)^T diag(prior_var)^{-1} (theta - anchor) / n_total.
/// `n_total` is the size of the full labeled set (the regularizer is a
/// per-dataset term, not a per-batch one); 0 means "use the batch size".
inline LossAndGrad pr_member_loss(const ParamVector& member, const ParamVector& anchor, const MatrixXd& x,
                                  const MatrixXd& y, double noise_std, const VectorXd& prior_var,
                                  Index n_total = 0) {
    if (member.size() != anchor.size())
        throw ShapeError("pr_member_loss: anchor length", static_cast<std::size_t>(member.size()),
                         static_cast<std::size_t>(anchor.size()));
    if (prior_var.size() != member.size())
        throw ShapeError("pr_member_loss: prior variance length", static_cast<std::size_t>(member.size()),
                         static_cast<std::size_t>(prior_var.size()));
    if ((prior_var.array() <= 0.0).any()) throw PreconditionError("pr_member_loss needs strictly positive prior variances");
    LossAndGrad out;
    MatrixXd g_out;
    double data = 0.0;
    if (x.rows() > 0) {
        auto cache = forward_cached(member, x);
        data = detail::mse_term(cache.output(), y, g_out);
        out.grad = backward(member, cache, g_out).params.values;
    } else {
        out.grad = VectorXd::Zero(member.size());
    }
    const double n = static_cast<double>(std::max<Index>(n_total > 0 ? n_total : x.rows(), 1));
    const double coeff = noise_std * noise_std / n;
    const VectorXd diff = member.values - anchor.values;
    const VectorXd scaled = diff.cwiseQuotient(prior_var);
    out.loss = data + coeff * diff.dot(scaled);
    out.grad += 2.0 * coeff * scaled;
    detail::check_finite_loss(out.loss, "pr_member_loss");
    return out;
}

inline LossAndGrad pr_member_loss(const ParamVector& member, const ParamVector& anchor, const MatrixXd& x,
                                  const MatrixXd& y, double noise_std, const PriorSpec& prior, Index n_total = 0) {
    return pr_member_loss(member, anchor, x, y, noise_std, prior_variances(prior, member.arch), n_total);
}

/// OR member loss: mean_i ||y_i - f(x_i)||^2 + beta mean_j ||f(xs_j) - anchor(xs_j)||^2.
inline LossAndGrad or_member_loss(const ParamVector& member, const ParamVector& anchor_net, const MatrixXd& x,
                                  const MatrixXd& y, const MatrixXd& x_sample, double beta) {
    if (beta > 0.0 && x_sample.rows() == 0) throw PreconditionError("or_member_loss: beta > 0 needs unlabeled samples");
    LossAndGrad out;
    out.grad = VectorXd::Zero(member.size());
    if (x.rows() > 0) {
        auto cache = forward_cached(member, x);
        MatrixXd g;
        out.loss += detail::mse_term(cache.output(), y, g);
        out.grad += backward(member, cache, g).params.values;
    }
    if (beta > 0.0) {
        auto cache = forward_cached(member, x_sample);
        const MatrixXd delta = cache.output() - forward(anchor_net, x_sample);
        const double m = static_cast<double>(x_sample.rows());
        out.loss += beta * delta.squaredNorm() / m;
        out.grad += backward(member, cache, 2.0 * beta * delta / m).params.values;
    }
    detail::check_finite_loss(out.loss, "or_member_loss");
    return out;
}

struct EnsembleConfig {
    int members = 10;
    MlpArchitecture member_arch;
    PriorSpec prior;  // prior over member parameters
    Regularization regularization = Regularization::parameter;
    double noise_std = 0.1;
    double beta = 0.1;  // OR only
    MlpArchitecture bootstrap_arch;  // OR anchors
    PriorSpec bootstrap_prior;
    double learning_rate = 1e-3;
    int labeled_batch = 64;
    int unlabeled_batch = 64;
    int threads = 1;

    bool classification() const { return member_arch.output == OutputActivation::softmax_deferred; }
};

struct EnsembleModel {
    std::vector<ParamVector> members;
    std::vector<ParamVector> anchors;  // fixed at creation
    EnsembleConfig config;
};

struct MemberResult {
    ParamVector member;
    ParamVector anchor;
    std::vector<double> epoch_loss;
};

/// Anchor of member `index`: a prior draw of the member architecture (PR)
/// or of the bootstrap architecture (OR). Depends only on (seed, index).
inline ParamVector member_anchor(const EnsembleConfig& cfg, std::uint64_t seed, int index) {
    const auto s = derive_seed(seed, {static_cast<std::uint64_t>(index), 1});
    return cfg.regularization == Regularization::parameter ? sample_prior_params(cfg.prior, cfg.member_arch, s)
                                                           : sample_prior_params(cfg.bootstrap_prior, cfg.bootstrap_arch, s);
}

namespace detail {

inline MatrixXd softmax_ce_grad(const MatrixXd& logits, const MatrixXd& onehot, double& loss) {
    const MatrixXd p = softmax_rows(logits);
    const double n = static_cast<double>(logits.rows());
    loss = 0.0;
    for (Index i = 0; i < logits.rows(); ++i)
        for (Index c = 0; c < logits.cols(); ++c)
            if (onehot(i, c) > 0.0) loss -= onehot(i, c) * std::log(std::max(p(i, c), 1e-300));
    loss /= n;
    return (p - onehot) / n;
}

}  // namespace detail

/// Trains one member from its anchor. PR members start at their anchor; OR
/// members start from their own prior draw. Uses only (seed, index)-derived
/// randomness, so members are independent of each other and of training order.
inline MemberResult train_member(const EnsembleConfig& cfg, const LabeledDataset& labeled, const UnlabeledPool& unlabeled,
                                 int epochs, std::uint64_t seed, int index) {
    MemberResult res;
    res.anchor = member_anchor(cfg, seed, index);
    res.member = cfg.regularization == Regularization::parameter
                     ? res.anchor
                     : sample_prior_params(cfg.prior, cfg.member_arch, derive_seed(seed, {static_cast<std::uint64_t>(index), 2}));
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(index), 3}));
    auto opt = OptimizerState::adam(cfg.learning_rate);
    const VectorXd prior_var = cfg.regularization == Regularization::parameter ? prior_variances(cfg.prior, cfg.member_arch)
                                                                                : VectorXd();
    const Index n = labeled.size();
    const Index batch = std::max<Index>(1, std::min<Index>(cfg.labeled_batch, std::max<Index>(n, 1)));
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    const bool classify = cfg.classification();
    try {
        for (int e = 0; e < epochs; ++e) {
            std::shuffle(order.begin(), order.end(), rng);
            double epoch_loss = 0.0;
            int steps = 0;
            for (Index start = 0; start < std::max<Index>(n, 1); start += batch) {
                const Index len = std::min(batch, n - start);
                MatrixXd xb(std::max<Index>(len, 0), labeled.input_dim()), yb(std::max<Index>(len, 0), labeled.output_dim());
                for (Index i = 0; i < len; ++i) {
                    xb.row(i) = labeled.x.row(order[static_cast<std::size_t>(start + i)]);
                    yb.row(i) = labeled.y.row(order[static_cast<std::size_t>(start + i)]);
                }
                LossAndGrad lg;
                if (cfg.regularization == Regularization::parameter) {
                    if (classify) {
                        lg.grad = VectorXd::Zero(res.member.size());
                        if (len > 0) {
                            auto cache = forward_cached(res.member, xb);
                            MatrixXd g = detail::softmax_ce_grad(cache.output(), yb, lg.loss);
                            lg.grad = backward(res.member, cache, g).params.values;
                        }
                        // Gaussian-likelihood-free classification: regularizer weight 1/N
                        const VectorXd diff = res.member.values - res.anchor.values;
                        const double coeff = 1.0 / static_cast<double>(std::max<Index>(n, 1));
                        lg.loss += coeff * diff.dot(diff.cwiseQuotient(prior_var));
                        lg.grad += 2.0 * coeff * diff.cwiseQuotient(prior_var);
                    } else {
                        lg = pr_member_loss(res.member, res.anchor, xb, yb, cfg.noise_std, prior_var, n);
                    }
                } else {
                    const MatrixXd xs = cfg.beta > 0.0 ? unlabeled.draw(cfg.unlabeled_batch, rng) : MatrixXd(0, labeled.input_dim());
                    if (classify) {
                        lg.grad = VectorXd::Zero(res.member.size());
                        if (len > 0) {
                            auto cache = forward_cached(res.member, xb);
                            MatrixXd g = detail::softmax_ce_grad(cache.output(), yb, lg.loss);
                            lg.grad = backward(res.member, cache, g).params.values;
                        }
                        auto reg = or_member_loss(res.member, res.anchor, MatrixXd(0, labeled.input_dim()),
                                                  MatrixXd(0, labeled.output_dim()), xs, cfg.beta);
                        lg.loss += reg.loss;
                        lg.grad += reg.grad;
                    } else {
                        lg = or_member_loss(res.member, res.anchor, xb, yb, xs, cfg.beta);
                    }
                }
                if (!std::isfinite(lg.loss)) throw NumericalError("non-finite loss at epoch " + std::to_string(e), static_cast<std::size_t>(e));
                optimizer_step(opt, res.member.values, lg.grad);
                epoch_loss += lg.loss;
                ++steps;
                if (n == 0) break;
            }
            res.epoch_loss.push_back(epoch_loss / std::max(steps, 1));
        }
    } catch (const NumericalError& err) {
        throw NumericalError::wrap("ensemble member " + std::to_string(index), err);
    }
    return res;
}

struct EnsembleTrainResult {
    EnsembleModel model;
    std::vector<std::vector<double>> epoch_loss;  // per member
};

/// Trains `cfg.members` members, in parallel when cfg.threads > 1. The
/// result does not depend on the thread count.
inline EnsembleTrainResult train_ensemble(const EnsembleConfig& cfg, const LabeledDataset& labeled,
                                          const UnlabeledPool& unlabeled, int epochs, std::uint64_t seed) {
    if (cfg.members < 1) throw PreconditionError("train_ensemble needs at least one member");
    cfg.prior.validate(cfg.member_arch);
    if (cfg.regularization == Regularization::output) cfg.bootstrap_prior.validate(cfg.bootstrap_arch);
    std::vector<MemberResult> results(static_cast<std::size_t>(cfg.members));
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (int i = next++; i < cfg.members; i = next++) {
            try {
                results[static_cast<std::size_t>(i)] = train_member(cfg, labeled, unlabeled, epochs, seed, i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int nthreads = std::clamp(cfg.threads, 1, cfg.members);
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);
    EnsembleTrainResult out;
    out.model.config = cfg;
    for (auto& r : results) {
        out.model.members.push_back(std::move(r.member));
        out.model.anchors.push_back(std::move(r.anchor));
        out.epoch_loss.push_back(std::move(r.epoch_loss));
    }
    return out;
}

/// One posterior sample per member. Classification members return
/// probabilities (softmax of their logits).
inline PosteriorSampleSet ensemble_predict(const EnsembleModel& model, const MatrixXd& x) {
    PosteriorSampleSet set;
    const bool classify = !model.members.empty() && model.members.front().arch.output == OutputActivation::softmax_deferred;
    set.kind = classify ? SampleKind::class_probabilities : SampleKind::regression_values;
    for (const auto& m : model.members) set.draws.push_back(classify ? softmax_rows(forward(m, x)) : forward(m, x));
    return set;
}

}  // namespace gpnkit
