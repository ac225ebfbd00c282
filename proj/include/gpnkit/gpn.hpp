#pragma once

// Generative posterior network: a generator g(x, z; phi) trained so that
// z ~ N(0, I) yields approximate posterior function samples. Training pairs
// k learned embeddings z_j one-to-one with k frozen prior ("bootstrap")
// networks f(.; theta_j) and minimizes, per pair,
//
//   data(y, g(x_obs, z_j + eps)) + beta * mean ||g(x_s, z_j + eps) - f(x_s; theta_j)||^2
//     + kl_weight * sum_d KL(N(zbar_d, s_d^2) || N(0, 1))
//
// with x_s drawn from the unlabeled pool. The data term is the mean squared
// error for regression and softmax cross-entropy for classification; the
// anchor term always acts on pre-softmax outputs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <Eigen/Cholesky>
#include <numeric>
#include <string>
#include <vector>

#include "data_io.hpp"
#include "eval_metrics.hpp"
#include "nn_core.hpp"
#include "prior.hpp"
#include "random.hpp"

namespace gpnkit {

enum class Task { regression, classification };

enum class PairSchedule { uniform_random, full_sum };

enum class NoiseMode { per_step, per_pair };

/// Metric of the anchor term. `identity` treats the prior outputs at the
/// sample inputs as independent (beta * mean ||delta||^2). `prior_covariance`
/// keeps their correlations: beta * delta^T Sigma^{-1} delta / M, with Sigma
/// estimated from prior draws at the batch inputs, and delta also taken at
/// the labeled inputs.
enum class AnchorMetric { identity, prior_covariance };

struct GpnConfig {
    int k = 100;
    int embed_dim = 10;
    double beta = 0.1;
    double noise_scale = 0.1;
    MlpArchitecture bootstrap_arch;
    PriorSpec bootstrap_prior = PriorSpec::bootstrap_default();
    MlpArchitecture generator_arch;  // input width = data dim + embed_dim
    double noise_std = 0.1;          // observation noise sigma_eps (reporting)
    double kl_weight = 1.0;
    Task task = Task::regression;
    double learning_rate = 1e-3;
    double embed_learning_rate = 1e-2;
    int labeled_batch = 64;
    int unlabeled_batch = 64;
    PairSchedule schedule = PairSchedule::uniform_random;
    NoiseMode noise_mode = NoiseMode::per_step;
    AnchorMetric anchor_metric = AnchorMetric::identity;
    int covariance_draws = 0;         // extra prior draws for Sigma (0: bootstrap nets only)
    double covariance_jitter = 1e-3;  // added as jitter * mean(diag Sigma) * I
    int anchor_points = 512;          // fixed unlabeled inputs drawn once for prior_covariance

    int data_dim() const { return bootstrap_arch.input_dim(); }

    void validate() const {
        if (k < 1) throw ConfigError("GpnConfig.k must be >= 1");
        if (embed_dim < 1) throw ConfigError("GpnConfig.embed_dim must be >= 1");
        if (beta < 0 || noise_scale < 0 || kl_weight < 0) throw ConfigError("GpnConfig beta, noise_scale, kl_weight must be >= 0");
        if (!(noise_std > 0)) throw ConfigError("GpnConfig.noise_std must be positive");
        bootstrap_arch.validate();
        generator_arch.validate();
        bootstrap_prior.validate(bootstrap_arch);
        if (generator_arch.input_dim() != bootstrap_arch.input_dim() + embed_dim)
            throw ShapeError("generator input width (data dim + embed_dim)",
                             static_cast<std::size_t>(bootstrap_arch.input_dim() + embed_dim),
                             static_cast<std::size_t>(generator_arch.input_dim()));
        if (generator_arch.output_dim() != bootstrap_arch.output_dim())
            throw ShapeError("generator output width vs bootstrap output width",
                             static_cast<std::size_t>(bootstrap_arch.output_dim()),
                             static_cast<std::size_t>(generator_arch.output_dim()));
        if (learning_rate <= 0 || embed_learning_rate < 0) throw ConfigError("GpnConfig learning rates must be positive");
        if (labeled_batch < 1 || unlabeled_batch < 1) throw ConfigError("GpnConfig batch sizes must be >= 1");
        if (covariance_draws < 0 || !(covariance_jitter > 0) || anchor_points < 1) throw ConfigError("GpnConfig covariance settings are invalid");
    }
};

struct GpnModel {
    ParamVector generator;
    MatrixXd embeddings;                 // k x embed_dim, row j pairs with bootstrap[j]
    std::vector<ParamVector> bootstrap;  // frozen prior networks
    MatrixXd pair_noise;                 // k x embed_dim, used with NoiseMode::per_pair
    std::vector<ParamVector> covariance_bank;  // extra frozen prior draws, AnchorMetric::prior_covariance only
    GpnConfig config;
};

/// Embeddings z_j ~ N(0, I), bootstrap networks from the bootstrap prior,
/// generator from the default initialization. Deterministic per seed.
inline GpnModel init_gpn(const GpnConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    GpnModel m;
    m.config = cfg;
    Rng emb_rng(derive_seed(seed, {1}));
    m.embeddings = standard_normal_matrix(cfg.k, cfg.embed_dim, emb_rng);
    for (int j = 0; j < cfg.k; ++j)
        m.bootstrap.push_back(sample_prior_params(cfg.bootstrap_prior, cfg.bootstrap_arch,
                                                  derive_seed(seed, {2, static_cast<std::uint64_t>(j)})));
    m.generator = init_params(cfg.generator_arch, derive_seed(seed, {3}));
    Rng noise_rng(derive_seed(seed, {4}));
    m.pair_noise = cfg.noise_scale * standard_normal_matrix(cfg.k, cfg.embed_dim, noise_rng);
    if (cfg.anchor_metric == AnchorMetric::prior_covariance)
        for (int j = 0; j < cfg.covariance_draws; ++j)
            m.covariance_bank.push_back(sample_prior_params(cfg.bootstrap_prior, cfg.bootstrap_arch,
                                                            derive_seed(seed, {5, static_cast<std::uint64_t>(j)})));
    return m;
}

/// Generator input: every row of x with z appended.
inline MatrixXd augment_inputs(const MatrixXd& x, const VectorXd& z) {
    MatrixXd in(x.rows(), x.cols() + z.size());
    in.leftCols(x.cols()) = x;
    in.rightCols(z.size()).rowwise() = z.transpose();
    return in;
}

/// g(x, z; phi) for every row of x; logits for classification.
inline MatrixXd gpn_forward(const GpnModel& model, const MatrixXd& x, const VectorXd& z) {
    if (z.size() != model.config.embed_dim)
        throw ShapeError("gpn_forward: z length", static_cast<std::size_t>(model.config.embed_dim),
                         static_cast<std::size_t>(z.size()));
    if (x.cols() != model.config.data_dim())
        throw ShapeError("gpn_forward: input columns", static_cast<std::size_t>(model.config.data_dim()),
                         static_cast<std::size_t>(x.cols()));
    return forward(model.generator, augment_inputs(x, z));
}

/// Prior network outputs at a fixed set of inputs: values[c](i, r) is
/// output c of prior draw i (bootstrap networks first, then the covariance
/// bank) at row r of `inputs`.
struct PriorOutputTable {
    MatrixXd inputs;
    std::vector<MatrixXd> values;
};

inline PriorOutputTable prior_output_table(const GpnModel& model, const MatrixXd& x) {
    std::vector<const ParamVector*> nets;
    for (const auto& b : model.bootstrap) nets.push_back(&b);
    for (const auto& b : model.covariance_bank) nets.push_back(&b);
    PriorOutputTable t;
    t.inputs = x;
    const Index c_out = model.config.bootstrap_arch.output_dim();
    t.values.assign(static_cast<std::size_t>(c_out), MatrixXd(static_cast<Index>(nets.size()), x.rows()));
    for (std::size_t i = 0; i < nets.size(); ++i) {
        const MatrixXd o = forward(*nets[i], x);
        for (Index c = 0; c < c_out; ++c) t.values[static_cast<std::size_t>(c)].row(static_cast<Index>(i)) = o.col(c).transpose();
    }
    return t;
}

/// Inverse of the sample covariance of the table columns `rows`, pooled over
/// output columns, with jitter * mean(diag) added to the diagonal.
inline MatrixXd prior_output_precision(const PriorOutputTable& table, const std::vector<Index>& rows, double jitter) {
    const Index draws = table.values.front().rows();
    if (draws < 2) throw PreconditionError("prior_output_precision needs at least 2 prior draws");
    const Index m = static_cast<Index>(rows.size());
    MatrixXd cov = MatrixXd::Zero(m, m);
    MatrixXd block(draws, m);
    for (const auto& v : table.values) {
        for (Index r = 0; r < m; ++r) block.col(r) = v.col(rows[static_cast<std::size_t>(r)]);
        block.rowwise() -= block.colwise().mean();
        cov.selfadjointView<Eigen::Lower>().rankUpdate(block.transpose());
    }
    cov = cov.selfadjointView<Eigen::Lower>();
    cov /= static_cast<double>((draws - 1) * static_cast<Index>(table.values.size()));
    cov.diagonal().array() += jitter * std::max(cov.diagonal().mean(), 1e-12);
    Eigen::LLT<MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) throw LinAlgError("prior output covariance is not positive definite");
    return llt.solve(MatrixXd::Identity(m, m));
}

/// Same, evaluated directly at the rows of x.
inline MatrixXd prior_output_precision(const GpnModel& model, const MatrixXd& x) {
    std::vector<Index> rows(static_cast<std::size_t>(x.rows()));
    std::iota(rows.begin(), rows.end(), Index{0});
    return prior_output_precision(prior_output_table(model, x), rows, model.config.covariance_jitter);
}

struct EmbeddingKl {
    double value = 0.0;
    MatrixXd grad;  // k x embed_dim
};

/// sum_d KL(N(zbar_d, s_d^2) || N(0, 1)) with the batch mean and population
/// std of the k embeddings. With k = 1 only the mean part is kept.
inline EmbeddingKl embedding_kl(const MatrixXd& z) {
    EmbeddingKl out;
    const double k = static_cast<double>(z.rows());
    out.grad = MatrixXd::Zero(z.rows(), z.cols());
    for (Index d = 0; d < z.cols(); ++d) {
        const double m = z.col(d).mean();
        if (z.rows() < 2) {
            out.value += 0.5 * m * m;
            out.grad.col(d).setConstant(m);
            continue;
        }
        const VectorXd c = z.col(d).array() - m;
        const double s2 = std::max(c.squaredNorm() / k, 1e-12);
        out.value += 0.5 * (s2 + m * m - 1.0 - std::log(s2));
        out.grad.col(d) = (VectorXd::Constant(z.rows(), m) + (1.0 - 1.0 / s2) * c) / k;
    }
    return out;
}

struct EmbeddingStats {
    VectorXd mean;  // per dimension
    VectorXd std;   // population std per dimension
};

inline EmbeddingStats embedding_stats(const MatrixXd& z) {
    EmbeddingStats s;
    s.mean = z.colwise().mean().transpose();
    s.std = ((z.rowwise() - s.mean.transpose()).cwiseAbs2().colwise().sum() / static_cast<double>(z.rows()))
                .cwiseSqrt()
                .transpose();
    return s;
}

struct GpnLoss {
    double loss = 0.0;
    double data_term = 0.0;
    double anchor_term = 0.0;
    double kl_term = 0.0;
    VectorXd grad_generator;
    VectorXd grad_z;            // d loss / d z_j (data + anchor + KL row j)
    MatrixXd grad_embeddings;   // KL gradient for all rows, plus grad_z on row j
};

/// Loss for pair j on one labeled batch and one unlabeled batch, with noise
/// `eps` added to z_j. Either batch may be empty; beta > 0 needs unlabeled rows.
/// With AnchorMetric::prior_covariance, `anchor_precision` must be the
/// precision over the stacked rows [x_obs; x_sample]; it is computed here when
/// null.
inline GpnLoss gpn_loss(const GpnModel& model, const MatrixXd& x_obs, const MatrixXd& y_obs, const MatrixXd& x_sample,
                        int j, const VectorXd& eps, const MatrixXd* anchor_precision = nullptr) {
    const auto& cfg = model.config;
    if (j < 0 || j >= cfg.k) throw PreconditionError("gpn_loss: pair index out of range");
    if (cfg.beta > 0.0 && x_sample.rows() == 0) throw PreconditionError("gpn_loss: beta > 0 needs unlabeled samples");
    if (x_obs.rows() != y_obs.rows())
        throw ShapeError("gpn_loss: y_obs rows", static_cast<std::size_t>(x_obs.rows()), static_cast<std::size_t>(y_obs.rows()));
    if (x_obs.rows() > 0 && y_obs.cols() != cfg.generator_arch.output_dim())
        throw ShapeError("gpn_loss: y_obs columns", static_cast<std::size_t>(cfg.generator_arch.output_dim()),
                         static_cast<std::size_t>(y_obs.cols()));
    const Index n_obs = x_obs.rows();
    const Index n_s = cfg.beta > 0.0 ? x_sample.rows() : 0;
    const Index d = cfg.data_dim();
    const VectorXd z = model.embeddings.row(j).transpose() + eps;

    MatrixXd x_all(n_obs + n_s, d);
    if (n_obs > 0) x_all.topRows(n_obs) = x_obs;
    if (n_s > 0) x_all.bottomRows(n_s) = x_sample;
    const MatrixXd input = augment_inputs(x_all, z);

    GpnLoss out;
    out.grad_embeddings = MatrixXd::Zero(cfg.k, cfg.embed_dim);
    if (input.rows() > 0) {
        auto cache = forward_cached(model.generator, input);
        const MatrixXd& g = cache.output();
        MatrixXd loss_grad(g.rows(), g.cols());
        if (n_obs > 0) {
            const MatrixXd g_obs = g.topRows(n_obs);
            const double n = static_cast<double>(n_obs);
            if (cfg.task == Task::regression) {
                const MatrixXd r = g_obs - y_obs;
                out.data_term = r.squaredNorm() / n;
                loss_grad.topRows(n_obs) = 2.0 * r / n;
            } else {
                const MatrixXd p = softmax_rows(g_obs);
                double ce = 0.0;
                for (Index i = 0; i < n_obs; ++i)
                    for (Index c = 0; c < p.cols(); ++c)
                        if (y_obs(i, c) > 0.0) ce -= y_obs(i, c) * std::log(std::max(p(i, c), 1e-300));
                out.data_term = ce / n;
                loss_grad.topRows(n_obs) = (p - y_obs) / n;
            }
        }
        if (n_s > 0 && cfg.anchor_metric == AnchorMetric::identity) {
            const MatrixXd delta = g.bottomRows(n_s) - forward(model.bootstrap[static_cast<std::size_t>(j)], x_sample);
            const double m = static_cast<double>(n_s);
            out.anchor_term = cfg.beta * delta.squaredNorm() / m;
            loss_grad.bottomRows(n_s) = 2.0 * cfg.beta * delta / m;
        } else if (n_s > 0) {
            MatrixXd local;
            if (!anchor_precision) local = prior_output_precision(model, x_all);
            const MatrixXd& prec = anchor_precision ? *anchor_precision : local;
            if (prec.rows() != x_all.rows())
                throw ShapeError("gpn_loss: anchor precision size", static_cast<std::size_t>(x_all.rows()),
                                 static_cast<std::size_t>(prec.rows()));
            const MatrixXd delta = g - forward(model.bootstrap[static_cast<std::size_t>(j)], x_all);
            const MatrixXd pd = prec * delta;
            const double m = static_cast<double>(x_all.rows());
            out.anchor_term = cfg.beta * (delta.array() * pd.array()).sum() / m;
            if (n_obs > 0) loss_grad.topRows(n_obs) += 2.0 * cfg.beta * pd.topRows(n_obs) / m;
            loss_grad.bottomRows(n_s) = 2.0 * cfg.beta * pd.bottomRows(n_s) / m;
        }
        auto grads = backward(model.generator, cache, loss_grad);
        out.grad_generator = std::move(grads.params.values);
        out.grad_z = grads.input.rightCols(cfg.embed_dim).colwise().sum().transpose();
    } else {
        out.grad_generator = VectorXd::Zero(model.generator.size());
        out.grad_z = VectorXd::Zero(cfg.embed_dim);
    }
    if (cfg.kl_weight > 0.0) {
        auto kl = embedding_kl(model.embeddings);
        out.kl_term = cfg.kl_weight * kl.value;
        out.grad_embeddings = cfg.kl_weight * kl.grad;
        out.grad_z += out.grad_embeddings.row(j).transpose();
    }
    out.grad_embeddings.row(j) = out.grad_z.transpose();
    out.loss = out.data_term + out.anchor_term + out.kl_term;
    return out;
}

struct GpnTrainLog {
    std::vector<double> epoch_loss;
    std::vector<double> epoch_anchor_term;
    std::int64_t steps = 0;
};

/// Optimizer state carried across train_gpn calls.
struct GpnTrainer {
    OptimizerState generator_opt;
    OptimizerState embedding_opt;
    Rng rng;
    PriorOutputTable table;  // labeled rows first, then anchor points (prior_covariance only)

    GpnTrainer(const GpnConfig& cfg, std::uint64_t seed)
        : generator_opt(OptimizerState::adam(cfg.learning_rate)),
          embedding_opt(OptimizerState::adam(cfg.embed_learning_rate)),
          rng(derive_seed(seed, {17})) {}
};

/// Runs `epochs` passes over the labeled data. Every step draws a pair
/// index (uniformly, or all pairs averaged with PairSchedule::full_sum), a
/// noise vector, a labeled minibatch and an unlabeled minibatch, and updates
/// the generator and the embeddings. Bootstrap networks are never touched.
inline GpnTrainLog train_gpn(GpnModel& model, GpnTrainer& trainer, const LabeledDataset& labeled,
                             const UnlabeledPool& unlabeled, int epochs) {
    const auto& cfg = model.config;
    if (labeled.size() > 0) {
        if (labeled.input_dim() != cfg.data_dim())
            throw ShapeError("train_gpn: labeled input dim", static_cast<std::size_t>(cfg.data_dim()),
                             static_cast<std::size_t>(labeled.input_dim()));
        if (cfg.task == Task::classification && labeled.output_dim() != cfg.generator_arch.output_dim())
            throw PreconditionError("train_gpn: classification task needs one-hot labels with one column per class");
        if (cfg.task == Task::regression && labeled.output_dim() != cfg.generator_arch.output_dim())
            throw PreconditionError("train_gpn: regression target width does not match the generator output");
    }
    if (cfg.beta > 0.0 && unlabeled.empty()) throw PreconditionError("train_gpn: beta > 0 needs an unlabeled pool");
    GpnTrainLog log;
    Rng& rng = trainer.rng;
    const Index n = labeled.size();
    const Index batch = std::max<Index>(1, std::min<Index>(cfg.labeled_batch, std::max<Index>(n, 1)));
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    std::uniform_int_distribution<int> pick(0, cfg.k - 1);
    const MatrixXd no_rows(0, cfg.data_dim());
    const bool use_cov = cfg.beta > 0.0 && cfg.anchor_metric == AnchorMetric::prior_covariance;
    if (use_cov && trainer.table.inputs.rows() != n + cfg.anchor_points) {
        MatrixXd inputs(n + cfg.anchor_points, cfg.data_dim());
        if (n > 0) inputs.topRows(n) = labeled.x;
        inputs.bottomRows(cfg.anchor_points) = unlabeled.draw(cfg.anchor_points, rng);
        trainer.table = prior_output_table(model, inputs);
    }
    std::vector<Index> anchor_order(static_cast<std::size_t>(use_cov ? cfg.anchor_points : 0));
    std::iota(anchor_order.begin(), anchor_order.end(), n);

    for (int e = 0; e < epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0, epoch_anchor = 0.0;
        int steps = 0;
        for (Index start = 0; start < std::max<Index>(n, 1); start += batch) {
            const Index len = std::max<Index>(0, std::min(batch, n - start));
            MatrixXd xb(len, cfg.data_dim()), yb(len, std::max<Index>(labeled.output_dim(), 1));
            for (Index i = 0; i < len; ++i) {
                xb.row(i) = labeled.x.row(order[static_cast<std::size_t>(start + i)]);
                yb.row(i) = labeled.y.row(order[static_cast<std::size_t>(start + i)]);
            }
            MatrixXd xs, precision;
            if (use_cov) {
                const Index m = std::min<Index>(cfg.unlabeled_batch, cfg.anchor_points);
                std::vector<Index> rows;
                for (Index i = 0; i < len; ++i) rows.push_back(order[static_cast<std::size_t>(start + i)]);
                for (Index i = 0; i < m; ++i) {
                    std::uniform_int_distribution<std::size_t> u(static_cast<std::size_t>(i), anchor_order.size() - 1);
                    std::swap(anchor_order[static_cast<std::size_t>(i)], anchor_order[u(rng)]);
                    rows.push_back(anchor_order[static_cast<std::size_t>(i)]);
                }
                xs.resize(m, cfg.data_dim());
                for (Index i = 0; i < m; ++i) xs.row(i) = trainer.table.inputs.row(rows[static_cast<std::size_t>(len + i)]);
                precision = prior_output_precision(trainer.table, rows, cfg.covariance_jitter);
            } else {
                xs = cfg.beta > 0.0 ? unlabeled.draw(cfg.unlabeled_batch, rng) : no_rows;
            }

            VectorXd grad_gen = VectorXd::Zero(model.generator.size());
            MatrixXd grad_emb = MatrixXd::Zero(cfg.k, cfg.embed_dim);
            double loss = 0.0, anchor = 0.0;
            auto accumulate = [&](int j, double weight) {
                VectorXd eps = cfg.noise_mode == NoiseMode::per_pair
                                   ? VectorXd(model.pair_noise.row(j).transpose())
                                   : VectorXd(cfg.noise_scale * standard_normal_vector(cfg.embed_dim, rng));
                auto l = gpn_loss(model, xb, yb, xs, j, eps, precision.size() > 0 ? &precision : nullptr);
                loss += weight * l.loss;
                anchor += weight * l.anchor_term;
                grad_gen += weight * l.grad_generator;
                grad_emb += weight * l.grad_embeddings;
            };
            if (cfg.schedule == PairSchedule::full_sum) {
                for (int j = 0; j < cfg.k; ++j) accumulate(j, 1.0 / cfg.k);
            } else {
                accumulate(pick(rng), 1.0);
            }
            if (!std::isfinite(loss))
                throw NumericalError("train_gpn: non-finite loss at step " + std::to_string(log.steps),
                                     static_cast<std::size_t>(log.steps));
            optimizer_step(trainer.generator_opt, model.generator.values, grad_gen);
            if (cfg.embed_learning_rate > 0.0) {
                Eigen::Map<VectorXd> emb(model.embeddings.data(), model.embeddings.size());
                Eigen::Map<const VectorXd> g(grad_emb.data(), grad_emb.size());
                optimizer_step(trainer.embedding_opt, emb, g);
            }
            epoch_loss += loss;
            epoch_anchor += anchor;
            ++steps;
            ++log.steps;
            if (n == 0) break;
        }
        log.epoch_loss.push_back(epoch_loss / std::max(steps, 1));
        log.epoch_anchor_term.push_back(epoch_anchor / std::max(steps, 1));
    }
    return log;
}

inline GpnTrainLog train_gpn(GpnModel& model, const LabeledDataset& labeled, const UnlabeledPool& unlabeled, int epochs,
                             std::uint64_t seed) {
    GpnTrainer trainer(model.config, seed);
    return train_gpn(model, trainer, labeled, unlabeled, epochs);
}

/// n_samples functions from z ~ N(0, I), evaluated at every row of x.
/// Classification samples are softmax probabilities.
inline PosteriorSampleSet sample_posterior(const GpnModel& model, const MatrixXd& x, int n_samples, std::uint64_t seed) {
    if (n_samples < 1) throw PreconditionError("sample_posterior needs n_samples >= 1");
    Rng rng(seed);
    PosteriorSampleSet set;
    const bool classify = model.config.task == Task::classification;
    set.kind = classify ? SampleKind::class_probabilities : SampleKind::regression_values;
    for (int s = 0; s < n_samples; ++s) {
        const VectorXd z = standard_normal_vector(model.config.embed_dim, rng);
        MatrixXd out = gpn_forward(model, x, z);
        set.draws.push_back(classify ? softmax_rows(out) : std::move(out));
    }
    return set;
}

}  // namespace gpnkit
