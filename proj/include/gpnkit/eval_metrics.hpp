#pragma once

// Uncertainty metrics over sets of sampled function outputs: empirical
// confidence intervals, posterior-variance OOD scores with ROC/AUC, mean
// predictive entropy, and std-profile comparison between two samplers.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "errors.hpp"

namespace gpnkit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

enum class SampleKind { regression_values, class_probabilities, logits };

/// S sampled functions evaluated at N inputs with C outputs each;
/// draws[s] is the N x C matrix of sample s.
struct PosteriorSampleSet {
    std::vector<MatrixXd> draws;
    SampleKind kind = SampleKind::regression_values;

    Index num_samples() const { return static_cast<Index>(draws.size()); }
    Index num_inputs() const { return draws.empty() ? 0 : draws.front().rows(); }
    Index num_outputs() const { return draws.empty() ? 0 : draws.front().cols(); }

    void validate() const {
        for (const auto& d : draws) {
            if (d.rows() != num_inputs() || d.cols() != num_outputs())
                throw ShapeError("PosteriorSampleSet draws must share one shape", static_cast<std::size_t>(num_inputs()),
                                 static_cast<std::size_t>(d.rows()));
            if (kind == SampleKind::class_probabilities) {
                if (d.minCoeff() < 0.0) throw PreconditionError("class probabilities must be nonnegative");
                if (((d.rowwise().sum().array() - 1.0).abs() > 1e-6).any())
                    throw PreconditionError("class probability rows must sum to 1");
            }
        }
    }

    /// Samples at input n, output c, as a vector of length S.
    VectorXd column(Index n, Index c = 0) const {
        VectorXd v(num_samples());
        for (Index s = 0; s < num_samples(); ++s) v[s] = draws[static_cast<std::size_t>(s)](n, c);
        return v;
    }

    MatrixXd mean() const {
        if (draws.empty()) return {};
        MatrixXd m = MatrixXd::Zero(num_inputs(), num_outputs());
        for (const auto& d : draws) m += d;
        return m / static_cast<double>(draws.size());
    }

    /// Unbiased (n-1) per-entry sample variance, N x C.
    MatrixXd variance() const {
        if (num_samples() < 2) throw PreconditionError("variance needs at least 2 samples");
        const MatrixXd mu = mean();
        MatrixXd v = MatrixXd::Zero(num_inputs(), num_outputs());
        for (const auto& d : draws) v += (d - mu).cwiseAbs2();
        return v / static_cast<double>(num_samples() - 1);
    }

    MatrixXd stddev() const { return variance().cwiseSqrt(); }
};

inline MatrixXd softmax_rows(const MatrixXd& logits) {
    MatrixXd p(logits.rows(), logits.cols());
    for (Index i = 0; i < logits.rows(); ++i) {
        const double mx = logits.row(i).maxCoeff();
        p.row(i) = (logits.row(i).array() - mx).exp();
        p.row(i) /= p.row(i).sum();
    }
    return p;
}

inline PosteriorSampleSet to_probabilities(const PosteriorSampleSet& logits) {
    if (logits.kind != SampleKind::logits) throw PreconditionError("to_probabilities expects logits");
    PosteriorSampleSet out;
    out.kind = SampleKind::class_probabilities;
    for (const auto& d : logits.draws) out.draws.push_back(softmax_rows(d));
    return out;
}

/// Value at fractional position h of an already sorted sample.
inline double interpolate_sorted(const std::vector<double>& sorted, double h) {
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Empirical quantile with linear interpolation between order statistics:
/// position h = (n-1) q on the sorted sample.
inline double quantile_linear(std::vector<double> values, double q) {
    if (values.empty()) throw PreconditionError("quantile of empty sample");
    std::sort(values.begin(), values.end());
    return interpolate_sorted(values, (static_cast<double>(values.size()) - 1.0) * q);
}

struct CiReport {
    double mean_width = 0.0;
    double ci_correct = 0.0;
    double level = 0.95;
    MatrixXd lower;  // N x C
    MatrixXd upper;
};

inline CiReport confidence_intervals(const PosteriorSampleSet& set, const MatrixXd& y_true, double level = 0.95) {
    if (set.kind != SampleKind::regression_values) throw PreconditionError("confidence_intervals expects regression values");
    if (set.num_samples() < 2) throw PreconditionError("confidence_intervals needs at least 2 samples");
    if (!(level > 0.0 && level < 1.0)) throw PreconditionError("confidence level must lie in (0, 1)");
    if (y_true.rows() != set.num_inputs() || y_true.cols() != set.num_outputs())
        throw ShapeError("confidence_intervals: y_true rows", static_cast<std::size_t>(set.num_inputs()),
                         static_cast<std::size_t>(y_true.rows()));
    CiReport r;
    r.level = level;
    r.lower.resize(set.num_inputs(), set.num_outputs());
    r.upper.resize(set.num_inputs(), set.num_outputs());
    std::size_t inside = 0;
    double width = 0.0;
    std::vector<double> buf(static_cast<std::size_t>(set.num_samples()));
    // the lower position mirrors the upper one, so 1 - level never loses bits
    const double last = static_cast<double>(set.num_samples()) - 1.0;
    const double h_hi = last * (1.0 + level) / 2.0, h_lo = last - h_hi;
    for (Index n = 0; n < set.num_inputs(); ++n) {
        for (Index c = 0; c < set.num_outputs(); ++c) {
            for (Index s = 0; s < set.num_samples(); ++s) buf[static_cast<std::size_t>(s)] = set.draws[static_cast<std::size_t>(s)](n, c);
            std::sort(buf.begin(), buf.end());
            const double lo = interpolate_sorted(buf, h_lo);
            const double hi = interpolate_sorted(buf, h_hi);
            r.lower(n, c) = lo;
            r.upper(n, c) = hi;
            width += hi - lo;
            if (y_true(n, c) >= lo && y_true(n, c) <= hi) ++inside;
        }
    }
    const double count = static_cast<double>(set.num_inputs() * set.num_outputs());
    r.mean_width = count > 0 ? width / count : 0.0;
    r.ci_correct = count > 0 ? static_cast<double>(inside) / count : 0.0;
    return r;
}

/// Per-input sample variance summed over outputs (probabilities for
/// classification sets).
inline VectorXd variance_score(const PosteriorSampleSet& set) {
    if (set.num_samples() < 2) throw PreconditionError("variance_score needs at least 2 samples");
    if (set.kind == SampleKind::logits) return variance_score(to_probabilities(set));
    return set.variance().rowwise().sum();
}

struct OodReport {
    double auc = 0.5;
    std::vector<std::pair<double, double>> roc_points;  // (fpr, tpr)
};

/// AUC = P(ood > in) + 1/2 P(ood == in), computed from midranks; the ROC
/// curve comes from sweeping a threshold down through the distinct scores.
inline OodReport ood_auc(const std::vector<double>& in_scores, const std::vector<double>& ood_scores) {
    if (in_scores.empty() || ood_scores.empty()) throw PreconditionError("ood_auc needs non-empty score sets");
    struct Item {
        double score;
        bool ood;
    };
    std::vector<Item> items;
    items.reserve(in_scores.size() + ood_scores.size());
    for (double s : in_scores) items.push_back({s, false});
    for (double s : ood_scores) items.push_back({s, true});
    std::sort(items.begin(), items.end(), [](const Item& a, const Item& b) { return a.score < b.score; });

    // Mann-Whitney U from midranks, doubled to stay in integers.
    long double rank2_sum = 0;
    for (std::size_t i = 0; i < items.size();) {
        std::size_t j = i;
        while (j < items.size() && items[j].score == items[i].score) ++j;
        const long double midrank2 = static_cast<long double>(i + 1 + j);  // 2 * average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (items[k].ood) rank2_sum += midrank2;
        i = j;
    }
    const long double n_ood = ood_scores.size(), n_in = in_scores.size();
    const long double u2 = rank2_sum - n_ood * (n_ood + 1);
    OodReport r;
    r.auc = static_cast<double>(u2 / (2.0L * n_ood * n_in));

    r.roc_points.emplace_back(0.0, 0.0);
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = items.size(); i > 0;) {
        std::size_t j = i;
        while (j > 0 && items[j - 1].score == items[i - 1].score) {
            --j;
            if (items[j].ood) ++tp; else ++fp;
        }
        r.roc_points.emplace_back(static_cast<double>(fp) / static_cast<double>(n_in),
                                  static_cast<double>(tp) / static_cast<double>(n_ood));
        i = j;
    }
    return r;
}

inline OodReport ood_auc(const VectorXd& in_scores, const VectorXd& ood_scores) {
    return ood_auc(std::vector<double>(in_scores.data(), in_scores.data() + in_scores.size()),
                   std::vector<double>(ood_scores.data(), ood_scores.data() + ood_scores.size()));
}

/// Dataset mean of the entropy (natural log) of the sample-averaged
/// class probabilities.
inline double mean_entropy(const PosteriorSampleSet& set) {
    if (set.kind != SampleKind::class_probabilities) throw PreconditionError("mean_entropy expects class probabilities");
    if (set.num_samples() < 1 || set.num_inputs() < 1) throw PreconditionError("mean_entropy on empty sample set");
    const MatrixXd pbar = set.mean();
    double total = 0.0;
    for (Index n = 0; n < pbar.rows(); ++n) {
        double h = 0.0;
        for (Index c = 0; c < pbar.cols(); ++c) {
            const double p = pbar(n, c);
            if (p > 0.0) h -= p * std::log(p);
        }
        total += h;
    }
    return total / static_cast<double>(pbar.rows());
}

struct OracleComparison {
    double std_correlation = 0.0;
    double mean_abs_std_gap = 0.0;
    Index excluded = 0;  // points with zero std in either set
};

inline double pearson(const VectorXd& a, const VectorXd& b) {
    const VectorXd da = a.array() - a.mean();
    const VectorXd db = b.array() - b.mean();
    const double denom = std::sqrt(da.squaredNorm() * db.squaredNorm());
    return denom > 0 ? da.dot(db) / denom : 0.0;
}

/// Compares per-point sample std between two sample sets on the same inputs.
inline OracleComparison oracle_compare(const PosteriorSampleSet& a, const PosteriorSampleSet& b) {
    if (a.num_inputs() != b.num_inputs())
        throw ShapeError("oracle_compare: input counts", static_cast<std::size_t>(a.num_inputs()),
                         static_cast<std::size_t>(b.num_inputs()));
    if (a.num_outputs() != b.num_outputs())
        throw ShapeError("oracle_compare: output counts", static_cast<std::size_t>(a.num_outputs()),
                         static_cast<std::size_t>(b.num_outputs()));
    const MatrixXd sa = a.stddev(), sb = b.stddev();
    const Eigen::Map<const VectorXd> va(sa.data(), sa.size()), vb(sb.data(), sb.size());
    OracleComparison r;
    r.mean_abs_std_gap = (va - vb).cwiseAbs().mean();
    std::vector<double> xa, xb;
    for (Index i = 0; i < va.size(); ++i) {
        if (va[i] > 0.0 && vb[i] > 0.0) {
            xa.push_back(va[i]);
            xb.push_back(vb[i]);
        } else {
            ++r.excluded;
        }
    }
    if (xa.size() >= 2)
        r.std_correlation = pearson(Eigen::Map<VectorXd>(xa.data(), static_cast<Index>(xa.size())),
                                    Eigen::Map<VectorXd>(xb.data(), static_cast<Index>(xb.size())));
    return r;
}

}  // namespace gpnkit
