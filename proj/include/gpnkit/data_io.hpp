#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "errors.hpp"
#include "random.hpp"

namespace gpnkit {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Observations (x, y). Features may be z-scored; the statistics used are
/// kept so raw values can be recovered. Targets are never rescaled here.
struct LabeledDataset {
    MatrixXd x;  // N x D
    MatrixXd y;  // N x C
    VectorXd feature_mean;  // empty when not normalized
    VectorXd feature_std;
    std::vector<std::string> feature_names;
    std::string target_name;

    Index size() const { return x.rows(); }
    Index input_dim() const { return x.cols(); }
    Index output_dim() const { return y.cols(); }
    bool normalized() const { return feature_mean.size() > 0; }

    void validate() const {
        if (x.rows() != y.rows())
            throw ShapeError("LabeledDataset row counts", static_cast<std::size_t>(x.rows()), static_cast<std::size_t>(y.rows()));
        if (!x.allFinite() || !y.allFinite()) throw DataError("LabeledDataset contains non-finite values");
    }

    LabeledDataset rows(const std::vector<Index>& idx) const {
        LabeledDataset out;
        out.x.resize(static_cast<Index>(idx.size()), x.cols());
        out.y.resize(static_cast<Index>(idx.size()), y.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            out.x.row(static_cast<Index>(i)) = x.row(idx[i]);
            out.y.row(static_cast<Index>(i)) = y.row(idx[i]);
        }
        out.feature_mean = feature_mean;
        out.feature_std = feature_std;
        out.feature_names = feature_names;
        out.target_name = target_name;
        return out;
    }
};

struct FeatureStats {
    VectorXd mean;
    VectorXd std;
};

/// Column means and population stds; zero-variance columns get std 1 so the
/// transform stays finite.
inline FeatureStats feature_stats(const MatrixXd& x) {
    FeatureStats s;
    if (x.rows() == 0) throw DataError("cannot compute feature statistics of an empty matrix");
    s.mean = x.colwise().mean().transpose();
    s.std = ((x.rowwise() - s.mean.transpose()).cwiseAbs2().colwise().sum() / static_cast<double>(x.rows()))
                .cwiseSqrt()
                .transpose();
    for (Index j = 0; j < s.std.size(); ++j)
        if (!(s.std[j] > 0.0)) s.std[j] = 1.0;
    return s;
}

inline MatrixXd normalize_features(const MatrixXd& x, const FeatureStats& s) {
    return (x.rowwise() - s.mean.transpose()).array().rowwise() / s.std.transpose().array();
}

inline MatrixXd denormalize_features(const MatrixXd& z, const FeatureStats& s) {
    return (z.array().rowwise() * s.std.transpose().array()).matrix().rowwise() + s.mean.transpose();
}

/// Affine target scaling used while training; metrics are reported in the
/// scaled units.
struct TargetScaler {
    double mean = 0.0;
    double std = 1.0;

    static TargetScaler fit(const MatrixXd& y) {
        TargetScaler t;
        t.mean = y.mean();
        const double var = (y.array() - t.mean).square().mean();
        t.std = var > 0 ? std::sqrt(var) : 1.0;
        return t;
    }
    MatrixXd apply(const MatrixXd& y) const { return (y.array() - mean) / std; }
    MatrixXd invert(const MatrixXd& y) const { return y.array() * std + mean; }
};

// ---------------------------------------------------------------------------
// Unlabeled pools

struct BoxSource {
    VectorXd lo;
    VectorXd hi;
};

/// Source of unlabeled sample inputs: a uniform box or a fixed set of rows.
class UnlabeledPool {
public:
    UnlabeledPool() = default;

    static UnlabeledPool box(VectorXd lo, VectorXd hi) {
        if (lo.size() != hi.size())
            throw ShapeError("box bounds", static_cast<std::size_t>(lo.size()), static_cast<std::size_t>(hi.size()));
        if (lo.size() == 0) throw PreconditionError("box must have at least one dimension");
        for (Index i = 0; i < lo.size(); ++i)
            if (!(lo[i] < hi[i])) throw PreconditionError("box bounds need lo < hi in every dimension");
        UnlabeledPool p;
        p.source_ = BoxSource{std::move(lo), std::move(hi)};
        return p;
    }

    static UnlabeledPool rows(MatrixXd x, std::vector<std::pair<std::string, double>> proportions = {}) {
        if (x.rows() == 0) throw PreconditionError("unlabeled pool dataset must be non-empty");
        UnlabeledPool p;
        p.source_ = std::move(x);
        p.proportions_ = std::move(proportions);
        return p;
    }

    bool is_box() const { return std::holds_alternative<BoxSource>(source_); }
    bool empty() const {
        return std::holds_alternative<std::monostate>(source_);
    }
    Index dim() const {
        if (auto b = std::get_if<BoxSource>(&source_)) return b->lo.size();
        if (auto m = std::get_if<MatrixXd>(&source_)) return m->cols();
        return 0;
    }
    /// Number of stored rows (0 for a box).
    Index size() const {
        if (auto m = std::get_if<MatrixXd>(&source_)) return m->rows();
        return 0;
    }
    const MatrixXd& data() const { return std::get<MatrixXd>(source_); }
    const BoxSource& bounds() const { return std::get<BoxSource>(source_); }
    const std::vector<std::pair<std::string, double>>& proportions() const { return proportions_; }

    /// n inputs drawn uniformly (box) or uniformly with replacement (rows).
    MatrixXd draw(Index n, Rng& rng) const {
        if (auto b = std::get_if<BoxSource>(&source_)) {
            std::uniform_real_distribution<double> u(0.0, 1.0);
            MatrixXd out(n, b->lo.size());
            for (Index i = 0; i < n; ++i)
                for (Index j = 0; j < b->lo.size(); ++j) out(i, j) = b->lo[j] + (b->hi[j] - b->lo[j]) * u(rng);
            return out;
        }
        if (auto m = std::get_if<MatrixXd>(&source_)) {
            std::uniform_int_distribution<Index> pick(0, m->rows() - 1);
            MatrixXd out(n, m->cols());
            for (Index i = 0; i < n; ++i) out.row(i) = m->row(pick(rng));
            return out;
        }
        throw PreconditionError("drawing from an empty unlabeled pool");
    }

private:
    std::variant<std::monostate, BoxSource, MatrixXd> source_;
    std::vector<std::pair<std::string, double>> proportions_;
};

/// Pool of a dataset's feature rows (labels dropped).
inline UnlabeledPool build_unlabeled_pool(const LabeledDataset& ds) { return UnlabeledPool::rows(ds.x, {{"dataset", 1.0}}); }

inline UnlabeledPool build_unlabeled_pool(const VectorXd& lo, const VectorXd& hi) { return UnlabeledPool::box(lo, hi); }

/// Mixture of several datasets' feature rows in the given proportions,
/// without replacement. The largest total that honours the proportions is
/// used; the realized shares are recorded in the pool.
inline UnlabeledPool build_unlabeled_pool(const std::vector<const LabeledDataset*>& sources,
                                          const std::vector<double>& weights,
                                          const std::vector<std::string>& names, std::uint64_t seed) {
    if (sources.empty() || sources.size() != weights.size() || names.size() != sources.size())
        throw PreconditionError("pool mixture needs one weight and name per source");
    const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    double total = INFINITY;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        if (!(weights[i] > 0)) throw PreconditionError("pool mixture weights must be positive");
        total = std::min(total, static_cast<double>(sources[i]->size()) / (weights[i] / wsum));
    }
    Rng rng(seed);
    std::vector<Index> counts;
    Index rows = 0;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        counts.push_back(std::min<Index>(sources[i]->size(), static_cast<Index>(std::floor(total * weights[i] / wsum + 1e-9))));
        rows += counts.back();
    }
    if (rows == 0) throw PreconditionError("pool mixture is empty");
    MatrixXd x(rows, sources.front()->input_dim());
    std::vector<std::pair<std::string, double>> props;
    Index at = 0;
    for (std::size_t i = 0; i < sources.size(); ++i) {
        if (sources[i]->input_dim() != x.cols())
            throw ShapeError("pool mixture feature dims", static_cast<std::size_t>(x.cols()),
                             static_cast<std::size_t>(sources[i]->input_dim()));
        std::vector<Index> perm(static_cast<std::size_t>(sources[i]->size()));
        std::iota(perm.begin(), perm.end(), Index{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        for (Index k = 0; k < counts[i]; ++k) x.row(at++) = sources[i]->x.row(perm[static_cast<std::size_t>(k)]);
        props.emplace_back(names[i], static_cast<double>(counts[i]) / static_cast<double>(rows));
    }
    return UnlabeledPool::rows(std::move(x), std::move(props));
}

// ---------------------------------------------------------------------------
// Sine task

inline constexpr double kSineFrequency = 3.14159265358979323846;

struct SineTask {
    LabeledDataset labeled;
    UnlabeledPool pool;
    double noise_std = 0.0;
    double x_lo = -2.0, x_hi = 2.0;
};

/// y = sin(pi x) + N(0, noise_std^2). Observation locations are uniform on
/// the central 75% of [x_lo, x_hi]; the unlabeled pool is the whole range.
inline SineTask make_sine_task(int n_obs = 6, double noise_std = 0.1, double x_lo = -2.0, double x_hi = 2.0,
                               std::uint64_t seed = 0) {
    if (n_obs < 1) throw PreconditionError("make_sine_task needs n_obs >= 1");
    if (!(x_lo < x_hi)) throw PreconditionError("make_sine_task needs x_lo < x_hi");
    Rng rng(seed);
    const double half = 0.375 * (x_hi - x_lo), mid = 0.5 * (x_lo + x_hi);
    std::uniform_real_distribution<double> u(mid - half, mid + half);
    std::normal_distribution<double> noise(0.0, 1.0);
    SineTask t;
    t.noise_std = noise_std;
    t.x_lo = x_lo;
    t.x_hi = x_hi;
    t.labeled.x.resize(n_obs, 1);
    t.labeled.y.resize(n_obs, 1);
    for (int i = 0; i < n_obs; ++i) {
        const double x = u(rng);
        t.labeled.x(i, 0) = x;
        t.labeled.y(i, 0) = std::sin(kSineFrequency * x) + noise_std * noise(rng);
    }
    t.labeled.feature_names = {"x"};
    t.labeled.target_name = "y";
    t.pool = UnlabeledPool::box(VectorXd::Constant(1, x_lo), VectorXd::Constant(1, x_hi));
    return t;
}

// ---------------------------------------------------------------------------
// CSV ingestion

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (char ch : line) {
        if (ch == '"') {
            quoted = !quoted;
        } else if (ch == ',' && !quoted) {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

inline bool parse_double(const std::string& s, double& out) {
    const std::string t = trim(s);
    if (t.empty()) return false;
    const char* first = t.data();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, t.data() + t.size(), out);
    return ec == std::errc() && ptr == t.data() + t.size() && std::isfinite(out);
}

}  // namespace detail

/// Reads a comma-separated file with a header row. Every column except
/// `target_column` becomes a feature; with `normalize`, features are
/// z-scored and the statistics are stored. Row order is preserved.
inline LabeledDataset load_csv(std::istream& in, const std::string& target_column, bool normalize = true) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("CSV is empty (header row required)");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF && static_cast<unsigned char>(line[1]) == 0xBB &&
        static_cast<unsigned char>(line[2]) == 0xBF)
        line.erase(0, 3);
    auto header = detail::split_csv_line(line);
    for (auto& h : header) h = detail::trim(h);
    const auto tgt = std::find(header.begin(), header.end(), target_column);
    if (tgt == header.end()) throw DataError("target column '" + target_column + "' not found in CSV header");
    const auto target_idx = static_cast<std::size_t>(tgt - header.begin());

    std::vector<double> values;
    std::size_t line_no = 1, rows = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty() || detail::trim(line) == "\r") continue;
        auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw DataError("malformed CSV row at line " + std::to_string(line_no) + ": expected " +
                            std::to_string(header.size()) + " fields, got " + std::to_string(fields.size()));
        for (std::size_t j = 0; j < fields.size(); ++j) {
            double v;
            if (!detail::parse_double(fields[j], v))
                throw DataError("non-numeric value '" + fields[j] + "' in column '" + header[j] + "' at line " +
                                std::to_string(line_no));
            values.push_back(v);
        }
        ++rows;
    }
    LabeledDataset ds;
    const auto cols = header.size();
    ds.x.resize(static_cast<Index>(rows), static_cast<Index>(cols - 1));
    ds.y.resize(static_cast<Index>(rows), 1);
    for (std::size_t i = 0; i < rows; ++i) {
        Index f = 0;
        for (std::size_t j = 0; j < cols; ++j) {
            const double v = values[i * cols + j];
            if (j == target_idx) ds.y(static_cast<Index>(i), 0) = v;
            else ds.x(static_cast<Index>(i), f++) = v;
        }
    }
    for (std::size_t j = 0; j < cols; ++j)
        if (j != target_idx) ds.feature_names.push_back(header[j]);
    ds.target_name = target_column;
    if (normalize && rows > 0) {
        const auto st = feature_stats(ds.x);
        ds.x = normalize_features(ds.x, st);
        ds.feature_mean = st.mean;
        ds.feature_std = st.std;
    }
    return ds;
}

inline LabeledDataset load_csv(const std::string& path, const std::string& target_column, bool normalize = true) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open CSV file '" + path + "'");
    return load_csv(in, target_column, normalize);
}

// ---------------------------------------------------------------------------
// Splits

enum class InSide { above, below };

struct SplitSpec {
    enum class Mode { target_threshold, random } mode = Mode::target_threshold;
    double threshold = 0.0;
    InSide in_side = InSide::above;
    double fraction = 0.5;
    std::uint64_t seed = 0;

    static SplitSpec by_target(double tau, InSide side = InSide::above) {
        if (!std::isfinite(tau)) throw PreconditionError("split threshold must be finite");
        SplitSpec s;
        s.mode = Mode::target_threshold;
        s.threshold = tau;
        s.in_side = side;
        return s;
    }
    static SplitSpec random(double fraction, std::uint64_t seed) {
        if (!(fraction > 0.0 && fraction < 1.0)) throw PreconditionError("random split fraction must lie in (0, 1)");
        SplitSpec s;
        s.mode = Mode::random;
        s.fraction = fraction;
        s.seed = seed;
        return s;
    }
};

struct SplitResult {
    LabeledDataset first;   // in-distribution / selected fraction
    LabeledDataset second;  // OOD / remainder
    std::vector<std::string> warnings;
};

/// Threshold mode: with in_side = above, rows with y >= tau are in
/// distribution; with below, rows with y < tau are. Random mode puts a
/// seeded `fraction` of rows (rounded) in `first`, preserving order.
inline SplitResult split_dataset(const LabeledDataset& ds, const SplitSpec& spec) {
    std::vector<Index> a, b;
    if (spec.mode == SplitSpec::Mode::target_threshold) {
        if (ds.output_dim() != 1) throw PreconditionError("target-threshold split needs a scalar regression target");
        for (Index i = 0; i < ds.size(); ++i) {
            const double y = ds.y(i, 0);
            const bool in = spec.in_side == InSide::above ? y >= spec.threshold : y < spec.threshold;
            (in ? a : b).push_back(i);
        }
    } else {
        std::vector<Index> perm(static_cast<std::size_t>(ds.size()));
        std::iota(perm.begin(), perm.end(), Index{0});
        Rng rng(spec.seed);
        std::shuffle(perm.begin(), perm.end(), rng);
        const auto k = static_cast<std::size_t>(std::llround(spec.fraction * static_cast<double>(ds.size())));
        std::vector<char> pick(static_cast<std::size_t>(ds.size()), 0);
        for (std::size_t i = 0; i < k; ++i) pick[static_cast<std::size_t>(perm[i])] = 1;
        for (Index i = 0; i < ds.size(); ++i) (pick[static_cast<std::size_t>(i)] ? a : b).push_back(i);
    }
    SplitResult r{ds.rows(a), ds.rows(b), {}};
    if (a.empty()) r.warnings.push_back("first side of split is empty");
    if (b.empty()) r.warnings.push_back("second side of split is empty");
    return r;
}

inline SplitResult split_by_target(const LabeledDataset& ds, const SplitSpec& spec) {
    if (spec.mode != SplitSpec::Mode::target_threshold) throw PreconditionError("split_by_target needs a threshold spec");
    return split_dataset(ds, spec);
}

}  // namespace gpnkit
