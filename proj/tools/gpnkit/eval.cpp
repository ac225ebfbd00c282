#include "checkpoint.hpp"
#include "commands.hpp"

namespace gpnkit::cli {

namespace {

json eval_defaults() {
    return json{{"checkpoint", ""}, {"samples", 100}, {"level", 0.95}, {"grid_points", 200}, {"seed", nullptr}};
}

json load_eval_config(const GlobalOptions& g, const EvalOptions& e) {
    json user = g.config.empty() ? json::object() : read_json_file(g.config);
    if (!user.is_object()) throw ConfigError("eval config must be a JSON object");
    json cfg = eval_defaults();
    for (auto it = user.begin(); it != user.end(); ++it) {
        if (!cfg.contains(it.key())) throw ConfigError("unknown eval config key '" + it.key() + "'");
        cfg[it.key()] = it.value();
    }
    if (!e.checkpoint.empty()) cfg["checkpoint"] = e.checkpoint;
    if (g.seed) cfg["seed"] = *g.seed;
    if (get<std::string>(cfg, "checkpoint").empty()) throw ConfigError("eval needs a checkpoint (--checkpoint or \"checkpoint\")");
    const double level = get<double>(cfg, "level");
    if (!(level > 0 && level < 1)) throw ConfigError("level must lie in (0, 1)");
    if (get<int>(cfg, "samples") < 2) throw ConfigError("samples must be >= 2");
    if (get<int>(cfg, "grid_points") < 2) throw ConfigError("grid_points must be >= 2");
    return cfg;
}

class Predictor {
public:
    Predictor(const Checkpoint& c, int samples, std::uint64_t seed) : c_(c), samples_(samples), seed_(seed) {}

    PosteriorSampleSet operator()(const MatrixXd& x) const {
        if (c_.gpn) return sample_posterior(*c_.gpn, x, samples_, seed_);
        return ensemble_predict(*c_.ensemble, x);
    }

    int size() const { return c_.gpn ? samples_ : static_cast<int>(c_.ensemble->members.size()); }

private:
    const Checkpoint& c_;
    int samples_;
    std::uint64_t seed_;
};

PosteriorSampleSet first_draws(const PosteriorSampleSet& s, int m) {
    PosteriorSampleSet out;
    out.kind = s.kind;
    out.draws.assign(s.draws.begin(), s.draws.begin() + m);
    return out;
}

double seconds_of(const Checkpoint& c, int units) {
    if (c.timing.values.rows() == 0) return NAN;
    const Index col = c.timing.column("seconds");
    double total = 0.0;
    for (Index i = 0; i < std::min<Index>(units, c.timing.values.rows()); ++i) total += c.timing.values(i, col);
    return total;
}

struct Metrics {
    std::string text = "metric,value\n";
    void add(const std::string& name, double v) { text += name + "," + num(v) + "\n"; }
};

void eval_sine(const Checkpoint& c, const Problem& p, const Predictor& predict, const json& ecfg, const std::string& dir,
               Metrics& metrics) {
    const int grid = get<int>(ecfg, "grid_points");
    const double level = get<double>(ecfg, "level");
    const MatrixXd x = VectorXd::LinSpaced(grid, p.x_lo, p.x_hi);
    const MatrixXd truth = x.unaryExpr([](double v) { return std::sin(kSineFrequency * v); });
    const auto set = predict(x);
    const auto ci = confidence_intervals(set, truth, level);
    const MatrixXd mean = set.mean(), sd = set.stddev();

    std::string band = "x,mean,lower,upper,std,truth\n";
    for (Index i = 0; i < grid; ++i)
        band += num(x(i, 0)) + "," + num(mean(i, 0)) + "," + num(ci.lower(i, 0)) + "," + num(ci.upper(i, 0)) + "," +
                num(sd(i, 0)) + "," + num(truth(i, 0)) + "\n";
    write_file(fs::path(dir) / "posterior_band.csv", band);

    std::string obs = "x,y\n";
    for (Index i = 0; i < p.train.size(); ++i) obs += num(p.train.x(i, 0)) + "," + num(p.train.y(i, 0)) + "\n";
    write_file(fs::path(dir) / "observations.csv", obs);

    const double lo = p.train.x.minCoeff(), hi = p.train.x.maxCoeff();
    double inside = 0.0, outside = 0.0;
    int n_in = 0, n_out = 0;
    for (Index i = 0; i < grid; ++i) {
        if (x(i, 0) >= lo && x(i, 0) <= hi) inside += sd(i, 0), ++n_in;
        else outside += sd(i, 0), ++n_out;
    }
    metrics.add("mean_std_within_observations", n_in ? inside / n_in : NAN);
    metrics.add("mean_std_outside_observations", n_out ? outside / n_out : NAN);
    metrics.add("ci_width", ci.mean_width);
    metrics.add("ci_coverage_of_noise_free_curve", ci.ci_correct);
    metrics.add("rmse_to_noise_free_curve", std::sqrt((mean - truth).array().square().mean()));
    metrics.add("posterior_samples", predict.size());
    metrics.add("train_seconds", seconds_of(c, c.gpn ? 1 : predict.size()));
}

void eval_tabular(const Checkpoint& c, const Problem& p, const Predictor& predict, const json& ecfg, const std::string& dir,
                  Metrics& metrics) {
    if (p.in_test.size() < 1 || p.ood_test.size() < 1)
        throw DataError("the test split needs rows on both sides of the threshold");
    const double level = get<double>(ecfg, "level");
    const auto in = predict(p.in_test.x), ood = predict(p.ood_test.x);
    const auto roc = ood_auc(variance_score(in), variance_score(ood));
    const auto ci = confidence_intervals(in, p.in_test.y, level);
    const double rmse = std::sqrt((in.mean() - p.in_test.y).array().square().mean());

    metrics.add("ood_auc", roc.auc);
    metrics.add("ci_width", ci.mean_width);
    metrics.add("ci_correct", ci.ci_correct);
    metrics.add("rmse", rmse);
    metrics.add("rmse_raw_units", rmse * p.scaler.std);
    metrics.add("ci_width_over_rmse", ci.mean_width / rmse);
    metrics.add("in_test_rows", static_cast<double>(p.in_test.size()));
    metrics.add("ood_test_rows", static_cast<double>(p.ood_test.size()));
    metrics.add("posterior_samples", predict.size());
    metrics.add("train_seconds", seconds_of(c, c.gpn ? 1 : predict.size()));

    std::string roc_csv = "fpr,tpr\n";
    for (const auto& [f, t] : roc.roc_points) roc_csv += num(f) + "," + num(t) + "\n";
    write_file(fs::path(dir) / "roc.csv", roc_csv);

    // AUC against training compute; an ensemble contributes one row per prefix
    std::string scaling = "samples,seconds,auc\n";
    if (c.gpn) {
        scaling += std::to_string(predict.size()) + "," + num(seconds_of(c, 1)) + "," + num(roc.auc) + "\n";
    } else {
        for (int m = 2; m <= predict.size(); ++m) {
            const double auc = ood_auc(variance_score(first_draws(in, m)), variance_score(first_draws(ood, m))).auc;
            scaling += std::to_string(m) + "," + num(seconds_of(c, m)) + "," + num(auc) + "\n";
        }
    }
    write_file(fs::path(dir) / "scaling.csv", scaling);
}

}  // namespace

int run_eval(const GlobalOptions& g, const EvalOptions& e) {
    const json ecfg = load_eval_config(g, e);
    const Checkpoint c = load_checkpoint(get<std::string>(ecfg, "checkpoint"));
    const Problem p = build_problem(c.config);
    if (p.inputs != c.manifest.at("inputs")) throw DataError("dataset contents changed since training (hash mismatch)");
    const std::uint64_t seed = ecfg.at("seed").is_null() ? derive_seed(c.seed, {9}) : get<std::uint64_t>(ecfg, "seed");
    const Predictor predict(c, get<int>(ecfg, "samples"), seed);
    const std::string dir = prepare_out_dir(g.out);

    Metrics metrics;
    if (p.sine) eval_sine(c, p, predict, ecfg, dir, metrics);
    else eval_tabular(c, p, predict, ecfg, dir, metrics);
    write_file(fs::path(dir) / "metrics.csv", metrics.text);
    std::cout << metrics.text;
    return 0;
}

}  // namespace gpnkit::cli
