#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <json.hpp>

#include <gpnkit/gpnkit.hpp>

namespace gpnkit::cli {

using nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "gpnkit 1.0.0";

/// Raised when a verify suite's checks do not hold (exit status 5).
class VerificationFailure : public Error {
public:
    using Error::Error;
};

struct GlobalOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::string out;
};

/// Fills unset flags from GPNKIT_CONFIG, GPNKIT_SEED, GPNKIT_THREADS and
/// GPNKIT_OUT. Flags given on the command line win.
inline void apply_environment(GlobalOptions& g) {
    auto env = [](const char* name) -> std::optional<std::string> {
        const char* v = std::getenv(name);
        if (!v || !*v) return std::nullopt;
        return std::string(v);
    };
    try {
        if (g.config.empty())
            if (auto v = env("GPNKIT_CONFIG")) g.config = *v;
        if (!g.seed)
            if (auto v = env("GPNKIT_SEED")) g.seed = std::stoull(*v);
        if (!g.threads)
            if (auto v = env("GPNKIT_THREADS")) g.threads = std::stoi(*v);
        if (g.out.empty())
            if (auto v = env("GPNKIT_OUT")) g.out = *v;
    } catch (const std::logic_error&) {
        throw ConfigError("GPNKIT_SEED / GPNKIT_THREADS must be integers");
    }
}

// ---------------------------------------------------------------------------
// Defaults. Every key a config may set appears here; unknown keys are errors.

inline json default_prior_json() { return nullptr; }  // null: default_prior(arch)

inline json default_config() {
    return json{
        {"model", "gpn"},
        {"epochs", 100},
        {"seed", 0},
        {"threads", 1},
        {"data",
         {{"kind", "sine"},
          {"sine", {{"n_obs", 6}, {"noise_std", 0.1}, {"x_lo", -2.0}, {"x_hi", 2.0}, {"seed", 7}}},
          {"csv",
           {{"path", ""},
            {"target", "critical_temp"},
            {"threshold", 13.9},
            {"in_side", "above"},
            {"test_fraction", 0.2},
            {"split_seed", 1}}}}},
        {"noise_std", 0.1},
        {"gpn",
         {{"k", 100},
          {"embed_dim", 10},
          {"beta", 0.1},
          {"beta_grid", json::array()},
          {"validation_fraction", 0.1},
          {"noise_scale", 0.1},
          {"kl_weight", 1.0},
          {"learning_rate", 1e-3},
          {"embed_learning_rate", 1e-2},
          {"labeled_batch", 64},
          {"unlabeled_batch", 64},
          {"schedule", "uniform_random"},
          {"noise_mode", "per_step"},
          {"anchor_metric", "identity"},
          {"covariance_draws", 0},
          {"covariance_jitter", 1e-3},
          {"anchor_points", 512},
          {"generator", {{"hidden", {128, 128, 128}}, {"activation", "relu"}}},
          {"bootstrap",
           {{"hidden", {32}},
            {"activation", "tanh"},
            {"prior", {{"weight_variance", {40.0, 10.0}}, {"bias_variance", {40.0, 10.0}}, {"fan_in_scaled", false}}}}}}},
        {"ensemble",
         {{"members", 10},
          {"regularization", "parameter"},
          {"hidden", {128, 128, 128}},
          {"activation", "relu"},
          {"prior", default_prior_json()},
          {"beta", 0.1},
          {"learning_rate", 1e-3},
          {"labeled_batch", 64},
          {"unlabeled_batch", 64},
          {"bootstrap",
           {{"hidden", {32}},
            {"activation", "tanh"},
            {"prior", {{"weight_variance", {40.0, 10.0}}, {"bias_variance", {40.0, 10.0}}, {"fan_in_scaled", false}}}}}}},
    };
}

namespace detail {

inline void check_keys(const json& user, const json& defaults, const std::string& path) {
    if (!user.is_object()) return;
    for (auto it = user.begin(); it != user.end(); ++it) {
        const std::string key = path.empty() ? it.key() : path + "." + it.key();
        if (!defaults.is_object() || !defaults.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
        const json& d = defaults.at(it.key());
        if (d.is_object() && !it.value().is_object()) throw ConfigError("config key '" + key + "' must be an object");
        // priors may be replaced wholesale
        if (it.key() != "prior") check_keys(it.value(), d, key);
    }
}

}  // namespace detail

/// Merges a user config over the defaults. A manifest written by a previous
/// run is accepted too: its "config" member is used.
inline json resolve_config(json user) {
    if (user.contains("config") && user.contains("command")) user = user.at("config");
    if (!user.is_object()) throw ConfigError("config must be a JSON object");
    detail::check_keys(user, default_config(), "");
    json resolved = default_config();
    resolved.merge_patch(user);
    // merge_patch drops null members; keep the ensemble prior key present
    if (!resolved["ensemble"].contains("prior")) resolved["ensemble"]["prior"] = nullptr;
    return resolved;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("cannot parse '" + path + "': " + e.what());
    }
}

template <class T>
T get(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Conversions from resolved JSON

inline Activation parse_activation(const json& j) {
    try {
        return activation_from_string(j.get<std::string>());
    } catch (const std::exception& e) {
        throw ConfigError(std::string("bad activation: ") + e.what());
    }
}

inline MlpArchitecture network(int in, const json& spec, int out, OutputActivation oa = OutputActivation::identity) {
    std::vector<int> widths{in};
    for (const auto& h : spec.at("hidden")) widths.push_back(h.get<int>());
    widths.push_back(out);
    try {
        return MlpArchitecture(widths, parse_activation(spec.at("activation")), oa);
    } catch (const ShapeError& e) {
        throw ConfigError(e.what());
    }
}

inline PriorSpec prior_from_json(const json& j, const MlpArchitecture& arch) {
    if (j.is_null()) return default_prior(arch);
    PriorSpec p{get<std::vector<double>>(j, "weight_variance"), get<std::vector<double>>(j, "bias_variance"),
                j.value("fan_in_scaled", true)};
    try {
        p.validate(arch);
    } catch (const Error& e) {
        throw ConfigError(std::string("prior does not fit the network: ") + e.what());
    }
    return p;
}

inline GpnConfig gpn_config(const json& cfg, int data_dim, double beta) {
    const json& g = cfg.at("gpn");
    GpnConfig c;
    c.k = get<int>(g, "k");
    c.embed_dim = get<int>(g, "embed_dim");
    c.beta = beta;
    c.noise_scale = get<double>(g, "noise_scale");
    c.kl_weight = get<double>(g, "kl_weight");
    c.noise_std = get<double>(cfg, "noise_std");
    c.learning_rate = get<double>(g, "learning_rate");
    c.embed_learning_rate = get<double>(g, "embed_learning_rate");
    c.labeled_batch = get<int>(g, "labeled_batch");
    c.unlabeled_batch = get<int>(g, "unlabeled_batch");
    const auto schedule = get<std::string>(g, "schedule");
    if (schedule == "uniform_random") c.schedule = PairSchedule::uniform_random;
    else if (schedule == "full_sum") c.schedule = PairSchedule::full_sum;
    else throw ConfigError("gpn.schedule must be uniform_random or full_sum");
    const auto noise = get<std::string>(g, "noise_mode");
    if (noise == "per_step") c.noise_mode = NoiseMode::per_step;
    else if (noise == "per_pair") c.noise_mode = NoiseMode::per_pair;
    else throw ConfigError("gpn.noise_mode must be per_step or per_pair");
    const auto metric = get<std::string>(g, "anchor_metric");
    if (metric == "identity") c.anchor_metric = AnchorMetric::identity;
    else if (metric == "prior_covariance") c.anchor_metric = AnchorMetric::prior_covariance;
    else throw ConfigError("gpn.anchor_metric must be identity or prior_covariance");
    c.covariance_draws = get<int>(g, "covariance_draws");
    c.covariance_jitter = get<double>(g, "covariance_jitter");
    c.anchor_points = get<int>(g, "anchor_points");
    c.bootstrap_arch = network(data_dim, g.at("bootstrap"), 1);
    c.bootstrap_prior = prior_from_json(g.at("bootstrap").at("prior"), c.bootstrap_arch);
    c.generator_arch = network(data_dim + c.embed_dim, g.at("generator"), 1);
    try {
        c.validate();
    } catch (const ConfigError&) {
        throw;
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
    return c;
}

inline EnsembleConfig ensemble_config(const json& cfg, int data_dim, int threads) {
    const json& e = cfg.at("ensemble");
    EnsembleConfig c;
    c.members = get<int>(e, "members");
    if (c.members < 2) throw ConfigError("ensemble.members must be >= 2 (posterior variance needs two samples)");
    c.member_arch = network(data_dim, e, 1);
    c.prior = prior_from_json(e.at("prior"), c.member_arch);
    const auto reg = get<std::string>(e, "regularization");
    if (reg == "parameter") c.regularization = Regularization::parameter;
    else if (reg == "output") c.regularization = Regularization::output;
    else throw ConfigError("ensemble.regularization must be parameter or output");
    c.noise_std = get<double>(cfg, "noise_std");
    c.beta = get<double>(e, "beta");
    c.learning_rate = get<double>(e, "learning_rate");
    c.labeled_batch = get<int>(e, "labeled_batch");
    c.unlabeled_batch = get<int>(e, "unlabeled_batch");
    c.bootstrap_arch = network(data_dim, e.at("bootstrap"), 1);
    c.bootstrap_prior = prior_from_json(e.at("bootstrap").at("prior"), c.bootstrap_arch);
    c.threads = threads;
    if (!(c.noise_std > 0) || c.beta < 0 || !(c.learning_rate > 0) || c.labeled_batch < 1 || c.unlabeled_batch < 1)
        throw ConfigError("ensemble settings out of range");
    return c;
}

// ---------------------------------------------------------------------------
// Problem construction

struct Problem {
    bool sine = false;
    LabeledDataset train;   // targets standardized for CSV data
    UnlabeledPool pool;
    LabeledDataset in_test, ood_test;
    TargetScaler scaler;
    double x_lo = 0.0, x_hi = 0.0;
    json inputs = json::object();  // path -> content hash
    json notes = json::object();
};

std::string content_hash_file(const std::string& path);

inline Problem build_problem(const json& cfg) {
    const json& data = cfg.at("data");
    const auto kind = get<std::string>(data, "kind");
    Problem p;
    if (kind == "sine") {
        const json& s = data.at("sine");
        const auto task = make_sine_task(get<int>(s, "n_obs"), get<double>(s, "noise_std"), get<double>(s, "x_lo"),
                                         get<double>(s, "x_hi"), get<std::uint64_t>(s, "seed"));
        p.sine = true;
        p.train = task.labeled;
        p.pool = task.pool;
        p.x_lo = task.x_lo;
        p.x_hi = task.x_hi;
        p.notes["sine_frequency"] = kSineFrequency;
        p.notes["observation_range"] = "central 75% of [x_lo, x_hi]";
        return p;
    }
    if (kind != "csv") throw ConfigError("data.kind must be sine or csv");
    const json& c = data.at("csv");
    const auto path = get<std::string>(c, "path");
    if (path.empty()) throw ConfigError("data.csv.path is required for csv data");
    if (!fs::exists(path)) throw DataError("dataset '" + path + "' does not exist");
    const auto side_name = get<std::string>(c, "in_side");
    if (side_name != "above" && side_name != "below") throw ConfigError("data.csv.in_side must be above or below");
    const InSide side = side_name == "above" ? InSide::above : InSide::below;
    const double test_fraction = get<double>(c, "test_fraction");
    if (!(test_fraction > 0 && test_fraction < 1)) throw ConfigError("data.csv.test_fraction must lie in (0, 1)");

    const auto ds = load_csv(path, get<std::string>(c, "target"));
    const auto tts = split_dataset(ds, SplitSpec::random(1.0 - test_fraction, get<std::uint64_t>(c, "split_seed")));
    const auto spec = SplitSpec::by_target(get<double>(c, "threshold"), side);
    const auto tr = split_by_target(tts.first, spec);
    const auto te = split_by_target(tts.second, spec);
    if (tr.first.size() < 2) throw DataError("fewer than two in-distribution training rows after the split");
    p.scaler = TargetScaler::fit(tr.first.y);
    p.train = tr.first;
    p.train.y = p.scaler.apply(p.train.y);
    p.pool = build_unlabeled_pool(tts.first);
    p.in_test = te.first;
    p.in_test.y = p.scaler.apply(p.in_test.y);
    p.ood_test = te.second;
    p.ood_test.y = p.scaler.apply(p.ood_test.y);
    p.inputs[path] = content_hash_file(path);
    p.notes["rows"] = ds.size();
    p.notes["features"] = ds.input_dim();
    p.notes["in_distribution_fraction"] =
        static_cast<double>(split_by_target(ds, spec).first.size()) / static_cast<double>(ds.size());
    p.notes["train_rows"] = p.train.size();
    p.notes["in_test_rows"] = p.in_test.size();
    p.notes["ood_test_rows"] = p.ood_test.size();
    p.notes["target_mean"] = p.scaler.mean;
    p.notes["target_std"] = p.scaler.std;
    p.notes["feature_mean"] = std::vector<double>(ds.feature_mean.data(), ds.feature_mean.data() + ds.feature_mean.size());
    p.notes["feature_std"] = std::vector<double>(ds.feature_std.data(), ds.feature_std.data() + ds.feature_std.size());
    return p;
}

}  // namespace gpnkit::cli
