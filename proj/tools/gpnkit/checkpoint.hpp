#pragma once

#include <optional>

#include "common.hpp"

namespace gpnkit::cli {

// A training run directory:
//   manifest.json            resolved config, seed, input and output hashes
//   generator.bin            GPN generator parameters
//   bootstrap.bin            frozen bootstrap networks, concatenated
//   covariance_bank.bin      extra prior draws (prior_covariance metric only)
//   embeddings.csv           k x embed_dim
//   pair_noise.csv           k x embed_dim
//   members.bin, anchors.bin ensemble members and their anchors
//   training_loss.csv, beta_selection.csv, timing.csv
// timing.csv is the only file left out of the manifest, so reruns with the
// same seed produce byte-identical manifests.

struct Checkpoint {
    std::string dir;
    json manifest;
    json config;
    std::uint64_t seed = 0;
    int data_dim = 0;
    std::optional<GpnModel> gpn;
    std::optional<EnsembleModel> ensemble;
    Table timing;
};

inline std::string manifest_path(const std::string& dir) { return (fs::path(dir) / "manifest.json").string(); }

inline Checkpoint load_checkpoint(const std::string& dir) {
    Checkpoint c;
    c.dir = dir;
    if (!fs::exists(manifest_path(dir))) throw DataError("no manifest.json in checkpoint '" + dir + "'");
    try {
        c.manifest = json::parse(read_file(manifest_path(dir)));
        c.config = resolve_config(c.manifest.at("config"));
        c.seed = c.manifest.at("seed").get<std::uint64_t>();
        c.data_dim = c.manifest.at("data_dim").get<int>();
        for (const auto& [name, hash] : c.manifest.at("outputs").items()) {
            const auto path = (fs::path(dir) / name).string();
            if (!fs::exists(path)) throw DataError("checkpoint file '" + name + "' is missing");
            if (content_hash_file(path) != hash.get<std::string>())
                throw DataError("checkpoint file '" + name + "' does not match its manifest hash");
        }
    } catch (const json::exception& e) {
        throw DataError("malformed manifest in '" + dir + "': " + e.what());
    }
    auto file = [&](const char* name) { return (fs::path(dir) / name).string(); };
    if (get<std::string>(c.config, "model") == "gpn") {
        const GpnConfig cfg = gpn_config(c.config, c.data_dim, c.manifest.at("selected_beta").get<double>());
        GpnModel m;
        m.config = cfg;
        const auto gen = params_from_file(file("generator.bin"));
        if (gen.size() != 1) throw DataError("generator.bin must hold one network");
        m.generator = gen.front();
        m.bootstrap = params_from_file(file("bootstrap.bin"));
        if (fs::exists(file("covariance_bank.bin"))) m.covariance_bank = params_from_file(file("covariance_bank.bin"));
        m.embeddings = parse_matrix_csv(read_file(file("embeddings.csv")), "embeddings.csv");
        m.pair_noise = parse_matrix_csv(read_file(file("pair_noise.csv")), "pair_noise.csv");
        if (m.generator.arch.widths != cfg.generator_arch.widths || static_cast<int>(m.bootstrap.size()) != cfg.k ||
            m.embeddings.rows() != cfg.k || m.embeddings.cols() != cfg.embed_dim)
            throw DataError("checkpoint contents do not match its config");
        c.gpn = std::move(m);
    } else {
        EnsembleModel m;
        m.config = ensemble_config(c.config, c.data_dim, 1);
        m.members = params_from_file(file("members.bin"));
        m.anchors = params_from_file(file("anchors.bin"));
        if (static_cast<int>(m.members.size()) != m.config.members || m.anchors.size() != m.members.size())
            throw DataError("checkpoint member count does not match its config");
        c.ensemble = std::move(m);
    }
    if (fs::exists(file("timing.csv"))) c.timing = read_table(file("timing.csv"));
    return c;
}

}  // namespace gpnkit::cli
