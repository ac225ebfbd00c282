#pragma once

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "run_config.hpp"

namespace gpnkit::cli {

/// Git blob hash ("blob <size>\0" + content, SHA-1), so `git hash-object`
/// reproduces it.
inline std::string content_hash(const std::string& bytes) {
    const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    const bool ok = ctx && EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) && EVP_DigestUpdate(ctx, header.data(), header.size()) &&
                    EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) && EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    if (!ok) throw Error("SHA-1 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 15];
    }
    return out;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline std::string content_hash_file(const std::string& path) { return content_hash(read_file(path)); }

inline void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << bytes;
}

inline std::string prepare_out_dir(const std::string& out) {
    const std::string dir = out.empty() ? "gpnkit_out" : out;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory '" + dir + "': " + ec.message());
    return dir;
}

// ---------------------------------------------------------------------------
// Text tables

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string brief(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline std::string matrix_csv(const MatrixXd& m) {
    std::string s;
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            if (j) s += ',';
            s += num(m(i, j));
        }
        s += '\n';
    }
    return s;
}

inline MatrixXd parse_matrix_csv(const std::string& text, const std::string& what) {
    std::vector<std::vector<double>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) {
            try {
                row.push_back(std::stod(cell));
            } catch (const std::logic_error&) {
                throw DataError(what + ": bad number '" + cell + "' on line " + std::to_string(rows.size() + 1));
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) throw DataError(what + ": ragged rows");
        rows.push_back(std::move(row));
    }
    MatrixXd m(static_cast<Index>(rows.size()), rows.empty() ? 0 : static_cast<Index>(rows.front().size()));
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    return m;
}

/// Minimal reader for the tables this tool writes: header row, then numbers.
struct Table {
    std::vector<std::string> header;
    MatrixXd values;

    Index column(const std::string& name) const {
        for (std::size_t j = 0; j < header.size(); ++j)
            if (header[j] == name) return static_cast<Index>(j);
        throw DataError("table has no column '" + name + "'");
    }
};

inline Table read_table(const std::string& path) {
    const std::string text = read_file(path);
    const auto newline = text.find('\n');
    if (text.empty() || newline == std::string::npos) throw DataError("'" + path + "' is empty");
    Table t;
    std::istringstream hs(text.substr(0, newline));
    for (std::string cell; std::getline(hs, cell, ',');) t.header.push_back(cell);
    t.values = parse_matrix_csv(text.substr(newline + 1), path);
    if (t.values.rows() == 0) throw DataError("'" + path + "' has no data rows");
    if (t.values.cols() != static_cast<Index>(t.header.size())) throw DataError("'" + path + "': header and rows disagree");
    return t;
}

inline std::string params_bytes(const std::vector<ParamVector>& ps) {
    std::ostringstream s(std::ios::binary);
    for (const auto& p : ps) write_params(s, p);
    return s.str();
}

inline std::vector<ParamVector> params_from_file(const std::string& path) {
    std::istringstream in(read_file(path), std::ios::binary);
    try {
        return read_params_sequence(in);
    } catch (const DataError&) {
        throw;
    } catch (const Error& e) {
        throw DataError("'" + path + "': " + e.what());
    }
}

class Stopwatch {
public:
    double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

inline void note(const std::string& msg) { std::cerr << "gpnkit: " << msg << '\n'; }

}  // namespace gpnkit::cli
