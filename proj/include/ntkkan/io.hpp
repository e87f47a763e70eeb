#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "ntkkan/errors.hpp"
#include "ntkkan/network.hpp"

namespace ntkkan {

using json = nlohmann::json;

inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::uint64_t file_checksum(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[65536];
    while (in.read(buf, sizeof buf) || in.gcount() > 0)
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    return h;
}

/// Fixed-format numeric cell: %.17g round-trips doubles exactly.
inline std::string csv_num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::string& header) {
        std::filesystem::create_directories(path.parent_path());
        out_.open(path);
        if (!out_) throw ConfigError("cannot open " + path.string() + " for writing");
        out_ << header << "\n";
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ",";
            out_ << cells[i];
        }
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Checkpoints: versioned JSON dump of (spec, seed, theta) with a checksum over
// the raw IEEE-754 bytes of theta.
// ---------------------------------------------------------------------------

inline json spec_to_json(const NetworkSpec& s) {
    json j;
    j["kind"] = to_string(s.kind);
    j["layers"] = s.layers;
    j["width"] = s.width;
    j["degree"] = s.degree;
    j["input_dim"] = s.input_dim;
    j["init_mode"] = s.init_mode == InitMode::standard_normal ? "standard_normal" : "scaled";
    j["bspline_grid"] = s.bspline_grid;
    return j;
}

inline NetworkSpec spec_from_json(const json& j) {
    NetworkSpec s;
    s.kind = network_kind_from(j.at("kind").get<std::string>());
    s.layers = j.at("layers").get<int>();
    s.width = j.at("width").get<int>();
    s.degree = j.at("degree").get<int>();
    s.input_dim = j.at("input_dim").get<int>();
    const auto mode = j.value("init_mode", "scaled");
    s.init_mode = mode == "standard_normal" ? InitMode::standard_normal : InitMode::scaled;
    s.bspline_grid = j.value("bspline_grid", 5);
    s.validate();
    return s;
}

inline std::uint64_t theta_checksum(std::span<const double> theta) {
    static_assert(sizeof(double) == 8);
    return fnv1a64(theta.data(), theta.size() * sizeof(double));
}

inline void save_checkpoint(const std::filesystem::path& path, const NetworkSpec& spec,
                            std::uint64_t seed, std::span<const double> theta) {
    json j;
    j["format"] = "ntkkan-checkpoint";
    j["version"] = 1;
    j["spec"] = spec_to_json(spec);
    j["seed"] = seed;
    j["theta"] = std::vector<double>(theta.begin(), theta.end());
    j["checksum"] = hex64(theta_checksum(theta));
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write checkpoint " + path.string());
    out << j.dump(2) << "\n";
}

struct Checkpoint {
    NetworkSpec spec;
    std::uint64_t seed = 0;
    std::vector<double> theta;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read checkpoint " + path.string());
    json j = json::parse(in);
    if (j.value("format", "") != "ntkkan-checkpoint") throw ConfigError("not a checkpoint file");
    Checkpoint c;
    c.spec = spec_from_json(j.at("spec"));
    c.seed = j.at("seed").get<std::uint64_t>();
    c.theta = j.at("theta").get<std::vector<double>>();
    const std::string want = j.at("checksum").get<std::string>();
    if (hex64(theta_checksum(c.theta)) != want)
        throw ConfigError("checkpoint checksum mismatch in " + path.string());
    if (c.theta.size() != param_count(c.spec))
        throw ConfigError("checkpoint theta length disagrees with spec");
    return c;
}

} // namespace ntkkan
