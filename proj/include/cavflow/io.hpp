#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cavflow/core.hpp"
#include "cavflow/geometry.hpp"

namespace cavflow {

inline constexpr const char* kVersion = "0.1.0";

struct RunOptions {
    int modes = 32;
    int steps = 400;
    int checkpoints = 11;
    int mc_points = 20000;
    std::uint64_t rng_seed = 12345;
    std::vector<double> eps_grid = {1e-2, 3e-3, 1e-3, 3e-4};
    double diag_t = 0.0;  // solve-neumann diagnostic time; 0 selects (1+lambda)/2
    int ring_points = 256;
    int interior_points = 512;
    int shape_points = 1024;
};

struct RunConfig {
    CavitationConfig config;
    RunOptions options;
};

// line-oriented "key = value" format; lists by key repetition
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);
std::string canonical_config_text(const RunConfig& cfg);
void save_config(const RunConfig& cfg, const std::string& path);

// fixed-format float that round-trips exactly
std::string g17(double v);

struct StageRecord {
    std::string name;
    std::string status;  // "pass" / "fail"
    std::vector<std::pair<std::string, std::string>> values;
    double seconds = 0.0;

    void put(const std::string& key, const std::string& v) { values.emplace_back(key, v); }
    void put(const std::string& key, double v) { values.emplace_back(key, g17(v)); }
};

struct RunManifest {
    std::string command;
    RunConfig cfg;
    std::vector<StageRecord> stages;

    std::string text() const;
    void write(const std::string& path) const;
};

// exit codes: 0 pass, 2 config invalid, 3 attainability not certified,
// 4 numerical certificate failed
int run_pipeline(const RunConfig& cfg, const std::string& command, const std::string& out_dir,
                 RunManifest* manifest_out = nullptr);

}  // namespace cavflow
