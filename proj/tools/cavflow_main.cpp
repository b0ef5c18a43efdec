#include <CLI11.hpp>

#include <iostream>
#include <string>

#include "cavflow/io.hpp"

namespace {

struct CliArgs {
    std::string config_path;
    std::string out_dir = ".";
    std::string eps_grid;
    int steps = -1;
    int modes = -1;
    long long seed = -1;
    int mc_points = -1;
    double diag_t = 0.0;
};

void apply_overrides(cavflow::RunConfig& rc, const CliArgs& args) {
    if (!args.eps_grid.empty()) {
        rc.options.eps_grid.clear();
        std::string cur;
        for (char c : args.eps_grid + ",") {
            if (c == ',') {
                if (!cur.empty()) rc.options.eps_grid.push_back(std::stod(cur));
                cur.clear();
            } else {
                cur.push_back(c);
            }
        }
    }
    if (args.steps > 0) rc.options.steps = args.steps;
    if (args.modes > 0) rc.options.modes = args.modes;
    if (args.seed >= 0) rc.options.rng_seed = static_cast<std::uint64_t>(args.seed);
    if (args.mc_points > 0) rc.options.mc_points = args.mc_points;
    if (args.diag_t > 0.0) rc.options.diag_t = args.diag_t;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"cavflow: incompressible deformations opening round cavities in a disk"};
    app.require_subcommand(1);

    CliArgs args;
    const std::vector<std::string> commands = {"attainability", "evolve",       "solve-neumann",
                                               "flow",          "energy-sweep", "full-run"};
    std::vector<CLI::App*> subs;
    for (const auto& name : commands) {
        CLI::App* sub = app.add_subcommand(name);
        sub->add_option("--config", args.config_path, "configuration file")->required();
        sub->add_option("--out", args.out_dir, "output directory");
        sub->add_option("--eps-grid", args.eps_grid, "comma-separated epsilon grid");
        sub->add_option("--steps", args.steps, "RK4 step count");
        sub->add_option("--modes", args.modes, "Fourier truncation order");
        sub->add_option("--seed", args.seed, "RNG seed");
        sub->add_option("--mc-points", args.mc_points, "Monte Carlo sample budget");
        sub->add_option("--t", args.diag_t, "diagnostic time for solve-neumann");
        subs.push_back(sub);
    }

    CLI11_PARSE(app, argc, argv);

    std::string command;
    for (std::size_t i = 0; i < commands.size(); ++i) {
        if (subs[i]->parsed()) command = commands[i];
    }

    try {
        cavflow::RunConfig rc = cavflow::load_config(args.config_path);
        apply_overrides(rc, args);
        cavflow::RunManifest manifest;
        const int code = cavflow::run_pipeline(rc, command, args.out_dir, &manifest);
        for (const auto& st : manifest.stages) {
            std::cout << "[" << st.status << "] " << st.name;
            for (const auto& [k, v] : st.values) std::cout << " " << k << "=" << v;
            std::cout << "\n";
        }
        std::cout << (code == 0 ? "OK" : "FAILED") << " (exit " << code << ")\n";
        return code;
    } catch (const cavflow::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
