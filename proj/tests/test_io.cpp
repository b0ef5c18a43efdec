#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "cavflow/cavity.hpp"
#include "cavflow/io.hpp"
#include "oracles.hpp"

using namespace cavflow;
namespace fs = std::filesystem;

namespace {

RunConfig melissen_config() {
    const double s = std::sin(kPi / 9.0);
    const double r = s / (1.0 + s);
    const double c = 1.0 - r;
    const double rho = c * std::cos(kPi / 9.0) - std::sqrt(3.0) * r;
    RunConfig rc;
    rc.config.R0 = 1.0;
    for (int k = 0; k < 9; ++k) {
        const double th = 2.0 * kPi * k / 9.0;
        rc.config.sites.push_back({c * std::cos(th), c * std::sin(th)});
    }
    rc.config.sites.push_back({rho * std::cos(kPi / 9.0), rho * std::sin(kPi / 9.0)});
    rc.config.sites.push_back({-rho, 0.0});
    const double v = (1.5 * 1.5 - 1.0) * kPi / 11.0;
    rc.config.areas.assign(11, v);
    return rc;
}

fs::path fresh_dir(const std::string& tag) {
    const fs::path p = fs::temp_directory_path() / ("cavflow_test_" + tag);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("minimal config applies defaults") {
    const RunConfig rc = parse_config("r0 = 2\nsite = 0.4 0.1\narea = 0.5\n");
    CHECK(rc.config.R0 == 2.0);
    REQUIRE(rc.config.sites.size() == 1);
    CHECK(rc.options.modes == 32);
    CHECK(rc.options.steps == 400);
    CHECK(rc.options.eps_grid.size() == 4);
    CHECK(rc.options.rng_seed == 12345);
}

TEST_CASE("canonical round trip") {
    RunConfig rc;
    rc.config.R0 = 1.25;
    rc.config.sites = {{0.3123456789012345, -0.11}, {-0.4, 0.2}};
    rc.config.areas = {0.123456789012345678, 0.3};
    rc.config.min_areas = {0.01, 0.02};
    rc.config.seed_radii = {0.11, 0.17};
    rc.options.modes = 24;
    rc.options.steps = 333;
    rc.options.eps_grid = {1e-2, 1.2345e-3, 3.3e-4};
    rc.options.rng_seed = 777;
    rc.options.mc_points = 9999;
    rc.options.diag_t = 1.05;

    const std::string text = canonical_config_text(rc);
    const RunConfig back = parse_config(text);
    CHECK(back.config.R0 == rc.config.R0);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back.config.sites[i].x == rc.config.sites[i].x);
        CHECK(back.config.sites[i].y == rc.config.sites[i].y);
        CHECK(back.config.areas[i] == rc.config.areas[i]);
        CHECK(back.config.min_areas[i] == rc.config.min_areas[i]);
        CHECK(back.config.seed_radii[i] == rc.config.seed_radii[i]);
    }
    CHECK(back.options.modes == rc.options.modes);
    CHECK(back.options.steps == rc.options.steps);
    CHECK(back.options.eps_grid == rc.options.eps_grid);
    CHECK(back.options.rng_seed == rc.options.rng_seed);
    CHECK(back.options.diag_t == rc.options.diag_t);
    // emitting again reproduces the same bytes
    CHECK(canonical_config_text(back) == text);
}

TEST_CASE("parse errors carry line and field information") {
    try {
        parse_config("r0 = 1\nsite 0.1 0.2\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    try {
        parse_config("r0 = 1\nsite = 0.1 0.2\narea = abc\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("area") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("r0 = 1\nwhat = 3\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("site = 0 0\narea = 1\n"), ConfigError);  // missing r0
    CHECK_THROWS_AS(load_config("/nonexistent/path.cfg"), ConfigError);
}

TEST_CASE("overlapping seed disks are rejected by name") {
    const std::string text =
        "r0 = 1\n"
        "site = 0.2 0\narea = 0.1\nseed_radius = 0.3\n"
        "site = -0.2 0\narea = 0.1\nseed_radius = 0.3\n";
    try {
        parse_config(text);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("seed_radius") != std::string::npos);
    }
}

TEST_CASE("attainability pipeline on the Melissen-11 configuration") {
    const fs::path out = fresh_dir("attain");
    RunManifest manifest;
    const int code = run_pipeline(melissen_config(), "attainability", out.string(), &manifest);
    CHECK(code == 0);
    REQUIRE(manifest.stages.size() == 1);
    double sigma = 0.0, lambda_max = 0.0;
    for (const auto& [k, v] : manifest.stages[0].values) {
        if (k == "sigma") sigma = std::stod(v);
        if (k == "lambda_max") lambda_max = std::stod(v);
    }
    CHECK(std::abs(sigma - 0.7145) < 1e-3);
    CHECK(std::abs(lambda_max - 1.8714) < 1e-3);
    CHECK(fs::exists(out / "attainability.csv"));
    CHECK(fs::exists(out / "manifest.txt"));
}

TEST_CASE("non-certified configuration exits with code 3") {
    RunConfig rc;
    rc.config.R0 = 1.0;
    rc.config.sites = {{0.5, 0.0}, {-0.5, 0.0}};
    const double v = (2.5 - 1.0) * kPi / 2.0;  // lambda^2 = 2.5 > 1/(1-sigma) = 2
    rc.config.areas = {v, v};
    const fs::path out = fresh_dir("notcert");
    CHECK(run_pipeline(rc, "attainability", out.string()) == 3);
    CHECK(run_pipeline(rc, "evolve", out.string()) == 3);
}

TEST_CASE("unknown command exits with code 2") {
    RunConfig rc;
    rc.config.R0 = 1.0;
    rc.config.sites = {{0.0, 0.0}};
    rc.config.areas = {1.0};
    const fs::path out = fresh_dir("unknown");
    CHECK(run_pipeline(rc, "definitely-not-a-command", out.string()) == 2);
}

TEST_CASE("evolve pipeline writes the evolution table") {
    RunConfig rc;
    rc.config.R0 = 1.0;
    rc.config.sites = {{0.0, 0.0}};
    rc.config.areas = {kPi};
    const fs::path out = fresh_dir("evolve");
    CHECK(run_pipeline(rc, "evolve", out.string()) == 0);
    std::ifstream is(out / "evolution.csv");
    REQUIRE(is.good());
    std::string header;
    std::getline(is, header);
    CHECK(header == "t,z0_x,z0_y,L0,r0,area_residual");
    int rows = 0;
    std::string line;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 201);
}

TEST_CASE("far-field Monte Carlo is deterministic across thread counts") {
    CavitationConfig cfg;
    cfg.R0 = 1.0;
    cfg.sites = {{0.0, 0.0}};
    cfg.areas = {kPi};
    const Evolution evo = build_evolution(cfg);
    EnergyOptions eo;
    eo.mc_points = 2000;
    eo.stderr_frac = 0.05;
    eo.flow.steps = 50;
    eo.flow.tol_bdry = 1.0;

    setenv("CAVFLOW_THREADS", "1", 1);
    const FarEnergy a = far_field_energy(evo, eo);
    setenv("CAVFLOW_THREADS", "2", 1);
    const FarEnergy b = far_field_energy(evo, eo);
    unsetenv("CAVFLOW_THREADS");
    CHECK(a.value == b.value);
    CHECK(a.std_error == b.std_error);
    CHECK(a.points == b.points);
}

TEST_CASE("solve-neumann diagnostic pipeline") {
    RunConfig rc;
    rc.config.R0 = 1.0;
    rc.config.sites = {{0.4, 0.0}};
    rc.config.areas = {0.5 * kPi};
    rc.options.diag_t = 1.1;
    const fs::path out = fresh_dir("neumann");
    CHECK(run_pipeline(rc, "solve-neumann", out.string()) == 0);
    CHECK(fs::exists(out / "neumann.csv"));
    // manifest reports residuals below the solver gate
    RunManifest manifest;
    CHECK(run_pipeline(rc, "solve-neumann", out.string(), &manifest) == 0);
    double phi_res = 1.0;
    for (const auto& st : manifest.stages) {
        if (st.name != "solve_neumann") continue;
        for (const auto& [k, v] : st.values) {
            if (k == "phi_residual") phi_res = std::stod(v);
        }
    }
    CHECK(phi_res < 1e-8);
}
