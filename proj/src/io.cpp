#include "cavflow/io.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "cavflow/cavity.hpp"
#include "cavflow/flow.hpp"
#include "cavflow/kernels/harmonic_kernels.hpp"
#include "cavflow/neumann.hpp"
#include "cavflow/velocity.hpp"

namespace cavflow {

namespace fs = std::filesystem;

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace {

struct Line {
    int number;
    std::string key;
    std::string value;
};

std::vector<Line> split_lines(const std::string& text) {
    std::vector<Line> lines;
    std::istringstream is(text);
    std::string raw;
    int number = 0;
    while (std::getline(is, raw)) {
        ++number;
        const auto hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        raw = trim(raw);
        if (raw.empty()) continue;
        const auto eq = raw.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(number) + ": expected key = value");
        Line ln;
        ln.number = number;
        ln.key = trim(raw.substr(0, eq));
        ln.value = trim(raw.substr(eq + 1));
        if (ln.key.empty() || ln.value.empty())
            throw ConfigError("config line " + std::to_string(number) + ": empty key or value");
        lines.push_back(ln);
    }
    return lines;
}

double parse_double(const Line& ln, const std::string& tok) {
    try {
        std::size_t used = 0;
        const double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config line " + std::to_string(ln.number) + ": field '" + ln.key +
                          "': cannot parse number '" + tok + "'");
    }
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    std::string t;
    while (is >> t) out.push_back(t);
    return out;
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

}  // namespace

RunConfig parse_config(const std::string& text) {
    RunConfig rc;
    bool saw_r0 = false;
    for (const Line& ln : split_lines(text)) {
        if (ln.key == "r0") {
            rc.config.R0 = parse_double(ln, ln.value);
            saw_r0 = true;
        } else if (ln.key == "site") {
            const auto toks = split_ws(ln.value);
            if (toks.size() != 2)
                throw ConfigError("config line " + std::to_string(ln.number) +
                                  ": field 'site': expected two coordinates");
            rc.config.sites.push_back({parse_double(ln, toks[0]), parse_double(ln, toks[1])});
        } else if (ln.key == "area") {
            rc.config.areas.push_back(parse_double(ln, ln.value));
        } else if (ln.key == "min_area") {
            rc.config.min_areas.push_back(parse_double(ln, ln.value));
        } else if (ln.key == "seed_radius") {
            rc.config.seed_radii.push_back(parse_double(ln, ln.value));
        } else if (ln.key == "modes") {
            rc.options.modes = static_cast<int>(parse_double(ln, ln.value));
        } else if (ln.key == "steps") {
            rc.options.steps = static_cast<int>(parse_double(ln, ln.value));
        } else if (ln.key == "checkpoints") {
            rc.options.checkpoints = static_cast<int>(parse_double(ln, ln.value));
        } else if (ln.key == "mc_points") {
            rc.options.mc_points = static_cast<int>(parse_double(ln, ln.value));
        } else if (ln.key == "seed") {
            rc.options.rng_seed = static_cast<std::uint64_t>(parse_double(ln, ln.value));
        } else if (ln.key == "eps_grid") {
            rc.options.eps_grid.clear();
            for (const auto& tok : split_commas(ln.value)) {
                rc.options.eps_grid.push_back(parse_double(ln, tok));
            }
        } else if (ln.key == "t") {
            rc.options.diag_t = parse_double(ln, ln.value);
        } else if (ln.key == "ring_points") {
            rc.options.ring_points = static_cast<int>(parse_double(ln, ln.value));
        } else if (ln.key == "interior_points") {
            rc.options.interior_points = static_cast<int>(parse_double(ln, ln.value));
        } else if (ln.key == "shape_points") {
            rc.options.shape_points = static_cast<int>(parse_double(ln, ln.value));
        } else {
            throw ConfigError("config line " + std::to_string(ln.number) + ": unknown field '" +
                              ln.key + "'");
        }
    }
    if (!saw_r0) throw ConfigError("config: missing field 'r0'");
    rc.config.validate();
    return rc;
}

RunConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot open '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_config(buf.str());
}

std::string canonical_config_text(const RunConfig& rc) {
    std::ostringstream os;
    os << "# cavflow configuration (canonical form)\n";
    os << "r0 = " << g17(rc.config.R0) << "\n";
    for (std::size_t i = 0; i < rc.config.sites.size(); ++i) {
        os << "site = " << g17(rc.config.sites[i].x) << " " << g17(rc.config.sites[i].y) << "\n";
        os << "area = " << g17(rc.config.areas[i]) << "\n";
        if (!rc.config.min_areas.empty()) os << "min_area = " << g17(rc.config.min_areas[i]) << "\n";
        if (!rc.config.seed_radii.empty())
            os << "seed_radius = " << g17(rc.config.seed_radii[i]) << "\n";
    }
    os << "modes = " << rc.options.modes << "\n";
    os << "steps = " << rc.options.steps << "\n";
    os << "checkpoints = " << rc.options.checkpoints << "\n";
    os << "mc_points = " << rc.options.mc_points << "\n";
    os << "seed = " << rc.options.rng_seed << "\n";
    os << "eps_grid = ";
    for (std::size_t i = 0; i < rc.options.eps_grid.size(); ++i) {
        if (i) os << ",";
        os << g17(rc.options.eps_grid[i]);
    }
    os << "\n";
    if (rc.options.diag_t != 0.0) os << "t = " << g17(rc.options.diag_t) << "\n";
    os << "ring_points = " << rc.options.ring_points << "\n";
    os << "interior_points = " << rc.options.interior_points << "\n";
    os << "shape_points = " << rc.options.shape_points << "\n";
    return os.str();
}

void save_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("config: cannot write '" + path + "'");
    os << canonical_config_text(cfg);
}

std::string RunManifest::text() const {
    std::ostringstream os;
    os << "cavflow_version = " << kVersion << "\n";
    os << "kernel = " << kernels::active_kernel_name() << "\n";
    os << "command = " << command << "\n";
    os << "config.r0 = " << g17(cfg.config.R0) << "\n";
    for (std::size_t i = 0; i < cfg.config.sites.size(); ++i) {
        os << "config.site." << i << " = " << g17(cfg.config.sites[i].x) << " "
           << g17(cfg.config.sites[i].y) << "\n";
        os << "config.area." << i << " = " << g17(cfg.config.areas[i]) << "\n";
        if (!cfg.config.min_areas.empty())
            os << "config.min_area." << i << " = " << g17(cfg.config.min_areas[i]) << "\n";
        if (!cfg.config.seed_radii.empty())
            os << "config.seed_radius." << i << " = " << g17(cfg.config.seed_radii[i]) << "\n";
    }
    os << "options.modes = " << cfg.options.modes << "\n";
    os << "options.steps = " << cfg.options.steps << "\n";
    os << "options.checkpoints = " << cfg.options.checkpoints << "\n";
    os << "options.mc_points = " << cfg.options.mc_points << "\n";
    os << "options.seed = " << cfg.options.rng_seed << "\n";
    os << "options.eps_grid =";
    for (double e : cfg.options.eps_grid) os << " " << g17(e);
    os << "\n";
    os << "options.ring_points = " << cfg.options.ring_points << "\n";
    os << "options.interior_points = " << cfg.options.interior_points << "\n";
    os << "options.shape_points = " << cfg.options.shape_points << "\n";
    for (const StageRecord& st : stages) {
        for (const auto& [k, v] : st.values) {
            os << "stage." << st.name << "." << k << " = " << v << "\n";
        }
        os << "stage." << st.name << ".status = " << st.status << "\n";
        os << "timing." << st.name << "_s = " << g17(st.seconds) << "\n";
    }
    return os.str();
}

void RunManifest::write(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("manifest: cannot write '" + path + "'");
    os << text();
}

namespace {

class Csv {
  public:
    Csv(const fs::path& path, const std::vector<std::string>& header) : os_(path, std::ios::binary) {
        if (!os_) throw Error("csv: cannot write '" + path.string() + "'");
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (i) os_ << ",";
            os_ << header[i];
        }
        os_ << "\n";
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os_ << ",";
            os_ << cells[i];
        }
        os_ << "\n";
    }

  private:
    std::ofstream os_;
};

struct StageTimer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

SolverOptions solver_options(const RunOptions& opts) {
    SolverOptions s;
    s.modes = opts.modes;
    return s;
}

FlowOptions flow_options(const RunOptions& opts) {
    FlowOptions f;
    f.steps = opts.steps;
    f.checkpoints = opts.checkpoints;
    f.solver = solver_options(opts);
    return f;
}

struct PipelineContext {
    const RunConfig& rc;
    fs::path out;
    RunManifest& manifest;
};

void stage_attainability(PipelineContext& ctx, AttainabilityReport& rep) {
    StageTimer timer;
    StageRecord st;
    st.name = "attainability";
    rep = check_attainable(ctx.rc.config);
    st.put("sigma", rep.sigma);
    st.put("lambda", rep.lambda);
    st.put("lambda_max", rep.lambda_max);
    st.put("attainable", rep.attainable ? "true" : "false");
    st.put("reason", rep.reason);

    std::vector<std::string> header = {"sigma", "lambda", "lambda_max", "attainable"};
    std::vector<std::string> row = {g17(rep.sigma), g17(rep.lambda), g17(rep.lambda_max),
                                    rep.attainable ? "true" : "false"};
    if (!ctx.rc.config.seed_radii.empty() && !ctx.rc.config.min_areas.empty()) {
        const CoalescenceBounds cb =
            coalescence_bounds(ctx.rc.config.seed_radii, ctx.rc.config.min_areas,
                               ctx.rc.config.R0);
        st.put("sigma_star", cb.sigma_star);
        st.put("lambda0", cb.lambda0);
        st.put("lambda_star", cb.lambda_star);
        header.insert(header.end(), {"sigma_star", "lambda0", "lambda_star"});
        row.insert(row.end(), {g17(cb.sigma_star), g17(cb.lambda0), g17(cb.lambda_star)});
    }
    Csv csv(ctx.out / "attainability.csv", header);
    csv.row(row);
    st.status = rep.attainable ? "pass" : "fail";
    st.seconds = timer.seconds();
    ctx.manifest.stages.push_back(st);
    if (!rep.attainable) throw NotCertifiedError(rep.reason);
}

void stage_evolve(PipelineContext& ctx, Evolution& evo) {
    StageTimer timer;
    StageRecord st;
    st.name = "evolve";
    evo = build_evolution(ctx.rc.config);
    for (std::size_t i = 0; i < evo.count(); ++i) {
        st.put("excision_radius." + std::to_string(i), evo.excision_radii[i]);
    }
    st.put("margin_d", evo.margin);
    st.put("r_max", evo.r_max);

    std::vector<std::string> header = {"t"};
    for (std::size_t i = 0; i < evo.count(); ++i) {
        const std::string k = std::to_string(i);
        header.push_back("z" + k + "_x");
        header.push_back("z" + k + "_y");
        header.push_back("L" + k);
        header.push_back("r" + k);
    }
    header.push_back("area_residual");
    Csv csv(ctx.out / "evolution.csv", header);
    const double ref_area = kPi * evo.R0 * evo.R0;
    double ref_holes = 0.0;
    for (double R : evo.excision_radii) ref_holes += kPi * R * R;
    const int rows = 201;
    for (int k = 0; k < rows; ++k) {
        const double t = 1.0 + (evo.lambda - 1.0) * k / (rows - 1);
        std::vector<std::string> row = {g17(t)};
        double holes = 0.0;
        for (std::size_t i = 0; i < evo.count(); ++i) {
            const Vec2 z = evo.center(i, t);
            const double r = evo.hole_radius(i, t);
            holes += kPi * r * r;
            row.push_back(g17(z.x));
            row.push_back(g17(z.y));
            row.push_back(g17(evo.cavity_radius(i, t)));
            row.push_back(g17(r));
        }
        const double resid =
            std::abs(kPi * t * t * evo.R0 * evo.R0 - holes - (ref_area - ref_holes));
        row.push_back(g17(resid));
        csv.row(row);
    }
    st.status = "pass";
    st.seconds = timer.seconds();
    ctx.manifest.stages.push_back(st);
}

void stage_solve_neumann(PipelineContext& ctx, const Evolution& evo) {
    StageTimer timer;
    StageRecord st;
    st.name = "solve_neumann";
    double t = ctx.rc.options.diag_t;
    if (t <= 0.0) t = 0.5 * (1.0 + evo.lambda);
    if (t < 1.0 || t > evo.lambda)
        throw ConfigError("solve-neumann: diagnostic t outside [1, lambda]");

    const HoleDomain dom = domain_at(evo, t);
    std::vector<double> rates(evo.count() + 1);
    rates[0] = evo.outer_radius_rate();
    for (std::size_t i = 0; i < evo.count(); ++i) rates[i + 1] = evo.hole_radius_rate(i, t);

    NeumannData growth;
    for (double r : rates) growth.g.push_back(FourierSeries::constant(r));
    const double compat = check_compatibility(dom, growth);
    NeumannSystem system(dom, solver_options(ctx.rc.options));
    const HarmonicRepresentation phi = system.solve(growth);
    NeumannData tangential;
    tangential.g.resize(rates.size());
    for (std::size_t c = 0; c < rates.size(); ++c) {
        tangential.g[c] = tangential_derivative(phi, c, ctx.rc.options.modes);
    }
    const HarmonicRepresentation varphi = system.solve(tangential);

    st.put("t", t);
    st.put("compatibility_residual", compat);
    st.put("phi_residual", phi.boundary_residual);
    st.put("varphi_residual", varphi.boundary_residual);
    st.put("phi_mean", mean_value(phi));
    st.put("poincare_lower_bound", poincare_probe(dom));

    Csv csv(ctx.out / "neumann.csv",
            {"circle", "center_x", "center_y", "radius", "normal_rate", "phi_residual_rel",
             "varphi_residual_rel"});
    for (std::size_t c = 0; c <= evo.count(); ++c) {
        const Vec2 zc = c == 0 ? dom.outer_center : dom.holes[c - 1].center;
        const double rc = c == 0 ? dom.outer_radius : dom.holes[c - 1].radius;
        csv.row({std::to_string(c), g17(zc.x), g17(zc.y), g17(rc), g17(rates[c]),
                 g17(phi.boundary_residual), g17(varphi.boundary_residual)});
    }
    st.status = "pass";
    st.seconds = timer.seconds();
    ctx.manifest.stages.push_back(st);
}

struct FlowCertificates {
    DetReport det;
    InjectivityReport injectivity;
    double tracking_max = 0.0;        // unprojected rings vs analytic circles, all checkpoints
    double interface_mismatch = 0.0;  // same at t = lambda (hole rings only)
    double boundary_drift = 0.0;
    std::vector<std::vector<Vec2>> hole_ring_images;  // per hole, mapped shape polygon
    std::vector<double> decay_sums;                   // sum |F|^2 per checkpoint
    std::vector<double> decay_times;
};

FlowCertificates run_flow_certificates(PipelineContext& ctx, const Evolution& evo,
                                       const FlowStageCache& cache, bool write_csv) {
    const RunOptions& ro = ctx.rc.options;
    FlowOptions fo = flow_options(ro);

    std::vector<Vec2> seeds;
    std::vector<int> tags;
    certification_seeds(evo, ro.ring_points, ro.interior_points, seeds, tags, ro.rng_seed);
    const TrajectoryBatch batch = integrate_flow(seeds, tags, evo, fo, &cache);

    FlowCertificates cert;
    cert.det = incompressibility_report(batch, fo.tol_det);
    cert.injectivity = injectivity_probe(batch);
    cert.boundary_drift = batch.max_boundary_drift;
    cert.decay_sums = gradient_frobenius_sums(batch);
    cert.decay_times = batch.checkpoint_t;

    // unprojected rings against the analytic evolving circles
    std::vector<Vec2> free_seeds;
    std::vector<int> free_tags;
    std::vector<std::pair<std::size_t, double>> ring_of;  // (circle, theta)
    const HoleDomain dom1 = domain_at(evo, 1.0);
    const int shapeN = ro.shape_points;
    for (std::size_t c = 0; c <= evo.count(); ++c) {
        const Vec2 zc = c == 0 ? dom1.outer_center : dom1.holes[c - 1].center;
        const double rc = c == 0 ? dom1.outer_radius : dom1.holes[c - 1].radius;
        for (int q = 0; q < shapeN; ++q) {
            const double theta = 2.0 * kPi * q / shapeN;
            free_seeds.push_back(zc + Vec2{rc * std::cos(theta), rc * std::sin(theta)});
            free_tags.push_back(-1);
            ring_of.emplace_back(c, theta);
        }
    }
    FlowOptions fo_free = fo;
    fo_free.tol_bdry = std::max(fo.tol_bdry, 1e-4 * evo.R0);  // rings may hug the moving circle
    const TrajectoryBatch free_batch = integrate_flow(free_seeds, free_tags, evo, fo_free, &cache);
    for (std::size_t ck = 0; ck < free_batch.checkpoint_t.size(); ++ck) {
        const double t = free_batch.checkpoint_t[ck];
        for (std::size_t s = 0; s < free_seeds.size(); ++s) {
            const auto [c, theta] = ring_of[s];
            const Vec2 zc = c == 0 ? Vec2{0.0, 0.0} : evo.center(c - 1, t);
            const double rc = c == 0 ? evo.outer_radius(t) : evo.hole_radius(c - 1, t);
            const Vec2 target = zc + Vec2{rc * std::cos(theta), rc * std::sin(theta)};
            const double err = (free_batch.positions[ck][s] - target).norm();
            cert.tracking_max = std::max(cert.tracking_max, err);
            if (ck + 1 == free_batch.checkpoint_t.size() && c >= 1) {
                cert.interface_mismatch = std::max(cert.interface_mismatch, err);
            }
        }
    }
    cert.hole_ring_images.resize(evo.count());
    for (std::size_t i = 0; i < evo.count(); ++i) {
        cert.hole_ring_images[i].reserve(shapeN);
        for (int q = 0; q < shapeN; ++q) {
            cert.hole_ring_images[i].push_back(
                free_batch.final_positions()[(i + 1) * shapeN + q]);
        }
    }

    if (write_csv) {
        Csv csv(ctx.out / "trajectories.csv",
                {"seed", "tag", "seed_x", "seed_y", "t", "x", "y", "F00", "F01", "F10", "F11",
                 "det"});
        for (std::size_t ck = 0; ck < batch.checkpoint_t.size(); ++ck) {
            for (std::size_t s = 0; s < batch.seeds.size(); ++s) {
                const Mat2& F = batch.gradients[ck][s];
                csv.row({std::to_string(s), std::to_string(batch.tags[s]), g17(batch.seeds[s].x),
                         g17(batch.seeds[s].y), g17(batch.checkpoint_t[ck]),
                         g17(batch.positions[ck][s].x), g17(batch.positions[ck][s].y), g17(F.a),
                         g17(F.b), g17(F.c), g17(F.d), g17(F.det())});
            }
        }
    }
    return cert;
}

void stage_flow(PipelineContext& ctx, const Evolution& evo, const FlowStageCache& cache,
                FlowCertificates& cert) {
    StageTimer timer;
    StageRecord st;
    st.name = "flow";
    cert = run_flow_certificates(ctx, evo, cache, true);
    st.put("max_det_deviation", cert.det.max_deviation);
    st.put("boundary_drift", cert.boundary_drift);
    st.put("tracking_max", cert.tracking_max);
    st.put("interface_mismatch", cert.interface_mismatch);
    st.put("injectivity_min_ratio", cert.injectivity.min_ratio);
    st.put("injectivity_flags", g17(static_cast<double>(cert.injectivity.flagged)));
    const bool pass = cert.det.pass && cert.injectivity.flagged == 0;
    st.status = pass ? "pass" : "fail";
    st.seconds = timer.seconds();
    ctx.manifest.stages.push_back(st);
    if (!pass) throw CertificateError("flow: certificates failed (det or injectivity)");
}

void stage_energy(PipelineContext& ctx, const Evolution& evo, const FlowStageCache& cache,
                  EnergyReport& rep, BoundFit& fit) {
    StageTimer timer;
    StageRecord st;
    st.name = "energy";
    EnergyOptions eo;
    eo.mc_points = ctx.rc.options.mc_points;
    eo.rng_seed = ctx.rc.options.rng_seed;
    eo.flow = flow_options(ctx.rc.options);
    rep = energy_sweep(evo, ctx.rc.options.eps_grid, eo, &cache);

    Csv csv(ctx.out / "energy.csv",
            {"epsilon", "E_near_exact", "E_far_mc", "E_far_stderr", "E_total", "log_eps",
             "bound_gap"});
    for (std::size_t i = 0; i < rep.eps.size(); ++i) {
        csv.row({g17(rep.eps[i]), g17(rep.near_exact[i]), g17(rep.far.value),
                 g17(rep.far.std_error), g17(rep.total[i]), g17(rep.log_eps[i]),
                 g17(rep.bound_gap[i])});
    }
    st.put("far_energy", rep.far.value);
    st.put("far_stderr", rep.far.std_error);
    st.put("far_points", g17(static_cast<double>(rep.far.points)));

    bool pass = true;
    if (rep.eps.size() >= 4) {
        fit = bound_check(rep);
        st.put("fit_slope", fit.slope);
        st.put("fit_intercept_C", fit.intercept);
        st.put("slope_target", fit.slope_target);
        st.put("slope_rel_dev", fit.slope_rel_dev);
        st.put("max_resid_rel", fit.max_resid_rel);
        pass = fit.pass;
    }
    st.status = pass ? "pass" : "fail";
    st.seconds = timer.seconds();
    ctx.manifest.stages.push_back(st);
    if (!pass) throw CertificateError("energy: slope/residual fit failed");
}

void stage_shape(PipelineContext& ctx, const Evolution& evo, const FlowCertificates& cert) {
    StageTimer timer;
    StageRecord st;
    st.name = "shape";
    const NearMapSet near(evo);
    const double eps = ctx.rc.options.eps_grid.empty() ? 1e-2
                                                       : ctx.rc.options.eps_grid.front();
    Csv csv(ctx.out / "shape.csv",
            {"cavity", "epsilon", "mapped_eps_area", "expected_eps_area", "area_rel_err",
             "fraenkel_D", "interface_mismatch"});
    double worstD = 0.0, worstArea = 0.0;
    for (std::size_t i = 0; i < evo.count(); ++i) {
        const auto& c = near.cavities()[i];
        std::vector<Vec2> eps_img;
        for (const Vec2& p : circle_polygon(c.site, eps, ctx.rc.options.shape_points)) {
            eps_img.push_back(near.map_on(i, p));
        }
        const double mapped = polygon_area(eps_img);
        const double expected = kPi * c.L * c.L + kPi * eps * eps;
        const double rel = std::abs(mapped - expected) / expected;
        const double D = fraenkel_asymmetry(cert.hole_ring_images[i]);
        worstD = std::max(worstD, D);
        worstArea = std::max(worstArea, rel);
        csv.row({std::to_string(i), g17(eps), g17(mapped), g17(expected), g17(rel), g17(D),
                 g17(cert.interface_mismatch)});
    }
    st.put("max_fraenkel_D", worstD);
    st.put("max_eps_area_rel_err", worstArea);
    st.status = (worstD <= 1e-2 && worstArea <= 5e-3) ? "pass" : "fail";
    st.seconds = timer.seconds();
    ctx.manifest.stages.push_back(st);
    if (st.status == "fail") throw CertificateError("shape: cavity roundness check failed");
}

}  // namespace

int run_pipeline(const RunConfig& rc, const std::string& command, const std::string& out_dir,
                 RunManifest* manifest_out) {
    RunManifest local;
    RunManifest& manifest = manifest_out ? *manifest_out : local;
    manifest.command = command;
    manifest.cfg = rc;

    fs::create_directories(out_dir);
    PipelineContext ctx{rc, fs::path(out_dir), manifest};

    int code = 0;
    try {
        AttainabilityReport rep;
        if (command == "attainability") {
            stage_attainability(ctx, rep);
        } else if (command == "evolve") {
            stage_attainability(ctx, rep);
            Evolution evo;
            stage_evolve(ctx, evo);
        } else if (command == "solve-neumann") {
            stage_attainability(ctx, rep);
            Evolution evo;
            stage_evolve(ctx, evo);
            stage_solve_neumann(ctx, evo);
        } else if (command == "flow") {
            stage_attainability(ctx, rep);
            Evolution evo;
            stage_evolve(ctx, evo);
            const FlowStageCache cache(evo, rc.options.steps, solver_options(rc.options));
            FlowCertificates cert;
            stage_flow(ctx, evo, cache, cert);
        } else if (command == "energy-sweep") {
            stage_attainability(ctx, rep);
            Evolution evo;
            stage_evolve(ctx, evo);
            const FlowStageCache cache(evo, rc.options.steps, solver_options(rc.options));
            EnergyReport erep;
            BoundFit fit;
            stage_energy(ctx, evo, cache, erep, fit);
        } else if (command == "full-run") {
            stage_attainability(ctx, rep);
            Evolution evo;
            stage_evolve(ctx, evo);
            const FlowStageCache cache(evo, rc.options.steps, solver_options(rc.options));
            stage_solve_neumann(ctx, evo);
            FlowCertificates cert;
            stage_flow(ctx, evo, cache, cert);
            EnergyReport erep;
            BoundFit fit;
            stage_energy(ctx, evo, cache, erep, fit);
            stage_shape(ctx, evo, cert);
        } else {
            throw ConfigError("unknown command '" + command + "'");
        }
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        code = 2;
    } catch (const NotCertifiedError& e) {
        std::cerr << "not certified: " << e.what() << "\n";
        code = 3;
    } catch (const Error& e) {
        std::cerr << "certificate failure: " << e.what() << "\n";
        code = 4;
    }

    manifest.write((fs::path(out_dir) / "manifest.txt").string());
    return code;
}

}  // namespace cavflow
