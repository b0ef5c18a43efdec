#include "cavflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace cavflow {

namespace {

std::string fmt_idx(const char* what, std::size_t i) {
    std::ostringstream os;
    os << what << "[" << i << "]";
    return os.str();
}

// t - sqrt(t^2 - 1) evaluated as 1/(t + sqrt(t^2-1)) to avoid cancellation
double shrink_factor(double t) {
    const double u = std::max(0.0, (t - 1.0) * (t + 1.0));
    return 1.0 / (t + std::sqrt(u));
}

}  // namespace

double CavitationConfig::total_area() const {
    double s = 0.0;
    for (double v : areas) s += v;
    return s;
}

void CavitationConfig::validate() const {
    const std::size_t n = sites.size();
    if (n == 0) throw ConfigError("config: at least one cavitation site required");
    if (areas.size() != n) throw ConfigError("config: sites/areas length mismatch");
    if (!(R0 > 0.0)) throw ConfigError("config: r0 must be positive");
    for (std::size_t i = 0; i < n; ++i) {
        if (!(sites[i].norm() < R0))
            throw ConfigError("config: " + fmt_idx("site", i) + " not strictly inside the outer disk");
        if (!(areas[i] > 0.0))
            throw ConfigError("config: " + fmt_idx("area", i) + " must be positive");
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if ((sites[i] - sites[j]).norm() < 1e-12 * R0)
                throw ConfigError("config: coincident sites " + fmt_idx("site", i) + " and " +
                                  fmt_idx("site", j));
        }
    }
    if (!min_areas.empty()) {
        if (min_areas.size() != n) throw ConfigError("config: min_area count must match sites");
        for (std::size_t i = 0; i < n; ++i) {
            if (!(min_areas[i] > 0.0))
                throw ConfigError("config: " + fmt_idx("min_area", i) + " must be positive");
        }
    }
    if (!seed_radii.empty()) {
        if (seed_radii.size() != n) throw ConfigError("config: seed_radius count must match sites");
        for (std::size_t i = 0; i < n; ++i) {
            if (!(seed_radii[i] > 0.0))
                throw ConfigError("config: " + fmt_idx("seed_radius", i) + " must be positive");
            if (!(sites[i].norm() + seed_radii[i] < R0))
                throw ConfigError("config: seed disk " + fmt_idx("seed_radius", i) +
                                  " not contained in the outer disk");
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!((sites[i] - sites[j]).norm() > seed_radii[i] + seed_radii[j]))
                    throw ConfigError("config: seed disks " + fmt_idx("seed_radius", i) + " and " +
                                      fmt_idx("seed_radius", j) + " overlap");
            }
        }
    }
}

double HoleDomain::area() const {
    double a = kPi * outer_radius * outer_radius;
    for (const Hole& h : holes) a -= kPi * h.radius * h.radius;
    return a;
}

bool HoleDomain::contains(Vec2 p, double tol) const {
    if ((p - outer_center).norm() > outer_radius + tol) return false;
    for (const Hole& h : holes) {
        if ((p - h.center).norm() < h.radius - tol) return false;
    }
    return true;
}

double HoleDomain::boundary_distance(Vec2 p) const {
    double d = std::abs(outer_radius - (p - outer_center).norm());
    for (const Hole& h : holes) d = std::min(d, std::abs((p - h.center).norm() - h.radius));
    return d;
}

void HoleDomain::validate() const {
    if (!(outer_radius > 0.0)) throw ConfigError("domain: outer radius must be positive");
    for (std::size_t i = 0; i < holes.size(); ++i) {
        if (!(holes[i].radius > 0.0))
            throw ConfigError("domain: " + fmt_idx("hole", i) + " radius must be positive");
        if (!((holes[i].center - outer_center).norm() + holes[i].radius < outer_radius))
            throw ConfigError("domain: " + fmt_idx("hole", i) + " not contained in the outer disk");
    }
    for (std::size_t i = 0; i < holes.size(); ++i) {
        for (std::size_t j = i + 1; j < holes.size(); ++j) {
            if (!((holes[i].center - holes[j].center).norm() >
                  holes[i].radius + holes[j].radius))
                throw ConfigError("domain: holes " + std::to_string(i) + " and " +
                                  std::to_string(j) + " intersect");
        }
    }
}

Vec2 CenterPath::at(double t) const {
    switch (kind) {
        case Kind::Constant:
            return fixed_point;
        case Kind::LinearInT:
            return site * t;
        case Kind::Plunge: {
            // sigma - sqrt(sigma^2-1) with sigma = 1 + c u^2, using
            // sigma^2-1 = c u^2 (2 + c u^2) to stay accurate near t = 1
            const double su = plunge_c * (t - 1.0) * (t - 1.0);
            const double m = 1.0 / (1.0 + su + std::sqrt(su * (2.0 + su)));
            return site * m;
        }
    }
    return fixed_point;
}

Vec2 CenterPath::rate(double t) const {
    switch (kind) {
        case Kind::Constant:
            return {0.0, 0.0};
        case Kind::LinearInT:
            return site;
        case Kind::Plunge: {
            // d/dt [ sigma - sqrt(sigma^2-1) ], sigma = 1 + c (t-1)^2, written in a
            // form that stays finite at t = 1
            const double c = plunge_c;
            const double u = t - 1.0;
            const double sigma_t = 1.0 + c * u * u;
            const double den = std::sqrt(2.0 + c * u * u);
            const double mdot = 2.0 * c * u - 2.0 * std::sqrt(c) * sigma_t / den;
            return site * mdot;
        }
    }
    return {0.0, 0.0};
}

double compute_lambda(const CavitationConfig& config) {
    config.validate();
    return std::sqrt(1.0 + config.total_area() / (kPi * config.R0 * config.R0));
}

double sigma(const CavitationConfig& config) {
    const std::size_t n = config.count();
    const double total = config.total_area();
    const double R0 = config.R0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double frac = config.areas[i] / total;
        const double t = (1.0 - config.sites[i].norm() / R0);
        best = std::min(best, t * t / frac);
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double si = std::sqrt(config.areas[i] / total);
            const double sj = std::sqrt(config.areas[j] / total);
            const double num = (config.sites[i] - config.sites[j]).norm2();
            best = std::min(best, num / (R0 * R0 * (si + sj) * (si + sj)));
        }
    }
    return best;
}

AttainabilityReport check_attainable(const CavitationConfig& config) {
    config.validate();
    AttainabilityReport rep;
    rep.lambda = compute_lambda(config);
    rep.sigma = sigma(config);
    rep.lambda_max = rep.sigma < 1.0 ? 1.0 / std::sqrt(1.0 - rep.sigma)
                                     : std::numeric_limits<double>::infinity();
    if (config.count() == 1) {
        rep.attainable = true;
        rep.reason = "single cavity: every n=1 configuration is attainable";
        return rep;
    }
    if (rep.sigma >= 1.0) {
        rep.attainable = true;
        rep.reason = "sigma >= 1";
        return rep;
    }
    if (rep.lambda * rep.lambda < 1.0 / (1.0 - rep.sigma)) {
        rep.attainable = true;
        rep.reason = "lambda^2 < 1/(1-sigma)";
        return rep;
    }
    rep.attainable = false;
    rep.reason = "not certified: lambda^2 >= 1/(1-sigma); the sufficient test "
                 "does not cover this configuration";
    return rep;
}

double packing_density(const CavitationConfig& config) {
    config.validate();
    const std::size_t n = config.count();
    for (std::size_t i = 1; i < n; ++i) {
        if (std::abs(config.areas[i] - config.areas[0]) >
            1e-12 * std::max(config.areas[i], config.areas[0]))
            throw ConfigError("packing_density: areas must be equal");
    }
    const double R0 = config.R0;
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const double t = R0 - config.sites[i].norm();
        m = std::min(m, t * t);
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double h = 0.5 * (config.sites[i] - config.sites[j]).norm();
            m = std::min(m, h * h);
        }
    }
    return static_cast<double>(n) * kPi * m / (kPi * R0 * R0);
}

std::vector<double> proportional_areas(const std::vector<double>& seed_radii, double R0,
                                       double lambda) {
    if (seed_radii.empty()) throw ConfigError("proportional_areas: no seed radii");
    double sum_d2 = 0.0;
    for (double d : seed_radii) {
        if (!(d > 0.0)) throw ConfigError("proportional_areas: seed radii must be positive");
        sum_d2 += d * d;
    }
    const double total = (lambda * lambda - 1.0) * kPi * R0 * R0;
    std::vector<double> v(seed_radii.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = total * (seed_radii[i] * seed_radii[i]) / sum_d2;
    }
    return v;
}

CoalescenceBounds coalescence_bounds(const std::vector<double>& seed_radii,
                                     const std::vector<double>& min_areas, double R0) {
    if (seed_radii.size() != min_areas.size() || seed_radii.empty())
        throw ConfigError("coalescence_bounds: seed_radii/min_areas size mismatch");
    CoalescenceBounds out;
    double sum_d2 = 0.0;
    for (double d : seed_radii) sum_d2 += d * d;
    out.sigma_star = sum_d2 / (R0 * R0);
    if (!(out.sigma_star < 1.0))
        throw ConfigError("coalescence_bounds: seed disks fill the domain (sigma* >= 1)");
    out.lambda_star = 1.0 / std::sqrt(1.0 - out.sigma_star);
    double max_ratio = 0.0;
    for (std::size_t i = 0; i < seed_radii.size(); ++i) {
        const double cap = kPi * seed_radii[i] * seed_radii[i] / (1.0 - out.sigma_star);
        if (!(min_areas[i] < cap)) {
            std::ostringstream os;
            os << "coalescence_bounds: min_area[" << i << "] = " << min_areas[i]
               << " exceeds pi*d^2/(1-sigma*) = " << cap;
            throw ConfigError(os.str());
        }
        max_ratio = std::max(max_ratio, min_areas[i] / (kPi * seed_radii[i] * seed_radii[i]));
    }
    out.lambda0 = std::sqrt(1.0 + max_ratio * out.sigma_star);
    return out;
}

namespace {

// clearance of the cavity disks B_{L_i(t)}(z_i(t)) for one skeleton at time t
double cavity_clearance(const EvolutionSkeleton& skel, std::size_t i, double t) {
    const double R0 = skel.R0;
    const double Li = std::sqrt(std::max(0.0, (t * t - 1.0) * skel.area_fraction[i])) * R0;
    const Vec2 zi = skel.centers[i].at(t);
    double c = t * R0 - zi.norm() - Li;
    for (std::size_t j = 0; j < skel.centers.size(); ++j) {
        if (j == i) continue;
        const double Lj = std::sqrt(std::max(0.0, (t * t - 1.0) * skel.area_fraction[j])) * R0;
        const Vec2 zj = skel.centers[j].at(t);
        c = std::min(c, (zi - zj).norm() - Li - Lj);
    }
    return c;
}

// smallest clearance of the excised-hole disks over the grid, for given R_i
double hole_system_clearance(const EvolutionSkeleton& skel, const std::vector<double>& Ri,
                             int grid_points) {
    const std::size_t n = skel.centers.size();
    double gmin = std::numeric_limits<double>::infinity();
    for (int k = 0; k < grid_points; ++k) {
        const double t = 1.0 + (skel.lambda - 1.0) * k / (grid_points - 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double L2 = (t * t - 1.0) * skel.area_fraction[i] * skel.R0 * skel.R0;
            const double ri = std::sqrt(L2 + Ri[i] * Ri[i]);
            const Vec2 zi = skel.centers[i].at(t);
            gmin = std::min(gmin, t * skel.R0 - zi.norm() - ri);
            for (std::size_t j = i + 1; j < n; ++j) {
                const double L2j = (t * t - 1.0) * skel.area_fraction[j] * skel.R0 * skel.R0;
                const double rj = std::sqrt(L2j + Ri[j] * Ri[j]);
                gmin = std::min(gmin, (zi - skel.centers[j].at(t)).norm() - ri - rj);
            }
        }
    }
    return gmin;
}

}  // namespace

ExcisionResult select_excision(const EvolutionSkeleton& skel, const ExcisionOptions& opts) {
    const std::size_t n = skel.centers.size();
    std::vector<double> clearance(n, std::numeric_limits<double>::infinity());
    for (int k = 0; k < opts.grid_points; ++k) {
        const double t = 1.0 + (skel.lambda - 1.0) * k / (opts.grid_points - 1);
        for (std::size_t i = 0; i < n; ++i) {
            clearance[i] = std::min(clearance[i], cavity_clearance(skel, i, t));
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!(clearance[i] > 0.0))
            throw NotCertifiedError("select_excision: cavity " + std::to_string(i) +
                                    " has no positive clearance along the evolution");
    }
    for (double beta = opts.beta; beta >= opts.beta_min * (1.0 - 1e-12); beta *= 0.5) {
        ExcisionResult res;
        res.radii.resize(n);
        for (std::size_t i = 0; i < n; ++i) res.radii[i] = beta * clearance[i];
        const double gmin = hole_system_clearance(skel, res.radii, opts.grid_points);
        if (gmin > 0.0) {
            double d = gmin / 4.0;
            for (double R : res.radii) d = std::min(d, R);
            res.margin = d;
            return res;
        }
    }
    throw NotCertifiedError(
        "select_excision: no positive hole margin found down to beta = 1/64");
}

Evolution build_evolution(const CavitationConfig& config, const ExcisionOptions& opts) {
    const AttainabilityReport rep = check_attainable(config);
    if (!rep.attainable) throw NotCertifiedError("build_evolution: " + rep.reason);

    EvolutionSkeleton skel;
    skel.R0 = config.R0;
    skel.lambda = rep.lambda;
    const std::size_t n = config.count();
    const double total = config.total_area();
    skel.area_fraction.resize(n);
    skel.centers.resize(n);
    for (std::size_t i = 0; i < n; ++i) skel.area_fraction[i] = config.areas[i] / total;

    if (n >= 2) {
        for (std::size_t i = 0; i < n; ++i) {
            skel.centers[i].kind = CenterPath::Kind::LinearInT;
            skel.centers[i].site = config.sites[i];
        }
    } else {
        // For a single cavity the center is kept fixed at the site whenever the
        // cavity fits there for all t; otherwise it travels inward along a C^1
        // path ending at shrink_factor(lambda) * a.
        const Vec2 a = config.sites[0];
        const double rho = a.norm() / config.R0;
        const double h_end = shrink_factor(skel.lambda);
        if (rho < h_end * (1.0 - 1e-9)) {
            skel.centers[0].kind = CenterPath::Kind::Constant;
            skel.centers[0].site = a;
            skel.centers[0].fixed_point = a;
        } else {
            skel.centers[0].kind = CenterPath::Kind::Plunge;
            skel.centers[0].site = a;
            bool ok = false;
            for (double c = 1.0 / (skel.lambda - 1.0); c <= 1024.0 / (skel.lambda - 1.0);
                 c *= 2.0) {
                skel.centers[0].plunge_c = c;
                double worst = std::numeric_limits<double>::infinity();
                for (int k = 0; k < opts.grid_points; ++k) {
                    const double t = 1.0 + (skel.lambda - 1.0) * k / (opts.grid_points - 1);
                    worst = std::min(worst, cavity_clearance(skel, 0, t));
                }
                if (worst > 0.0) {
                    ok = true;
                    break;
                }
            }
            if (!ok)
                throw NotCertifiedError(
                    "build_evolution: no admissible single-cavity center path found");
        }
    }

    const ExcisionResult exc = select_excision(skel, opts);

    Evolution evo;
    evo.R0 = skel.R0;
    evo.lambda = skel.lambda;
    evo.centers = skel.centers;
    evo.area_fraction = skel.area_fraction;
    evo.excision_radii = exc.radii;
    evo.margin = exc.margin;
    evo.r_max = evo.lambda * evo.R0;
    validate_evolution(evo, config, opts.grid_points);
    return evo;
}

HoleDomain domain_at(const Evolution& evolution, double t) {
    if (t < 1.0 - 1e-12 || t > evolution.lambda + 1e-12)
        throw DomainError("domain_at: t outside [1, lambda]");
    t = std::clamp(t, 1.0, evolution.lambda);
    HoleDomain dom;
    dom.outer_center = {0.0, 0.0};
    dom.outer_radius = evolution.outer_radius(t);
    dom.holes.resize(evolution.count());
    for (std::size_t i = 0; i < evolution.count(); ++i) {
        dom.holes[i] = {evolution.center(i, t), evolution.hole_radius(i, t)};
    }
    return dom;
}

void validate_evolution(const Evolution& evo, const CavitationConfig& config, int grid_points) {
    const std::size_t n = evo.count();
    const double R0 = evo.R0;
    const double areaRef = kPi * R0 * R0;
    if (!(evo.margin > 0.0)) throw NotCertifiedError("evolution: margin d must be positive");

    for (std::size_t i = 0; i < n; ++i) {
        if ((evo.center(i, 1.0) - config.sites[i]).norm() > 1e-12 * R0)
            throw NotCertifiedError("evolution: z_i(1) != a_i for cavity " + std::to_string(i));
        if (std::abs(evo.cavity_radius(i, 1.0)) > 1e-12 * R0)
            throw NotCertifiedError("evolution: L_i(1) != 0 for cavity " + std::to_string(i));
        const double vi = kPi * evo.cavity_radius_sq(i, evo.lambda);
        if (std::abs(vi - config.areas[i]) > 1e-10 * std::max(1.0, config.areas[i]))
            throw NotCertifiedError("evolution: final cavity area mismatch for cavity " +
                                    std::to_string(i));
    }

    for (int k = 0; k < grid_points; ++k) {
        const double t = 1.0 + (evo.lambda - 1.0) * k / (grid_points - 1);
        double sumL2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) sumL2 += evo.cavity_radius_sq(i, t);
        const double target = (t * t - 1.0) * R0 * R0;
        if (std::abs(kPi * sumL2 - kPi * target) > 1e-12 * std::max(areaRef, kPi * target))
            throw NotCertifiedError("evolution: area conservation violated at t");

        const double d = evo.margin;
        for (std::size_t i = 0; i < n; ++i) {
            const double ri = evo.hole_radius(i, t);
            if (!(ri >= d))
                throw NotCertifiedError("evolution: r_i(t) < d for cavity " + std::to_string(i));
            if (!(ri <= evo.r_max + 1e-12))
                throw NotCertifiedError("evolution: r_i(t) > r_max");
            const Vec2 zi = evo.center(i, t);
            if (!(zi.norm() + ri + d <= t * R0 - d + 1e-12 * R0))
                throw NotCertifiedError("evolution: hole " + std::to_string(i) +
                                        " too close to the outer boundary");
            for (std::size_t j = i + 1; j < n; ++j) {
                const double rj = evo.hole_radius(j, t);
                if (!((zi - evo.center(j, t)).norm() >= ri + rj + 2.0 * d - 1e-12 * R0))
                    throw NotCertifiedError("evolution: holes " + std::to_string(i) + "," +
                                            std::to_string(j) + " violate the margin");
            }
        }
    }
}

}  // namespace cavflow
