#include "cavflow/cavity.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace cavflow {

NearMapSet::NearMapSet(const Evolution& evolution) {
    cavities_.resize(evolution.count());
    for (std::size_t i = 0; i < evolution.count(); ++i) {
        cavities_[i].site = evolution.centers[i].site;
        cavities_[i].final_center = evolution.center(i, evolution.lambda);
        cavities_[i].L = evolution.cavity_radius(i, evolution.lambda);
        cavities_[i].R = evolution.excision_radii[i];
    }
}

int NearMapSet::locate(Vec2 x, double tol) const {
    for (std::size_t i = 0; i < cavities_.size(); ++i) {
        if ((x - cavities_[i].site).norm() <= cavities_[i].R + tol) return static_cast<int>(i);
    }
    return -1;
}

Vec2 NearMapSet::map_on(std::size_t i, Vec2 x) const {
    const Cavity& c = cavities_[i];
    const Vec2 z = x - c.site;
    const double r = z.norm();
    if (!(r > 0.0)) throw DomainError("near map: evaluation at the cavity site");
    return c.final_center + z * (std::sqrt(c.L * c.L + r * r) / r);
}

Mat2 NearMapSet::gradient_on(std::size_t i, Vec2 x) const {
    const Cavity& c = cavities_[i];
    const Vec2 z = x - c.site;
    const double r = z.norm();
    if (!(r > 0.0)) throw DomainError("near map: evaluation at the cavity site");
    const Vec2 e = z / r;
    const Vec2 ie = e.perp();
    const double fr = r / std::sqrt(c.L * c.L + r * r);
    const double ft = std::sqrt(1.0 + c.L * c.L / (r * r));
    return fr * Mat2::outer(e, e) + ft * Mat2::outer(ie, ie);
}

Vec2 NearMapSet::map(Vec2 x) const {
    const int i = locate(x, 1e-12);
    if (i < 0) throw DomainError("near map: point outside all excision annuli");
    return map_on(static_cast<std::size_t>(i), x);
}

Mat2 NearMapSet::gradient(Vec2 x) const {
    const int i = locate(x, 1e-12);
    if (i < 0) throw DomainError("near map: point outside all excision annuli");
    return gradient_on(static_cast<std::size_t>(i), x);
}

double near_energy_exact(double L, double R, double eps) {
    if (!(eps > 0.0) || !(eps < R)) throw ConfigError("near_energy_exact: need 0 < eps < R");
    // antiderivative of pi * (r^3/(L^2+r^2) + r + L^2/r)
    auto anti = [L](double r) {
        const double L2 = L * L;
        double v = r * r - 0.5 * L2 * std::log(L2 + r * r);
        if (L2 > 0.0) v += L2 * std::log(r);
        return kPi * v;
    };
    return anti(R) - anti(eps);
}

FullMap::FullMap(const Evolution& evolution, double eps, FlowOptions flow)
    : evolution_(evolution), eps_(eps), flow_(std::move(flow)), near_(evolution) {
    for (const auto& c : near_.cavities()) {
        if (!(eps_ > 0.0 && eps_ < c.R))
            throw ConfigError("full map: eps must satisfy 0 < eps < min R_i");
    }
}

std::vector<Vec2> FullMap::map(const std::vector<Vec2>& points) {
    std::vector<Vec2> out(points.size());
    std::vector<Vec2> far_pts;
    std::vector<std::size_t> far_idx;
    const double R0 = evolution_.R0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        const int c = near_.locate(points[i], 0.0);
        if (c >= 0) {
            const double r = (points[i] - near_.cavities()[c].site).norm();
            if (r < eps_ * (1.0 - 1e-12))
                throw DomainError("full map: point inside an eps-disk");
            out[i] = near_.map_on(static_cast<std::size_t>(c), points[i]);
        } else {
            if (points[i].norm() > R0 * (1.0 + 1e-12))
                throw DomainError("full map: point outside the reference disk");
            far_idx.push_back(i);
            far_pts.push_back(points[i]);
        }
    }
    if (!far_pts.empty()) {
        std::vector<int> tags(far_pts.size(), -1);
        for (std::size_t k = 0; k < far_pts.size(); ++k) {
            if (std::abs(far_pts[k].norm() - R0) <= 1e-12 * R0) tags[k] = 0;
        }
        const TrajectoryBatch batch = integrate_flow(far_pts, tags, evolution_, flow_);
        const auto& img = batch.final_positions();
        for (std::size_t k = 0; k < far_idx.size(); ++k) out[far_idx[k]] = img[k];
    }
    return out;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace

namespace {

// One stratification cell: an annular sector about `center` with the squared
// radius uniform in [r2lo, r2hi] and the angle uniform in [tlo, thi].
struct StratCell {
    Vec2 center;
    double r2lo, r2hi, tlo, thi;
    double area;
    int samples;
    bool clip_bands;  // global cells exclude the per-hole bands
};

}  // namespace

// The deformation gradient is large in a band of width a few d around each
// hole (the cutoff corrections shear material there), so the sampling is
// stratified into fine annular cells around every hole plus equal-area polar
// cells for the bulk; band points are excluded from the bulk strata.
FarEnergy far_field_energy(const Evolution& evolution, const EnergyOptions& opts,
                           const FlowStageCache* cache) {
    const HoleDomain dom1 = domain_at(evolution, 1.0);
    const double R0 = evolution.R0;
    const std::size_t nholes = dom1.holes.size();

    // band widths, capped so bands stay inside E(1) and never overlap
    std::vector<double> band_w(nholes);
    for (std::size_t i = 0; i < nholes; ++i) {
        const auto& hi = dom1.holes[i];
        double gap = R0 - (hi.center).norm() - hi.radius;
        for (std::size_t j = 0; j < nholes; ++j) {
            if (j == i) continue;
            gap = std::min(gap, (hi.center - dom1.holes[j].center).norm() - hi.radius -
                                    dom1.holes[j].radius);
        }
        band_w[i] = std::min(3.0 * evolution.margin, 0.45 * gap);
    }
    auto in_band = [&](Vec2 p) {
        for (std::size_t i = 0; i < nholes; ++i) {
            const double rho = (p - dom1.holes[i].center).norm();
            if (rho >= dom1.holes[i].radius && rho < dom1.holes[i].radius + band_w[i])
                return true;
        }
        return false;
    };

    constexpr int kBandRadial = 16;
    constexpr int kBandAngular = 64;
    constexpr int kBulkRadial = 48;
    constexpr int kBulkAngular = 72;

    int budget = opts.mc_points;
    for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
        std::vector<StratCell> cells;
        const std::size_t band_cells = nholes * kBandRadial * kBandAngular;
        const int k_band =
            std::max(2, static_cast<int>(std::llround(0.4 * budget / std::max<std::size_t>(
                                                                        band_cells, 1))));
        for (std::size_t i = 0; i < nholes; ++i) {
            const double R = dom1.holes[i].radius;
            for (int jr = 0; jr < kBandRadial; ++jr) {
                const double rlo = R + band_w[i] * jr / kBandRadial;
                const double rhi = R + band_w[i] * (jr + 1) / kBandRadial;
                for (int jt = 0; jt < kBandAngular; ++jt) {
                    StratCell c;
                    c.center = dom1.holes[i].center;
                    c.r2lo = rlo * rlo;
                    c.r2hi = rhi * rhi;
                    c.tlo = 2.0 * kPi * jt / kBandAngular;
                    c.thi = 2.0 * kPi * (jt + 1) / kBandAngular;
                    c.area = 0.5 * (c.r2hi - c.r2lo) * (c.thi - c.tlo);
                    c.samples = k_band;
                    c.clip_bands = false;
                    cells.push_back(c);
                }
            }
        }
        const std::size_t bulk_cells = static_cast<std::size_t>(kBulkRadial) * kBulkAngular;
        const int k_bulk = std::max(
            1, static_cast<int>(std::llround(
                   std::max(0.0, budget - 1.0 * band_cells * k_band) / bulk_cells)));
        for (int jr = 0; jr < kBulkRadial; ++jr) {
            for (int jt = 0; jt < kBulkAngular; ++jt) {
                StratCell c;
                c.center = {0.0, 0.0};
                c.r2lo = R0 * R0 * jr / kBulkRadial;
                c.r2hi = R0 * R0 * (jr + 1) / kBulkRadial;
                c.tlo = 2.0 * kPi * jt / kBulkAngular;
                c.thi = 2.0 * kPi * (jt + 1) / kBulkAngular;
                c.area = 0.5 * (c.r2hi - c.r2lo) * (c.thi - c.tlo);
                c.samples = k_bulk;
                c.clip_bands = true;
                cells.push_back(c);
            }
        }

        std::vector<Vec2> pts;
        std::vector<std::size_t> cell_of;
        std::vector<char> counted;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const StratCell& sc = cells[c];
            std::mt19937_64 rng(splitmix64(opts.rng_seed ^ (0x5b1ceull * (c + 1))));
            std::uniform_real_distribution<double> ur(0.0, 1.0);
            for (int k = 0; k < sc.samples; ++k) {
                const double rho = std::sqrt(sc.r2lo + ur(rng) * (sc.r2hi - sc.r2lo));
                const double theta = sc.tlo + ur(rng) * (sc.thi - sc.tlo);
                const Vec2 p = sc.center + Vec2{rho * std::cos(theta), rho * std::sin(theta)};
                bool in = true;
                if (sc.clip_bands) {
                    if (in_band(p)) in = false;
                    for (const auto& h : dom1.holes) {
                        if ((p - h.center).norm() <= h.radius) in = false;
                    }
                }
                pts.push_back(p);
                cell_of.push_back(c);
                counted.push_back(in ? 1 : 0);
            }
        }

        std::vector<Vec2> seeds;
        std::vector<std::size_t> seed_slot(pts.size(), SIZE_MAX);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (counted[i]) {
                seed_slot[i] = seeds.size();
                seeds.push_back(pts[i]);
            }
        }
        FlowOptions fo = opts.flow;
        fo.checkpoints = 2;  // only the endpoint matters here
        const TrajectoryBatch batch =
            integrate_flow(seeds, std::vector<int>(seeds.size(), -1), evolution, fo, cache);
        const auto& F = batch.final_gradients();

        // per-cell means and variances, combined in fixed cell order
        std::vector<double> sum(cells.size(), 0.0), sum2(cells.size(), 0.0);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double v = 0.0;
            if (counted[i]) v = 0.5 * F[seed_slot[i]].frob2();
            sum[cell_of[i]] += v;
            sum2[cell_of[i]] += v * v;
        }
        double total = 0.0, var = 0.0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const int k = cells[c].samples;
            const double mean = sum[c] / k;
            total += cells[c].area * mean;
            if (k > 1) {
                const double s2 = std::max(0.0, (sum2[c] - k * mean * mean) / (k - 1));
                var += cells[c].area * cells[c].area * s2 / k;
            }
        }
        FarEnergy out;
        out.value = total;
        out.std_error = std::sqrt(var);
        out.points = static_cast<int>(pts.size());
        if (out.std_error <= opts.stderr_frac * std::max(out.value, 1e-300)) return out;
        if (attempt == opts.max_retries) {
            std::ostringstream os;
            os << "far energy: Monte Carlo standard error " << out.std_error << " above "
               << opts.stderr_frac << " of the estimate after retries; increase mc_points";
            throw CertificateError(os.str());
        }
        budget *= 2;
    }
    throw Error("far_field_energy: unreachable");
}

EnergyReport energy_sweep(const Evolution& evolution, const std::vector<double>& eps_grid,
                          const EnergyOptions& opts, const FlowStageCache* cache) {
    if (eps_grid.empty()) throw ConfigError("energy_sweep: empty eps grid");
    EnergyReport rep;
    rep.far = far_field_energy(evolution, opts, cache);
    rep.sum_areas = (evolution.lambda * evolution.lambda - 1.0) * kPi * evolution.R0 *
                    evolution.R0;
    for (double eps : eps_grid) {
        double near = 0.0;
        for (std::size_t i = 0; i < evolution.count(); ++i) {
            near += near_energy_exact(evolution.cavity_radius(i, evolution.lambda),
                                      evolution.excision_radii[i], eps);
        }
        const double total = near + rep.far.value;
        rep.eps.push_back(eps);
        rep.near_exact.push_back(near);
        rep.total.push_back(total);
        rep.log_eps.push_back(std::abs(std::log(eps)));
        rep.bound_gap.push_back(total - rep.sum_areas * std::abs(std::log(eps)));
    }
    return rep;
}

BoundFit bound_check(const EnergyReport& report, double slope_tol, double resid_tol) {
    const std::size_t n = report.eps.size();
    if (n < 4) throw ConfigError("bound_check: at least 4 eps values required");
    double smin = report.log_eps[0], smax = report.log_eps[0];
    for (double s : report.log_eps) {
        smin = std::min(smin, s);
        smax = std::max(smax, s);
    }
    if (smax - smin < std::log(10.0) * 1.5 * 0.999)
        throw ConfigError("bound_check: eps grid must span at least 1.5 decades");

    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sx += report.log_eps[i];
        sy += report.total[i];
        sxx += report.log_eps[i] * report.log_eps[i];
        sxy += report.log_eps[i] * report.total[i];
    }
    const double den = n * sxx - sx * sx;
    BoundFit fit;
    fit.slope = (n * sxy - sx * sy) / den;
    fit.intercept = (sy - fit.slope * sx) / n;
    fit.slope_target = report.sum_areas;
    fit.slope_rel_dev = std::abs(fit.slope - fit.slope_target) / fit.slope_target;
    for (std::size_t i = 0; i < n; ++i) {
        const double pred = fit.intercept + fit.slope * report.log_eps[i];
        fit.max_resid_rel =
            std::max(fit.max_resid_rel, std::abs(pred - report.total[i]) / report.total[i]);
    }
    fit.pass = fit.slope_rel_dev <= slope_tol && fit.max_resid_rel <= resid_tol;
    return fit;
}

double polygon_area(const std::vector<Vec2>& poly) {
    double a = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % poly.size()];
        a += p.cross(q);
    }
    return 0.5 * std::abs(a);
}

Vec2 polygon_centroid(const std::vector<Vec2>& poly) {
    double a = 0.0;
    Vec2 c{0.0, 0.0};
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& p = poly[i];
        const Vec2& q = poly[(i + 1) % poly.size()];
        const double w = p.cross(q);
        a += w;
        c += (p + q) * w;
    }
    if (std::abs(a) < 1e-300) throw ConfigError("polygon_centroid: degenerate polygon");
    return c / (3.0 * a);
}

namespace {

// signed area of triangle (0, A, B) clipped to the disk of radius r about 0
double clipped_triangle_area(Vec2 A, Vec2 B, double r) {
    const double r2 = r * r;
    const Vec2 d = B - A;
    // |A + t d|^2 = r^2
    const double a = d.norm2();
    double ts[2];
    int nts = 0;
    if (a > 0.0) {
        const double b = 2.0 * A.dot(d);
        const double c = A.norm2() - r2;
        const double disc = b * b - 4.0 * a * c;
        if (disc > 0.0) {
            const double sq = std::sqrt(disc);
            const double t1 = (-b - sq) / (2.0 * a);
            const double t2 = (-b + sq) / (2.0 * a);
            if (t1 > 0.0 && t1 < 1.0) ts[nts++] = t1;
            if (t2 > 0.0 && t2 < 1.0) ts[nts++] = t2;
        }
    }
    double area = 0.0;
    Vec2 prev = A;
    double tprev = 0.0;
    for (int k = 0; k <= nts; ++k) {
        const double tnext = k < nts ? ts[k] : 1.0;
        const Vec2 next = A + (B - A) * tnext;
        const Vec2 mid = A + (B - A) * (0.5 * (tprev + tnext));
        if (mid.norm2() <= r2) {
            area += 0.5 * prev.cross(next);
        } else {
            area += 0.5 * r2 * std::atan2(prev.cross(next), prev.dot(next));
        }
        prev = next;
        tprev = tnext;
    }
    return area;
}

}  // namespace

double polygon_disk_intersection_area(const std::vector<Vec2>& poly, Vec2 center, double radius) {
    double area = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2 A = poly[i] - center;
        const Vec2 B = poly[(i + 1) % poly.size()] - center;
        area += clipped_triangle_area(A, B, radius);
    }
    return std::abs(area);
}

std::vector<Vec2> circle_polygon(Vec2 center, double radius, int segments) {
    std::vector<Vec2> poly(segments);
    for (int k = 0; k < segments; ++k) {
        const double theta = 2.0 * kPi * k / segments;
        poly[k] = center + Vec2{radius * std::cos(theta), radius * std::sin(theta)};
    }
    return poly;
}

double fraenkel_asymmetry(const std::vector<Vec2>& poly) {
    if (poly.size() < 3) throw ConfigError("fraenkel_asymmetry: degenerate polygon");
    const double area = polygon_area(poly);
    if (!(area > 0.0)) throw ConfigError("fraenkel_asymmetry: degenerate polygon");
    const double r = std::sqrt(area / kPi);

    double diam = 0.0;
    for (const Vec2& p : poly) {
        for (const Vec2& q : poly) diam = std::max(diam, (p - q).norm());
    }

    auto D = [&](Vec2 c) {
        return 2.0 * (1.0 - polygon_disk_intersection_area(poly, c, r) / area);
    };

    // coarse grid around the centroid, then pattern-search refinement
    const Vec2 c0 = polygon_centroid(poly);
    Vec2 best = c0;
    double bestD = D(c0);
    const double span = 0.5 * diam;
    for (int i = -4; i <= 4; ++i) {
        for (int j = -4; j <= 4; ++j) {
            const Vec2 c = c0 + Vec2{span * i / 4.0, span * j / 4.0};
            const double v = D(c);
            if (v < bestD) {
                bestD = v;
                best = c;
            }
        }
    }
    double step = span / 4.0;
    while (step > 1e-9 * diam) {
        bool improved = false;
        static const Vec2 dirs[8] = {{1, 0},  {-1, 0}, {0, 1},  {0, -1},
                                     {1, 1},  {1, -1}, {-1, 1}, {-1, -1}};
        for (const Vec2& d : dirs) {
            const Vec2 c = best + step * d;
            const double v = D(c);
            if (v < bestD - 1e-15) {
                bestD = v;
                best = c;
                improved = true;
            }
        }
        if (!improved) step *= 0.5;
    }
    return std::max(0.0, bestD);
}

DistortionTerms distortion_bound_terms(const std::vector<double>& areas,
                                       const std::vector<double>& asymmetries,
                                       const std::vector<double>& neighbor_dists, double R,
                                       double eps) {
    if (areas.size() != asymmetries.size() || areas.size() != neighbor_dists.size())
        throw ConfigError("distortion_bound_terms: size mismatch");
    if (!(eps > 0.0) || !(R > 0.0)) throw ConfigError("distortion_bound_terms: bad R or eps");
    DistortionTerms out;
    for (std::size_t i = 0; i < areas.size(); ++i) {
        out.round_cost += areas[i] * std::log(R / eps);
        const double vD2 = areas[i] * asymmetries[i] * asymmetries[i];
        if (vD2 > 0.0) {
            out.distortion_cost +=
                vD2 * std::log(std::min(neighbor_dists[i], std::sqrt(vD2)) / eps);
        }
    }
    return out;
}

}  // namespace cavflow
