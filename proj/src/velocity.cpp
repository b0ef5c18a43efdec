#include "cavflow/velocity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cavflow {

double CutoffSpec::zeta(double s) {
    if (s <= 0.0) return 1.0;
    if (s >= 1.0) return 0.0;
    return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

double CutoffSpec::dzeta(double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    return -s * s * (30.0 - 60.0 * s + 30.0 * s * s);
}

double CutoffSpec::d2zeta(double s) {
    if (s <= 0.0 || s >= 1.0) return 0.0;
    return -s * (60.0 - 180.0 * s + 120.0 * s * s);
}

namespace {

// derivative matrix of the field (f_y, -f_x) given the Hessian of f
inline Mat2 perp_rows(const Mat2& H) {
    return {H.c, H.d, -H.a, -H.b};
}

struct CollarGeom {
    bool active = false;
    std::size_t circle = 0;  // 0 = outer
    double rho = 0.0;
    Vec2 e;        // unit radial from the circle's center
    double s = 0.0;
    Vec2 grad_dist;
    Vec2 q;        // projection onto the circle
    double rc = 0.0;
    bool outer = false;
};

// locate the chi collar (width d/2); margins make the nearest circle unique
CollarGeom find_collar(const HoleDomain& dom, double d, Vec2 y) {
    CollarGeom g;
    const double half = 0.5 * d;
    const double rho0 = (y - dom.outer_center).norm();
    double best = dom.outer_radius - rho0;
    std::size_t best_c = 0;
    for (std::size_t k = 0; k < dom.holes.size(); ++k) {
        const double dist = (y - dom.holes[k].center).norm() - dom.holes[k].radius;
        if (dist < best) {
            best = dist;
            best_c = k + 1;
        }
    }
    if (best >= half) return g;
    g.active = true;
    g.circle = best_c;
    g.outer = best_c == 0;
    const Vec2 zc = g.outer ? dom.outer_center : dom.holes[best_c - 1].center;
    g.rc = g.outer ? dom.outer_radius : dom.holes[best_c - 1].radius;
    const Vec2 z = y - zc;
    g.rho = z.norm();
    g.e = g.rho > 0.0 ? z / g.rho : Vec2{1.0, 0.0};
    g.s = std::max(0.0, best) / half;
    g.grad_dist = g.outer ? -g.e : g.e;
    g.q = zc + g.rc * g.e;
    return g;
}

}  // namespace

Vec2 VelocityEvaluator::boundary_target(std::size_t circle, double theta) const {
    const Vec2 e{std::cos(theta), std::sin(theta)};
    Vec2 v{0.0, 0.0};
    if (has_growth) v += normal_rates[circle] * e;
    if (has_translation && circle >= 1) v += center_rates[circle - 1];
    return v;
}

void VelocityEvaluator::eval_batch(const double* xs, const double* ys, std::size_t n, double* vx,
                                   double* vy, double* g00, double* g01, double* g10,
                                   double* g11) const {
    const bool want_grad = g00 != nullptr;
    const unsigned what_grad =
        want_grad ? (kernels::kGrad | kernels::kHess) : kernels::kGrad;

    std::fill(vx, vx + n, 0.0);
    std::fill(vy, vy + n, 0.0);
    if (want_grad) {
        std::fill(g00, g00 + n, 0.0);
        std::fill(g01, g01 + n, 0.0);
        std::fill(g10, g10 + n, 0.0);
        std::fill(g11, g11 + n, 0.0);
    }

    if (has_growth) {
        std::vector<double> pgx(n, 0.0), pgy(n, 0.0), phxx, phxy;
        std::vector<double> vgx(n, 0.0), vgy(n, 0.0), vhxx, vhxy;
        kernels::EvalSink psink, vsink;
        psink.gx = pgx.data();
        psink.gy = pgy.data();
        vsink.gx = vgx.data();
        vsink.gy = vgy.data();
        if (want_grad) {
            phxx.assign(n, 0.0);
            phxy.assign(n, 0.0);
            vhxx.assign(n, 0.0);
            vhxy.assign(n, 0.0);
            psink.hxx = phxx.data();
            psink.hxy = phxy.data();
            vsink.hxx = vhxx.data();
            vsink.hxy = vhxy.data();
        }
        phi.eval_raw(xs, ys, n, psink, what_grad);
        varphi.eval_raw(xs, ys, n, vsink, what_grad);

        // collar corrections need varphi at the projected points
        std::vector<std::size_t> collar_idx;
        std::vector<CollarGeom> collar;
        std::vector<double> qx, qy;
        for (std::size_t i = 0; i < n; ++i) {
            CollarGeom cg = find_collar(domain, margin, {xs[i], ys[i]});
            if (cg.active) {
                collar_idx.push_back(i);
                collar.push_back(cg);
                qx.push_back(cg.q.x);
                qy.push_back(cg.q.y);
            }
        }
        std::vector<double> qval(collar_idx.size(), 0.0), qgx(collar_idx.size(), 0.0),
            qgy(collar_idx.size(), 0.0), qhxx, qhxy;
        if (!collar_idx.empty()) {
            kernels::EvalSink qsink;
            qsink.val = qval.data();
            qsink.gx = qgx.data();
            qsink.gy = qgy.data();
            unsigned what = kernels::kValue | kernels::kGrad;
            if (want_grad) {
                qhxx.assign(collar_idx.size(), 0.0);
                qhxy.assign(collar_idx.size(), 0.0);
                qsink.hxx = qhxx.data();
                qsink.hxy = qhxy.data();
                what |= kernels::kHess;
            }
            varphi.eval_raw(qx.data(), qy.data(), qx.size(), qsink, what);
        }

        for (std::size_t i = 0; i < n; ++i) {
            // v += D(phi) + Dperp(varphi)
            vx[i] += pgx[i] + vgy[i];
            vy[i] += pgy[i] - vgx[i];
            if (want_grad) {
                const Mat2 Hphi{phxx[i], phxy[i], phxy[i], -phxx[i]};
                const Mat2 Hvar{vhxx[i], vhxy[i], vhxy[i], -vhxx[i]};
                const Mat2 G = Hphi + perp_rows(Hvar);
                g00[i] += G.a;
                g01[i] += G.b;
                g10[i] += G.c;
                g11[i] += G.d;
            }
        }

        const double half = 0.5 * margin;
        for (std::size_t ci = 0; ci < collar_idx.size(); ++ci) {
            const std::size_t i = collar_idx[ci];
            const CollarGeom& cg = collar[ci];
            const double Z = CutoffSpec::zeta(cg.s);
            const double Zp = CutoffSpec::dzeta(cg.s) / half;
            const double Vq = qval[ci];
            const Vec2 Gq{qgx[ci], qgy[ci]};
            const Mat2 P = Mat2::identity() - Mat2::outer(cg.e, cg.e);
            const double scale = cg.rc / cg.rho;
            // Dq is symmetric: (rc/rho) * P
            const Vec2 DqG = scale * P.apply(Gq);

            // chi = Z * Vq ; psi correction is subtracted from varphi
            const Vec2 grad_chi = Zp * Vq * cg.grad_dist + Z * DqG;
            vx[i] -= grad_chi.y;
            vy[i] -= -grad_chi.x;

            if (want_grad) {
                const double Zpp = CutoffSpec::d2zeta(cg.s) / (half * half);
                const Mat2 Hdist = (cg.outer ? -1.0 : 1.0) * (1.0 / cg.rho) * P;
                const Mat2 Hq{qhxx[ci], qhxy[ci], qhxy[ci], -qhxx[ci]};

                Mat2 Hchi = Zpp * Vq * Mat2::outer(cg.grad_dist, cg.grad_dist);
                Hchi += Zp * Vq * Hdist;
                Hchi += Zp * (Mat2::outer(cg.grad_dist, DqG) + Mat2::outer(DqG, cg.grad_dist));
                // second derivatives of q contracted with the gradient of varphi
                const Vec2 Pg = P.apply(Gq);
                const double ge = Gq.dot(cg.e);
                const Mat2 T = (-cg.rc / (cg.rho * cg.rho)) *
                               (Mat2::outer(Pg, cg.e) + Mat2::outer(cg.e, Pg) + ge * P);
                Hchi += Z * T;
                const Mat2 DqT = scale * P;  // symmetric
                Hchi += Z * DqT.mul(Hq).mul(DqT);

                const Mat2 G = perp_rows(Hchi);
                g00[i] -= G.a;
                g01[i] -= G.b;
                g10[i] -= G.c;
                g11[i] -= G.d;
            }
        }
    }

    if (has_translation) {
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2 y{xs[i], ys[i]};
            for (std::size_t k = 0; k < domain.holes.size(); ++k) {
                const Vec2 zdot = center_rates[k];
                if (zdot.x == 0.0 && zdot.y == 0.0) continue;
                const Vec2 z = y - domain.holes[k].center;
                const double rho = z.norm();
                const double rc = domain.holes[k].radius;
                if (rho >= rc + margin || rho <= 0.0) continue;
                const double s = std::max(0.0, (rho - rc) / margin);
                const Vec2 e = z / rho;
                const double h = zdot.cross(z);  // zdot ^ (y - z_k)
                const Vec2 grad_h = zdot.perp();
                const double eta = CutoffSpec::eta(s);
                const double etap = CutoffSpec::deta(s) / margin;
                const Vec2 grad_w = etap * h * e + eta * grad_h;
                vx[i] += grad_w.y;
                vy[i] += -grad_w.x;
                if (want_grad) {
                    const double etapp = CutoffSpec::d2eta(s) / (margin * margin);
                    const Mat2 P = Mat2::identity() - Mat2::outer(e, e);
                    Mat2 Hw = etapp * h * Mat2::outer(e, e);
                    Hw += (etap * h / rho) * P;
                    Hw += etap * (Mat2::outer(e, grad_h) + Mat2::outer(grad_h, e));
                    const Mat2 G = perp_rows(Hw);
                    g00[i] += G.a;
                    g01[i] += G.b;
                    g10[i] += G.c;
                    g11[i] += G.d;
                }
            }
        }
    }
}

Vec2 VelocityEvaluator::eval(Vec2 y) const {
    double vx = 0.0, vy = 0.0;
    eval_batch(&y.x, &y.y, 1, &vx, &vy, nullptr, nullptr, nullptr, nullptr);
    return {vx, vy};
}

Mat2 VelocityEvaluator::eval_gradient(Vec2 y) const {
    double vx, vy, a, b, c, d;
    eval_batch(&y.x, &y.y, 1, &vx, &vy, &a, &b, &c, &d);
    return {a, b, c, d};
}

VelocityEvaluator build_growth_field_for(const HoleDomain& domain,
                                         const std::vector<double>& normal_rates, double margin,
                                         const SolverOptions& opts) {
    if (normal_rates.size() != domain.holes.size() + 1)
        throw ConfigError("growth field: one normal rate per circle required");
    if (!(margin > 0.0)) throw ConfigError("growth field: margin must be positive");

    VelocityEvaluator ev;
    ev.domain = domain;
    ev.margin = margin;
    ev.has_growth = true;
    ev.normal_rates = normal_rates;

    NeumannSystem system(domain, opts);
    NeumannData growth;
    growth.g.reserve(normal_rates.size());
    for (double r : normal_rates) growth.g.push_back(FourierSeries::constant(r));
    ev.phi = system.solve(growth);

    NeumannData tangential;
    tangential.g.resize(normal_rates.size());
    for (std::size_t c = 0; c < normal_rates.size(); ++c) {
        tangential.g[c] = tangential_derivative(ev.phi, c, opts.modes);
    }
    ev.varphi = system.solve(tangential);
    return ev;
}

VelocityEvaluator build_growth_field(const Evolution& evolution, double t,
                                     const SolverOptions& opts) {
    const HoleDomain dom = domain_at(evolution, t);
    std::vector<double> rates(evolution.count() + 1);
    rates[0] = evolution.outer_radius_rate();
    for (std::size_t i = 0; i < evolution.count(); ++i) {
        rates[i + 1] = evolution.hole_radius_rate(i, t);
    }
    VelocityEvaluator ev = build_growth_field_for(dom, rates, evolution.margin, opts);
    ev.t = t;
    return ev;
}

VelocityEvaluator build_translation_field(const Evolution& evolution, double t) {
    VelocityEvaluator ev;
    ev.t = t;
    ev.domain = domain_at(evolution, t);
    ev.margin = evolution.margin;
    ev.has_translation = true;
    ev.center_rates.resize(evolution.count());
    for (std::size_t i = 0; i < evolution.count(); ++i) {
        ev.center_rates[i] = evolution.center_rate(i, t);
    }
    return ev;
}

VelocityEvaluator build_velocity(const Evolution& evolution, double t,
                                 const SolverOptions& opts) {
    VelocityEvaluator ev = build_growth_field(evolution, t, opts);
    ev.has_translation = true;
    ev.center_rates.resize(evolution.count());
    for (std::size_t i = 0; i < evolution.count(); ++i) {
        ev.center_rates[i] = evolution.center_rate(i, t);
    }
    return ev;
}

BoundaryConditionReport verify_boundary_conditions(const VelocityEvaluator& field,
                                                   int samples_per_circle) {
    BoundaryConditionReport rep;
    const HoleDomain& dom = field.domain;
    const std::size_t circles = dom.holes.size() + 1;
    rep.circles.resize(circles);
    std::vector<double> xs(samples_per_circle), ys(samples_per_circle);
    std::vector<double> vx(samples_per_circle), vy(samples_per_circle);
    for (std::size_t c = 0; c < circles; ++c) {
        const Vec2 zc = c == 0 ? dom.outer_center : dom.holes[c - 1].center;
        const double rc = c == 0 ? dom.outer_radius : dom.holes[c - 1].radius;
        for (int q = 0; q < samples_per_circle; ++q) {
            const double theta = 2.0 * kPi * q / samples_per_circle;
            xs[q] = zc.x + rc * std::cos(theta);
            ys[q] = zc.y + rc * std::sin(theta);
        }
        field.eval_batch(xs.data(), ys.data(), xs.size(), vx.data(), vy.data(), nullptr, nullptr,
                         nullptr, nullptr);
        for (int q = 0; q < samples_per_circle; ++q) {
            const double theta = 2.0 * kPi * q / samples_per_circle;
            const Vec2 e{std::cos(theta), std::sin(theta)};
            const Vec2 target = field.boundary_target(c, theta);
            const Vec2 diff = Vec2{vx[q], vy[q]} - target;
            rep.circles[c].max_normal_error =
                std::max(rep.circles[c].max_normal_error, std::abs(diff.dot(e)));
            rep.circles[c].max_tangential_error =
                std::max(rep.circles[c].max_tangential_error, std::abs(diff.dot(e.perp())));
        }
        rep.max_normal_error = std::max(rep.max_normal_error, rep.circles[c].max_normal_error);
        rep.max_tangential_error =
            std::max(rep.max_tangential_error, rep.circles[c].max_tangential_error);
    }
    return rep;
}

namespace {

// boundary-refined sampling cloud for sup-norm estimation
std::vector<Vec2> sampling_cloud(const HoleDomain& dom, double d, int angles) {
    static const double kFractions[] = {1e-4, 0.005, 0.02, 0.05, 0.1,  0.2,
                                        0.3,  0.45,  0.55, 0.7,  0.9, 0.999};
    std::vector<Vec2> pts;
    for (std::size_t c = 0; c <= dom.holes.size(); ++c) {
        const Vec2 zc = c == 0 ? dom.outer_center : dom.holes[c - 1].center;
        const double rc = c == 0 ? dom.outer_radius : dom.holes[c - 1].radius;
        const double sign = c == 0 ? -1.0 : 1.0;
        for (double f : kFractions) {
            const double rho = rc + sign * f * d;
            for (int q = 0; q < angles; ++q) {
                const double theta = 2.0 * kPi * q / angles;
                pts.push_back(zc + Vec2{rho * std::cos(theta), rho * std::sin(theta)});
            }
        }
    }
    // bulk rings
    for (int ir = 1; ir <= 16; ++ir) {
        const double rho = dom.outer_radius * ir / 17.0;
        for (int q = 0; q < angles; ++q) {
            const double theta = 2.0 * kPi * (q + 0.5) / angles;
            const Vec2 p = dom.outer_center + Vec2{rho * std::cos(theta), rho * std::sin(theta)};
            if (dom.contains(p, 0.0) && dom.boundary_distance(p) > 1e-3 * d) pts.push_back(p);
        }
    }
    return pts;
}

double max_opnorm(const VelocityEvaluator& ev, const std::vector<Vec2>& pts) {
    const std::size_t n = pts.size();
    std::vector<double> xs(n), ys(n), vx(n), vy(n), a(n), b(n), c(n), d(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = pts[i].x;
        ys[i] = pts[i].y;
    }
    ev.eval_batch(xs.data(), ys.data(), n, vx.data(), vy.data(), a.data(), b.data(), c.data(),
                  d.data());
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        best = std::max(best, Mat2{a[i], b[i], c[i], d[i]}.opnorm());
    }
    return best;
}

}  // namespace

SupGradResult sup_grad_over_time(const Evolution& evolution, int t_points,
                                 const SupGradOptions& opts) {
    SupGradResult res;
    res.t_grid.resize(t_points);
    res.series.resize(t_points);
    for (int k = 0; k < t_points; ++k) {
        const double t = t_points == 1
                             ? 1.0
                             : 1.0 + (evolution.lambda - 1.0) * k / (t_points - 1);
        res.t_grid[k] = t;
        const VelocityEvaluator ev = build_velocity(evolution, t, opts.solver);
        int angles = opts.base_angles;
        double est = max_opnorm(ev, sampling_cloud(ev.domain, evolution.margin, angles));
        for (int pass = 0; pass < opts.max_doublings; ++pass) {
            angles *= 2;
            const double next =
                max_opnorm(ev, sampling_cloud(ev.domain, evolution.margin, angles));
            const bool settled = std::abs(next - est) <= opts.rel_change * std::max(est, 1e-300);
            est = std::max(est, next);
            if (settled) break;
        }
        res.series[k] = est;
        if (est > res.max_value) {
            res.max_value = est;
            res.arg_t = t;
        }
    }
    return res;
}

}  // namespace cavflow
