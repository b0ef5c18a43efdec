#include "cavflow/neumann.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <sstream>

namespace cavflow {

using cplx = std::complex<double>;

double FourierSeries::eval(double theta) const {
    double v = c0;
    for (int m = 1; m <= modes(); ++m) {
        v += cos_coeff[m - 1] * std::cos(m * theta) + sin_coeff[m - 1] * std::sin(m * theta);
    }
    return v;
}

kernels::CircleBlock HarmonicRepresentation::Block::view() const {
    kernels::CircleBlock b;
    b.cx = center.x;
    b.cy = center.y;
    b.r_ref = r_ref;
    b.alpha = alpha;
    b.outer = outer;
    b.modes = static_cast<int>(g_re.size());
    b.g_re = g_re.data();
    b.g_im = g_im.data();
    b.mg_re = mg_re.data();
    b.mg_im = mg_im.data();
    b.m2g_re = m2g_re.data();
    b.m2g_im = m2g_im.data();
    return b;
}

void HarmonicRepresentation::Block::set_modes(int M) {
    g_re.assign(M, 0.0);
    g_im.assign(M, 0.0);
    mg_re.assign(M, 0.0);
    mg_im.assign(M, 0.0);
    m2g_re.assign(M, 0.0);
    m2g_im.assign(M, 0.0);
}

void HarmonicRepresentation::Block::set_coeff(int m, double re, double im) {
    const double md = static_cast<double>(m);
    const double m2 = outer ? md * (md - 1.0) : md * (md + 1.0);
    g_re[m - 1] = re;
    g_im[m - 1] = im;
    mg_re[m - 1] = md * re;
    mg_im[m - 1] = md * im;
    m2g_re[m - 1] = m2 * re;
    m2g_im[m - 1] = m2 * im;
}

void HarmonicRepresentation::eval_raw(const double* xs, const double* ys, std::size_t n,
                                      const kernels::EvalSink& sink, unsigned what) const {
    if (what & kernels::kValue) {
        for (std::size_t i = 0; i < n; ++i) sink.val[i] += constant;
    }
    for (const Block& b : blocks) {
        kernels::eval_block(b.view(), xs, ys, n, sink, what);
    }
}

void HarmonicRepresentation::check_point(Vec2 p) const {
    const double tol = 1e-7 * domain.outer_radius;
    if (!domain.contains(p, tol)) throw DomainError("evaluation point outside the closed domain");
}

double HarmonicRepresentation::value(Vec2 p) const {
    check_point(p);
    double v = 0.0;
    kernels::EvalSink sink;
    sink.val = &v;
    eval_raw(&p.x, &p.y, 1, sink, kernels::kValue);
    return v;
}

Vec2 HarmonicRepresentation::gradient(Vec2 p) const {
    check_point(p);
    double gx = 0.0, gy = 0.0;
    kernels::EvalSink sink;
    sink.gx = &gx;
    sink.gy = &gy;
    eval_raw(&p.x, &p.y, 1, sink, kernels::kGrad);
    return {gx, gy};
}

Mat2 HarmonicRepresentation::hessian(Vec2 p) const {
    check_point(p);
    double hxx = 0.0, hxy = 0.0;
    kernels::EvalSink sink;
    sink.hxx = &hxx;
    sink.hxy = &hxy;
    eval_raw(&p.x, &p.y, 1, sink, kernels::kHess);
    return {hxx, hxy, hxy, -hxx};
}

double check_compatibility(const HoleDomain& domain, const NeumannData& data) {
    if (data.circles() != domain.holes.size() + 1)
        throw ConfigError("neumann: data circle count does not match the domain");
    double flux_out = domain.outer_radius * data.g[0].c0;
    double flux_holes = 0.0;
    for (std::size_t k = 0; k < domain.holes.size(); ++k) {
        flux_holes += domain.holes[k].radius * data.g[k + 1].c0;
    }
    return 2.0 * kPi * std::abs(flux_out - flux_holes);
}

namespace {

struct CollocPoint {
    Vec2 p;
    Vec2 nu;            // radial from the owning circle's center
    std::size_t circle; // 0 = outer
    double theta;
};

// gradient of one basis pair (cos, sin) of hole block `k` at point y
void hole_mode_gradients(Vec2 y, Vec2 zk, double r, int M, std::vector<Vec2>& cos_g,
                         std::vector<Vec2>& sin_g) {
    const Vec2 z = y - zk;
    const double rho2 = z.norm2();
    const cplx w(r * z.x / rho2, -r * z.y / rho2);
    cplx W = w * w;  // w^(m+1), starting at m = 1
    for (int m = 1; m <= M; ++m) {
        const double f = static_cast<double>(m) / r;
        // cos basis: F' = -(m/r) W ; sin basis: F' = -(m/r) iW
        cos_g[m - 1] = {-f * W.real(), f * W.imag()};
        sin_g[m - 1] = {f * W.imag(), f * W.real()};
        W *= w;
    }
}

// gradient of one basis pair of the outer (growing) block at point y
void outer_mode_gradients(Vec2 y, Vec2 z0, double r, int M, std::vector<Vec2>& cos_g,
                          std::vector<Vec2>& sin_g) {
    const cplx s((y.x - z0.x) / r, (y.y - z0.y) / r);
    cplx U(1.0, 0.0);  // s^(m-1)
    for (int m = 1; m <= M; ++m) {
        const double f = static_cast<double>(m) / r;
        // cos: F' = (m/r) U ; sin: F' = -(m/r) iU
        cos_g[m - 1] = {f * U.real(), -f * U.imag()};
        sin_g[m - 1] = {f * U.imag(), f * U.real()};
        U *= s;
    }
}

Vec2 log_gradient(Vec2 y, Vec2 zk) {
    const Vec2 z = y - zk;
    return z / z.norm2();
}

double data_scale(const NeumannData& data, int samples) {
    double s = 0.0;
    for (const FourierSeries& f : data.g) {
        for (int q = 0; q < samples; ++q) {
            s = std::max(s, std::abs(f.eval(2.0 * kPi * q / samples)));
        }
    }
    return s;
}

}  // namespace

struct NeumannSystem::Impl {
    std::vector<CollocPoint> points;
    Eigen::MatrixXd A;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr;
    int M = 0;
    int P = 0;
};

NeumannSystem::~NeumannSystem() = default;
NeumannSystem::NeumannSystem(NeumannSystem&&) noexcept = default;
NeumannSystem& NeumannSystem::operator=(NeumannSystem&&) noexcept = default;

NeumannSystem::NeumannSystem(HoleDomain domain, SolverOptions opts)
    : domain_(std::move(domain)), opts_(opts), impl_(std::make_unique<Impl>()) {
    domain_.validate();
    const std::size_t n = domain_.holes.size();

    // conditioning guard: circles must stay separated relative to the diameter
    double gap = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        const auto& hi = domain_.holes[i];
        gap = std::min(gap, domain_.outer_radius - (hi.center - domain_.outer_center).norm() -
                                hi.radius);
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto& hj = domain_.holes[j];
            gap = std::min(gap, (hi.center - hj.center).norm() - hi.radius - hj.radius);
        }
    }
    if (n > 0 && gap / (2.0 * domain_.outer_radius) < opts_.min_gap_ratio)
        throw ConfigError("neumann: circle gap below the conditioning guard");

    const int M = opts_.modes;
    const int P = opts_.colloc();
    if (P < 2 * M + 2) throw ConfigError("neumann: collocation count must be >= 2M+2");
    impl_->M = M;
    impl_->P = P;

    const std::size_t circles = n + 1;
    impl_->points.reserve(circles * P);
    for (std::size_t c = 0; c < circles; ++c) {
        const Vec2 zc = c == 0 ? domain_.outer_center : domain_.holes[c - 1].center;
        const double rc = c == 0 ? domain_.outer_radius : domain_.holes[c - 1].radius;
        for (int q = 0; q < P; ++q) {
            const double theta = 2.0 * kPi * (q + 0.5) / P;
            const Vec2 nu{std::cos(theta), std::sin(theta)};
            impl_->points.push_back({zc + rc * nu, nu, c, theta});
        }
    }

    const std::size_t rows = impl_->points.size();
    const std::size_t cols = 2 * static_cast<std::size_t>(M) * circles;
    impl_->A.resize(rows, cols);

    std::vector<Vec2> cg(M), sg(M);
    for (std::size_t rI = 0; rI < rows; ++rI) {
        const CollocPoint& cp = impl_->points[rI];
        std::size_t col = 0;
        for (std::size_t k = 0; k < n; ++k) {
            hole_mode_gradients(cp.p, domain_.holes[k].center, domain_.holes[k].radius, M, cg, sg);
            for (int m = 1; m <= M; ++m) {
                impl_->A(rI, col++) = cg[m - 1].dot(cp.nu);
                impl_->A(rI, col++) = sg[m - 1].dot(cp.nu);
            }
        }
        outer_mode_gradients(cp.p, domain_.outer_center, domain_.outer_radius, M, cg, sg);
        for (int m = 1; m <= M; ++m) {
            impl_->A(rI, col++) = cg[m - 1].dot(cp.nu);
            impl_->A(rI, col++) = sg[m - 1].dot(cp.nu);
        }
    }
    impl_->qr.compute(impl_->A);
}

HarmonicRepresentation NeumannSystem::solve(const NeumannData& data) const {
    const std::size_t n = domain_.holes.size();
    if (data.circles() != n + 1)
        throw ConfigError("neumann: data circle count does not match the domain");

    const double gscale = std::max(data_scale(data, 4 * impl_->P), 1e-300);
    const double compat = check_compatibility(domain_, data);
    const double flux_scale =
        std::max(2.0 * kPi * domain_.outer_radius * gscale, 1e-300);
    if (compat > opts_.compatibility_tol * flux_scale) {
        std::ostringstream os;
        os << "neumann: compatibility residual " << compat << " exceeds tolerance "
           << opts_.compatibility_tol * flux_scale;
        throw CertificateError(os.str());
    }

    HarmonicRepresentation rep;
    rep.domain = domain_;
    rep.blocks.resize(n + 1);

    // log coefficients pinned from the hole fluxes
    std::vector<double> alpha(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        alpha[k] = domain_.holes[k].radius * data.g[k + 1].c0;
    }

    const int M = impl_->M;
    const std::size_t rows = impl_->points.size();
    Eigen::VectorXd rhs(rows);
    for (std::size_t rI = 0; rI < rows; ++rI) {
        const CollocPoint& cp = impl_->points[rI];
        double v = data.eval(cp.circle, cp.theta);
        for (std::size_t k = 0; k < n; ++k) {
            v -= alpha[k] * log_gradient(cp.p, domain_.holes[k].center).dot(cp.nu);
        }
        rhs(rI) = v;
    }
    const Eigen::VectorXd q = impl_->qr.solve(rhs);

    // outer block first slot, holes after; coefficients are column-ordered
    rep.blocks[0].center = domain_.outer_center;
    rep.blocks[0].r_ref = domain_.outer_radius;
    rep.blocks[0].outer = true;
    rep.blocks[0].set_modes(M);
    for (std::size_t k = 0; k < n; ++k) {
        rep.blocks[k + 1].center = domain_.holes[k].center;
        rep.blocks[k + 1].r_ref = domain_.holes[k].radius;
        rep.blocks[k + 1].alpha = alpha[k];
        rep.blocks[k + 1].outer = false;
        rep.blocks[k + 1].set_modes(M);
    }
    std::size_t col = 0;
    for (std::size_t k = 0; k < n; ++k) {
        for (int m = 1; m <= M; ++m) {
            const double a = q(col++);
            const double b = q(col++);
            rep.blocks[k + 1].set_coeff(m, a, b);  // gamma = a + i b
        }
    }
    for (int m = 1; m <= M; ++m) {
        const double c = q(col++);
        const double d = q(col++);
        rep.blocks[0].set_coeff(m, c, -d);  // delta = c - i d
    }

    rep.boundary_residual_abs = boundary_residual(rep, data, 2 * impl_->P);
    rep.boundary_residual = rep.boundary_residual_abs / gscale;
    if (gscale > 1e-250 && rep.boundary_residual > opts_.residual_tol) {
        std::ostringstream os;
        os << "neumann: boundary residual " << rep.boundary_residual
           << " (relative) exceeds tolerance " << opts_.residual_tol;
        throw CertificateError(os.str());
    }

    rep.constant = 0.0;
    rep.constant = -mean_value(rep);
    return rep;
}

HarmonicRepresentation solve_neumann(const HoleDomain& domain, const NeumannData& data,
                                     const SolverOptions& opts) {
    return NeumannSystem(domain, opts).solve(data);
}

double boundary_residual(const HarmonicRepresentation& rep, const NeumannData& data,
                         int samples_per_circle) {
    const HoleDomain& dom = rep.domain;
    const std::size_t circles = dom.holes.size() + 1;
    double worst = 0.0;
    std::vector<double> xs(samples_per_circle), ys(samples_per_circle);
    std::vector<double> gx(samples_per_circle), gy(samples_per_circle);
    for (std::size_t c = 0; c < circles; ++c) {
        const Vec2 zc = c == 0 ? dom.outer_center : dom.holes[c - 1].center;
        const double rc = c == 0 ? dom.outer_radius : dom.holes[c - 1].radius;
        for (int q = 0; q < samples_per_circle; ++q) {
            const double theta = 2.0 * kPi * (q + 0.25) / samples_per_circle;
            xs[q] = zc.x + rc * std::cos(theta);
            ys[q] = zc.y + rc * std::sin(theta);
        }
        std::fill(gx.begin(), gx.end(), 0.0);
        std::fill(gy.begin(), gy.end(), 0.0);
        kernels::EvalSink sink;
        sink.gx = gx.data();
        sink.gy = gy.data();
        rep.eval_raw(xs.data(), ys.data(), xs.size(), sink, kernels::kGrad);
        for (int q = 0; q < samples_per_circle; ++q) {
            const double theta = 2.0 * kPi * (q + 0.25) / samples_per_circle;
            const double dn = gx[q] * std::cos(theta) + gy[q] * std::sin(theta);
            worst = std::max(worst, std::abs(dn - data.eval(c, theta)));
        }
    }
    return worst;
}

FourierSeries tangential_derivative(const HarmonicRepresentation& rep, std::size_t circle,
                                    int modes_out) {
    const HoleDomain& dom = rep.domain;
    if (circle > dom.holes.size()) throw ConfigError("tangential_derivative: bad circle index");
    int M = modes_out;
    if (M <= 0) {
        M = rep.blocks.empty() ? 16 : static_cast<int>(rep.blocks[0].g_re.size());
    }
    const int P = std::max(512, 8 * M);
    const Vec2 zc = circle == 0 ? dom.outer_center : dom.holes[circle - 1].center;
    const double rc = circle == 0 ? dom.outer_radius : dom.holes[circle - 1].radius;

    std::vector<double> xs(P), ys(P), gx(P, 0.0), gy(P, 0.0);
    for (int q = 0; q < P; ++q) {
        const double theta = 2.0 * kPi * q / P;
        xs[q] = zc.x + rc * std::cos(theta);
        ys[q] = zc.y + rc * std::sin(theta);
    }
    kernels::EvalSink sink;
    sink.gx = gx.data();
    sink.gy = gy.data();
    rep.eval_raw(xs.data(), ys.data(), xs.size(), sink, kernels::kGrad);

    std::vector<double> tau(P);
    for (int q = 0; q < P; ++q) {
        const double theta = 2.0 * kPi * q / P;
        tau[q] = -gx[q] * std::sin(theta) + gy[q] * std::cos(theta);
    }
    FourierSeries out;
    out.c0 = 0.0;  // du/dtau integrates to zero around the circle
    out.cos_coeff.resize(M);
    out.sin_coeff.resize(M);
    for (int m = 1; m <= M; ++m) {
        double cs = 0.0, sn = 0.0;
        for (int q = 0; q < P; ++q) {
            const double theta = 2.0 * kPi * q / P;
            cs += tau[q] * std::cos(m * theta);
            sn += tau[q] * std::sin(m * theta);
        }
        out.cos_coeff[m - 1] = 2.0 * cs / P;
        out.sin_coeff[m - 1] = 2.0 * sn / P;
    }
    return out;
}

namespace {

// integral over the disk B_R(c) of one block, using mean-value identities and
// the closed forms for the singular terms
double disk_integral(const HarmonicRepresentation::Block& blk, Vec2 c, double R) {
    const double area = kPi * R * R;
    const cplx dc(c.x - blk.center.x, c.y - blk.center.y);
    const int M = static_cast<int>(blk.g_re.size());

    if (blk.outer) {
        // growing modes are harmonic everywhere: mean value about c
        double sum = 0.0;
        cplx s = dc / blk.r_ref;
        cplx cur = s;
        for (int m = 1; m <= M; ++m) {
            sum += blk.g_re[m - 1] * cur.real() - blk.g_im[m - 1] * cur.imag();
            cur *= s;
        }
        return area * sum;
    }

    const double dist = std::abs(dc);
    const bool inside = dist < R;
    double total = 0.0;

    if (blk.alpha != 0.0) {
        double logpart;
        if (inside) {
            logpart = area * (std::log(R) - 0.5) + 0.5 * kPi * dist * dist;
        } else {
            logpart = area * std::log(dist);
        }
        total += blk.alpha * (logpart - area * std::log(blk.r_ref));
    }

    if (M >= 1) {
        const cplx g1(blk.g_re[0], blk.g_im[0]);
        if (inside) {
            // integral of 1/(y - z_k) over the disk is pi * conj(c - z_k)
            total += blk.r_ref * (g1 * std::conj(dc) * kPi).real();
        } else {
            total += area * (g1 * (blk.r_ref / dc)).real();
        }
    }
    if (!inside) {
        cplx q = blk.r_ref / dc;
        cplx cur = q * q;
        for (int m = 2; m <= M; ++m) {
            const cplx g(blk.g_re[m - 1], blk.g_im[m - 1]);
            total += area * (g * cur).real();
            cur *= q;
        }
    }
    // inside, m >= 2: the excised principal value vanishes
    return total;
}

}  // namespace

double mean_value(const HarmonicRepresentation& rep) {
    const HoleDomain& dom = rep.domain;
    const double areaE = dom.area();
    double integral = rep.constant * areaE;
    for (const auto& blk : rep.blocks) {
        integral += disk_integral(blk, dom.outer_center, dom.outer_radius);
        for (const auto& h : dom.holes) {
            integral -= disk_integral(blk, h.center, h.radius);
        }
    }
    return integral / areaE;
}

double green_neumann_disk(Vec2 x, Vec2 y, double R) {
    const double ax = x.norm();
    if (!(ax > 0.0)) throw DomainError("green_neumann_disk: x = 0 is not supported");
    if (ax > R * (1.0 + 1e-12) || y.norm() > R * (1.0 + 1e-12))
        throw DomainError("green_neumann_disk: points must lie in the closed disk");
    const Vec2 d = y - x;
    if (!(d.norm() > 0.0)) throw DomainError("green_neumann_disk: x = y");
    const Vec2 xstar = x * (R * R / (ax * ax));
    const double Phi = -std::log(d.norm()) / (2.0 * kPi);
    const double phix = std::log((y - xstar).norm()) / (2.0 * kPi) - y.norm2() / (4.0 * kPi * R * R);
    return Phi - phix;
}

Vec2 green_neumann_disk_grad_x(Vec2 x, Vec2 y, double R) {
    const double ax2 = x.norm2();
    const Vec2 d = y - x;
    const Vec2 xstar = x * (R * R / ax2);
    const Vec2 gPhi = d / (2.0 * kPi * d.norm2());
    // J = (R^2/|x|^2) (I - 2 xhat xhat^T), symmetric
    const Vec2 u = y - xstar;
    const Vec2 w = (xstar - y) / u.norm2();
    const Vec2 xhat = x / std::sqrt(ax2);
    const Vec2 Jw = (w - 2.0 * xhat.dot(w) * xhat) * (R * R / ax2);
    return gPhi - Jw / (2.0 * kPi);
}

double disk_neumann_via_green(const FourierSeries& g, double R, Vec2 x, int nodes) {
    const int N = nodes > 0 ? nodes : std::max(256, 8 * (g.modes() + 1));
    double mean = 0.0;
    for (int q = 0; q < N; ++q) mean += g.eval(2.0 * kPi * q / N);
    if (std::abs(mean / N) > 1e-10 * std::max(1.0, std::abs(g.c0)))
        throw CertificateError("disk_neumann_via_green: datum is not mean free");
    double u = 0.0;
    const double w = 2.0 * kPi * R / N;
    for (int q = 0; q < N; ++q) {
        const double theta = 2.0 * kPi * q / N;
        const Vec2 y{R * std::cos(theta), R * std::sin(theta)};
        u += w * g.eval(theta) * green_neumann_disk(x, y, R);
    }
    return u;
}

Vec2 disk_neumann_via_green_gradient(const FourierSeries& g, double R, Vec2 x, int nodes) {
    const int N = nodes > 0 ? nodes : std::max(256, 8 * (g.modes() + 1));
    Vec2 u{0.0, 0.0};
    const double w = 2.0 * kPi * R / N;
    for (int q = 0; q < N; ++q) {
        const double theta = 2.0 * kPi * q / N;
        const Vec2 y{R * std::cos(theta), R * std::sin(theta)};
        u += w * g.eval(theta) * green_neumann_disk_grad_x(x, y, R);
    }
    return u;
}

double poincare_probe(const HoleDomain& domain, int grid) {
    domain.validate();
    const double r0 = domain.outer_radius;
    const Vec2 z0 = domain.outer_center;

    struct Trial {
        std::function<double(Vec2)> f;
        std::function<Vec2(Vec2)> grad;
    };
    std::vector<Trial> trials;
    trials.push_back({[](Vec2 p) { return p.x; }, [](Vec2) { return Vec2{1.0, 0.0}; }});
    trials.push_back({[](Vec2 p) { return p.y; }, [](Vec2) { return Vec2{0.0, 1.0}; }});
    for (const auto& h : domain.holes) {
        const Vec2 zk = h.center;
        const double rk = h.radius;
        trials.push_back({[zk, rk](Vec2 p) { return std::log((p - zk).norm() / rk); },
                          [zk](Vec2 p) {
                              const Vec2 z = p - zk;
                              return z / z.norm2();
                          }});
        trials.push_back({[zk, rk](Vec2 p) {
                              const Vec2 z = p - zk;
                              return rk * z.x / z.norm2();
                          },
                          [zk, rk](Vec2 p) {
                              const Vec2 z = p - zk;
                              const cplx w(rk * z.x / z.norm2(), -rk * z.y / z.norm2());
                              const cplx fp = -(w * w) / rk;
                              return Vec2{fp.real(), -fp.imag()};
                          }});
    }
    for (int m = 1; m <= 2; ++m) {
        trials.push_back({[z0, r0, m](Vec2 p) {
                              const cplx s((p.x - z0.x) / r0, (p.y - z0.y) / r0);
                              return std::pow(s, m).real();
                          },
                          [z0, r0, m](Vec2 p) {
                              const cplx s((p.x - z0.x) / r0, (p.y - z0.y) / r0);
                              const cplx fp = double(m) * std::pow(s, m - 1) / r0;
                              return Vec2{fp.real(), -fp.imag()};
                          }});
        trials.push_back({[z0, r0, m](Vec2 p) {
                              const cplx s((p.x - z0.x) / r0, (p.y - z0.y) / r0);
                              return std::pow(s, m).imag();
                          },
                          [z0, r0, m](Vec2 p) {
                              const cplx s((p.x - z0.x) / r0, (p.y - z0.y) / r0);
                              const cplx fp = cplx(0.0, 1.0) * double(m) * std::pow(s, m - 1) / r0;
                              return Vec2{fp.real(), -fp.imag()};
                          }});
    }

    // midpoint polar cells over the outer disk, cells centered inside holes excluded
    std::vector<Vec2> pts;
    std::vector<double> wts;
    pts.reserve(static_cast<std::size_t>(grid) * grid);
    for (int ir = 0; ir < grid; ++ir) {
        const double rin = r0 * ir / grid;
        const double rout = r0 * (ir + 1) / grid;
        const double rmid = 0.5 * (rin + rout);
        const double cell_area = kPi * (rout * rout - rin * rin) / grid;
        for (int it = 0; it < grid; ++it) {
            const double theta = 2.0 * kPi * (it + 0.5) / grid;
            const Vec2 p = z0 + Vec2{rmid * std::cos(theta), rmid * std::sin(theta)};
            bool in = true;
            for (const auto& h : domain.holes) {
                if ((p - h.center).norm() < h.radius) {
                    in = false;
                    break;
                }
            }
            if (in) {
                pts.push_back(p);
                wts.push_back(cell_area);
            }
        }
    }

    double best = 0.0;
    for (const Trial& tr : trials) {
        double m0 = 0.0, wsum = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            m0 += wts[i] * tr.f(pts[i]);
            wsum += wts[i];
        }
        m0 /= wsum;
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const double v = tr.f(pts[i]) - m0;
            num += wts[i] * v * v;
            den += wts[i] * tr.grad(pts[i]).norm2();
        }
        if (den > 0.0) best = std::max(best, std::sqrt(num / den));
    }
    return best;
}

}  // namespace cavflow
