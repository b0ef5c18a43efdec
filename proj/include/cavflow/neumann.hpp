#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "cavflow/core.hpp"
#include "cavflow/geometry.hpp"
#include "cavflow/kernels/harmonic_kernels.hpp"

namespace cavflow {

// Truncated Fourier series on a circle, parametrized by the polar angle about
// that circle's own center.
struct FourierSeries {
    double c0 = 0.0;
    std::vector<double> cos_coeff;  // modes 1..M
    std::vector<double> sin_coeff;

    int modes() const { return static_cast<int>(cos_coeff.size()); }
    double eval(double theta) const;
    static FourierSeries constant(double c) { return {c, {}, {}}; }
};

// Neumann datum: one series per boundary circle, index 0 = outer circle.
// The normal on every circle (outer included) is radial from that circle's
// own center.
struct NeumannData {
    std::vector<FourierSeries> g;
    // optional exact sampler used by residual diagnostics; arguments (circle, theta)
    std::function<double(std::size_t, double)> sampler;

    std::size_t circles() const { return g.size(); }
    double eval(std::size_t circle, double theta) const { return g[circle].eval(theta); }
};

struct SolverOptions {
    int modes = 32;               // truncation order M
    int colloc_per_circle = 0;    // P; 0 selects 4M+2
    double residual_tol = 1e-8;   // relative boundary residual bound
    double compatibility_tol = 1e-8;
    double min_gap_ratio = 1e-3;  // reject geometries with gap/diameter below this

    int colloc() const { return colloc_per_circle > 0 ? colloc_per_circle : 4 * modes + 2; }
};

// Closed-form harmonic function on a circular-hole domain: a constant, one
// log term per hole, decaying Fourier modes per hole and growing modes about
// the outer center.  Exactly harmonic by construction.
class HarmonicRepresentation {
  public:
    struct Block {
        Vec2 center;
        double r_ref = 1.0;
        double alpha = 0.0;
        bool outer = false;
        std::vector<double> g_re, g_im, mg_re, mg_im, m2g_re, m2g_im;

        kernels::CircleBlock view() const;
        void set_modes(int M);
        // assign mode m (1-based) coefficient pair and derived streams
        void set_coeff(int m, double re, double im);
    };

    HoleDomain domain;
    double constant = 0.0;
    std::vector<Block> blocks;            // [0] = outer block, [1..n] = holes
    double boundary_residual = 0.0;       // achieved relative residual (2P nodes)
    double boundary_residual_abs = 0.0;

    // Accumulate value/gradient/Hessian entries for a batch without domain checks.
    void eval_raw(const double* xs, const double* ys, std::size_t n,
                  const kernels::EvalSink& sink, unsigned what) const;

    double value(Vec2 p) const;
    Vec2 gradient(Vec2 p) const;
    Mat2 hessian(Vec2 p) const;

    void check_point(Vec2 p) const;  // throws DomainError outside the closed domain
};

// 2*pi*| r0 g0_const - sum_k r_k gk_const |   (only constants contribute)
double check_compatibility(const HoleDomain& domain, const NeumannData& data);

// Collocation system for one geometry; the factorization is shared between
// solves with different data on the same domain.
class NeumannSystem {
  public:
    NeumannSystem(HoleDomain domain, SolverOptions opts = {});
    ~NeumannSystem();
    NeumannSystem(NeumannSystem&&) noexcept;
    NeumannSystem& operator=(NeumannSystem&&) noexcept;

    HarmonicRepresentation solve(const NeumannData& data) const;
    const HoleDomain& domain() const { return domain_; }
    const SolverOptions& options() const { return opts_; }

  private:
    HoleDomain domain_;
    SolverOptions opts_;
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

HarmonicRepresentation solve_neumann(const HoleDomain& domain, const NeumannData& data,
                                     const SolverOptions& opts = {});

// sup |du/dnu - g| over samples_per_circle uniform points on every circle
double boundary_residual(const HarmonicRepresentation& rep, const NeumannData& data,
                         int samples_per_circle);

// Fourier coefficients (m <= modes_out) of du/dtau on one boundary circle;
// tau is the counterclockwise tangent.  The constant term is exactly zero.
FourierSeries tangential_derivative(const HarmonicRepresentation& rep, std::size_t circle,
                                    int modes_out = 0);

// Exact domain mean from the closed-form antiderivatives of the basis.
double mean_value(const HarmonicRepresentation& rep);

// Neumann Green's function of the disk B_R(0).
double green_neumann_disk(Vec2 x, Vec2 y, double R);
Vec2 green_neumann_disk_grad_x(Vec2 x, Vec2 y, double R);

// Boundary-integral evaluation of the disk Neumann problem (up to a constant);
// cross-validation oracle for the collocation solver with n = 0.
double disk_neumann_via_green(const FourierSeries& g, double R, Vec2 x, int nodes = 0);
Vec2 disk_neumann_via_green_gradient(const FourierSeries& g, double R, Vec2 x, int nodes = 0);

// Lower-bound probe for the Poincare constant via a fixed trial family.
double poincare_probe(const HoleDomain& domain, int grid = 256);

}  // namespace cavflow
