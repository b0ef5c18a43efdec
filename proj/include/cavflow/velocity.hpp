#pragma once

#include <vector>

#include "cavflow/core.hpp"
#include "cavflow/geometry.hpp"
#include "cavflow/neumann.hpp"

namespace cavflow {

// Quintic smoothstep cutoff: zeta(0)=1, zeta(1)=0 with vanishing first and
// second derivatives at both ends; clamped outside [0,1].  eta is the same
// shape.  zeta'(0)=0 is what keeps the boundary tangential condition exact.
struct CutoffSpec {
    static double zeta(double s);
    static double dzeta(double s);
    static double d2zeta(double s);
    static double eta(double s) { return zeta(s); }
    static double deta(double s) { return dzeta(s); }
    static double d2eta(double s) { return d2zeta(s); }

    static constexpr double kSupDZeta = 1.875;              // 15/8
    static constexpr double kSupD2Zeta = 5.773502691896258;  // 10/sqrt(3)
};

// Divergence-free field v(.,t) + vtilde(.,t) on E(t) with analytic gradient.
// The growth part is D(phi) + Dperp(psi); the translation part is Dperp(w).
class VelocityEvaluator {
  public:
    double t = 1.0;
    HoleDomain domain;
    double margin = 0.0;  // d

    bool has_growth = false;
    HarmonicRepresentation phi;
    HarmonicRepresentation varphi;
    std::vector<double> normal_rates;  // dr_c/dt, index 0 = outer

    bool has_translation = false;
    std::vector<Vec2> center_rates;  // dz_i/dt per hole

    Vec2 eval(Vec2 y) const;
    Mat2 eval_gradient(Vec2 y) const;

    // gradient outputs may be null to skip the Hessian work
    void eval_batch(const double* xs, const double* ys, std::size_t n, double* vx, double* vy,
                    double* g00, double* g01, double* g10, double* g11) const;

    // target boundary velocity on circle c at angle theta
    Vec2 boundary_target(std::size_t circle, double theta) const;
};

VelocityEvaluator build_growth_field(const Evolution& evolution, double t,
                                     const SolverOptions& opts = {});
VelocityEvaluator build_translation_field(const Evolution& evolution, double t);
VelocityEvaluator build_velocity(const Evolution& evolution, double t,
                                 const SolverOptions& opts = {});

// Growth field on an explicit domain with prescribed per-circle normal rates;
// shared by the evolution-driven builder and the tests.
VelocityEvaluator build_growth_field_for(const HoleDomain& domain,
                                         const std::vector<double>& normal_rates, double margin,
                                         const SolverOptions& opts = {});

struct BoundaryConditionReport {
    struct PerCircle {
        double max_normal_error = 0.0;
        double max_tangential_error = 0.0;
    };
    std::vector<PerCircle> circles;
    double max_normal_error = 0.0;
    double max_tangential_error = 0.0;
};

BoundaryConditionReport verify_boundary_conditions(const VelocityEvaluator& field,
                                                   int samples_per_circle = 1024);

struct SupGradOptions {
    int base_angles = 64;      // angular density of the sampling cloud
    double rel_change = 0.02;  // stop refining when the estimate moves less than this
    int max_doublings = 3;
    SolverOptions solver;
};

struct SupGradResult {
    double max_value = 0.0;   // max over the t series of sup |Dvhat| (operator norm)
    double arg_t = 1.0;
    std::vector<double> t_grid;
    std::vector<double> series;
};

SupGradResult sup_grad_over_time(const Evolution& evolution, int t_points,
                                 const SupGradOptions& opts = {});

}  // namespace cavflow
