#pragma once

#include <cstdint>
#include <vector>

#include "cavflow/core.hpp"
#include "cavflow/flow.hpp"
#include "cavflow/geometry.hpp"

namespace cavflow {

// Radially symmetric incompressible maps on the excision annuli
// eps <= |x - a_i| <= R_i, sending a_i + r e to z_i(lambda) + sqrt(L_i^2 + r^2) e.
class NearMapSet {
  public:
    struct Cavity {
        Vec2 site;          // a_i
        Vec2 final_center;  // z_i(lambda)
        double L = 0.0;     // L_i(lambda)
        double R = 0.0;     // excision radius R_i
    };

    NearMapSet() = default;
    explicit NearMapSet(const Evolution& evolution);

    const std::vector<Cavity>& cavities() const { return cavities_; }
    // index of the cavity whose annulus contains x, or -1
    int locate(Vec2 x, double tol = 0.0) const;

    Vec2 map(Vec2 x) const;        // throws DomainError outside all annuli
    Mat2 gradient(Vec2 x) const;
    Vec2 map_on(std::size_t i, Vec2 x) const;
    Mat2 gradient_on(std::size_t i, Vec2 x) const;

  private:
    std::vector<Cavity> cavities_;
};

// Closed-form Dirichlet energy of one radial cavity map over eps < r < R.
double near_energy_exact(double L, double R, double eps);

// Full deformation: near maps inside the excision disks, flow map outside.
class FullMap {
  public:
    FullMap(const Evolution& evolution, double eps, FlowOptions flow = {});

    // near points use the closed form; far points are integrated as one batch
    std::vector<Vec2> map(const std::vector<Vec2>& points);
    const NearMapSet& near() const { return near_; }

  private:
    Evolution evolution_;
    double eps_;
    FlowOptions flow_;
    NearMapSet near_;
};

struct EnergyOptions {
    int mc_points = 20000;
    std::uint64_t rng_seed = 12345;
    int strat_radial = 48;
    int strat_angular = 72;
    double stderr_frac = 0.01;  // required MC standard error relative to the far energy
    int max_retries = 2;
    FlowOptions flow;
};

struct FarEnergy {
    double value = 0.0;
    double std_error = 0.0;
    int points = 0;
};

// (1/2) int_E(1) |F(x,lambda)|^2 dx by stratified Monte Carlo with fixed
// per-cell substreams; deterministic for a given seed.
FarEnergy far_field_energy(const Evolution& evolution, const EnergyOptions& opts = {},
                           const FlowStageCache* cache = nullptr);

struct EnergyReport {
    std::vector<double> eps;
    std::vector<double> near_exact;
    std::vector<double> total;
    std::vector<double> log_eps;    // |log eps|
    std::vector<double> bound_gap;  // total - sum_v * |log eps|
    FarEnergy far;
    double sum_areas = 0.0;
};

EnergyReport energy_sweep(const Evolution& evolution, const std::vector<double>& eps_grid,
                          const EnergyOptions& opts = {}, const FlowStageCache* cache = nullptr);

struct BoundFit {
    double slope = 0.0;
    double intercept = 0.0;       // the measured constant C
    double slope_target = 0.0;    // sum of cavity areas
    double slope_rel_dev = 0.0;
    double max_resid_rel = 0.0;
    bool pass = false;
};

// Linear fit of E(eps) against |log eps|; pass requires the slope within 3% of
// sum(v_i) and residuals below 2% of E.
BoundFit bound_check(const EnergyReport& report, double slope_tol = 0.03,
                     double resid_tol = 0.02);

// polygon helpers (vertices in order, closed implicitly)
double polygon_area(const std::vector<Vec2>& poly);
Vec2 polygon_centroid(const std::vector<Vec2>& poly);
double polygon_disk_intersection_area(const std::vector<Vec2>& poly, Vec2 center, double radius);
std::vector<Vec2> circle_polygon(Vec2 center, double radius, int segments);

// Fraenkel asymmetry: min over centers of |P symdiff B(c, sqrt(area/pi))| / area.
double fraenkel_asymmetry(const std::vector<Vec2>& poly);

struct DistortionTerms {
    double round_cost = 0.0;       // sum v_i log(R/eps)
    double distortion_cost = 0.0;  // sum v_i D_i^2 log(min(d_i, sqrt(v_i D_i^2))/eps)
};

DistortionTerms distortion_bound_terms(const std::vector<double>& areas,
                                       const std::vector<double>& asymmetries,
                                       const std::vector<double>& neighbor_dists, double R,
                                       double eps);

}  // namespace cavflow
