#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cavflow/core.hpp"

namespace cavflow {

// A cavitation load: reference radius, cavity sites and target areas.
struct CavitationConfig {
    double R0 = 1.0;
    std::vector<Vec2> sites;     // a_i, |a_i| < R0
    std::vector<double> areas;   // v_i > 0
    std::vector<double> min_areas;    // optional upsilon_i (empty or size n)
    std::vector<double> seed_radii;   // optional d_i (empty or size n)

    std::size_t count() const { return sites.size(); }
    double total_area() const;
    void validate() const;  // throws ConfigError
};

struct HoleDomain {
    Vec2 outer_center;
    double outer_radius = 0.0;
    struct Hole {
        Vec2 center;
        double radius = 0.0;
    };
    std::vector<Hole> holes;

    double area() const;
    // signed distance to the closed region: <=0 inside
    bool contains(Vec2 p, double tol = 0.0) const;
    // min over boundary circles of the distance from p to the circle
    double boundary_distance(Vec2 p) const;
    void validate() const;
};

struct AttainabilityReport {
    double sigma = 0.0;
    double lambda = 0.0;
    double lambda_max = 0.0;  // (1-sigma)^(-1/2) when sigma < 1, +inf otherwise
    bool attainable = false;
    std::string reason;
};

// Closed-form center path z_i(t) with exact derivative.
struct CenterPath {
    enum class Kind { Constant, LinearInT, Plunge };
    Kind kind = Kind::Constant;
    Vec2 site;          // a_i
    Vec2 fixed_point;   // Constant: value of z
    double plunge_c = 0.0;

    Vec2 at(double t) const;
    Vec2 rate(double t) const;
};

// Time-parametrized evolution of cavity centers and radii on [1, lambda].
// L_i^2(t) = (t^2 - 1) * area_fraction_i * R0^2.
struct Evolution {
    double R0 = 1.0;
    double lambda = 1.0;
    std::vector<CenterPath> centers;
    std::vector<double> area_fraction;   // s_i, sums to 1
    std::vector<double> excision_radii;  // R_i
    double margin = 0.0;                 // d of the separation property
    double r_max = 0.0;                  // lambda * R0

    std::size_t count() const { return centers.size(); }
    Vec2 center(std::size_t i, double t) const { return centers[i].at(t); }
    Vec2 center_rate(std::size_t i, double t) const { return centers[i].rate(t); }
    double cavity_radius_sq(std::size_t i, double t) const {
        return (t * t - 1.0) * area_fraction[i] * R0 * R0;
    }
    double cavity_radius(std::size_t i, double t) const {
        return std::sqrt(std::max(0.0, cavity_radius_sq(i, t)));
    }
    double cavity_radius_sq_rate(std::size_t i, double t) const {
        return 2.0 * t * area_fraction[i] * R0 * R0;
    }
    // r_i(t) = sqrt(L_i^2 + R_i^2)
    double hole_radius(std::size_t i, double t) const {
        const double Ri = excision_radii[i];
        return std::sqrt(cavity_radius_sq(i, t) + Ri * Ri);
    }
    double hole_radius_rate(std::size_t i, double t) const {
        return 0.5 * cavity_radius_sq_rate(i, t) / hole_radius(i, t);
    }
    double outer_radius(double t) const { return t * R0; }
    double outer_radius_rate() const { return R0; }
};

// lambda = sqrt(1 + sum(v_i) / (pi R0^2))
double compute_lambda(const CavitationConfig& config);

// min over single-site and pairwise separation terms; >= 1 guarantees attainability.
double sigma(const CavitationConfig& config);

AttainabilityReport check_attainable(const CavitationConfig& config);

// Equal-area configurations only; coincides with sigma() there.
double packing_density(const CavitationConfig& config);

// v_i proportional to seed-disk areas at stretch lambda.
std::vector<double> proportional_areas(const std::vector<double>& seed_radii, double R0,
                                       double lambda);

struct CoalescenceBounds {
    double sigma_star = 0.0;
    double lambda0 = 0.0;
    double lambda_star = 0.0;
};

CoalescenceBounds coalescence_bounds(const std::vector<double>& seed_radii,
                                     const std::vector<double>& min_areas, double R0);

struct ExcisionOptions {
    double beta = 0.25;
    double beta_min = 1.0 / 64.0;
    int grid_points = 1001;  // certification grid on [1, lambda], endpoints included
};

struct ExcisionResult {
    std::vector<double> radii;  // R_i
    double margin = 0.0;        // d
};

// Evolution with centers/radii but before excision selection.
struct EvolutionSkeleton {
    double R0 = 1.0;
    double lambda = 1.0;
    std::vector<CenterPath> centers;
    std::vector<double> area_fraction;
};

ExcisionResult select_excision(const EvolutionSkeleton& skel, const ExcisionOptions& opts = {});

Evolution build_evolution(const CavitationConfig& config, const ExcisionOptions& opts = {});

HoleDomain domain_at(const Evolution& evolution, double t);

// Verifies all Evolution invariants on the certification grid; throws on failure.
void validate_evolution(const Evolution& evolution, const CavitationConfig& config,
                        int grid_points = 1001);

}  // namespace cavflow
