#pragma once

#include <memory>
#include <vector>

#include "cavflow/core.hpp"
#include "cavflow/geometry.hpp"
#include "cavflow/velocity.hpp"

namespace cavflow {

struct FlowOptions {
    int steps = 400;          // fixed-step RK4 over [1, lambda]
    double tol_det = 1e-4;
    double tol_bdry = 1e-5;
    int checkpoints = 11;     // stored time slices, endpoints included
    SolverOptions solver;
};

// Velocity evaluators at the 2N+1 distinct RK4 stage times, built once and
// shared between integrations over the same evolution.
class FlowStageCache {
  public:
    FlowStageCache(const Evolution& evolution, int steps, const SolverOptions& opts);

    const VelocityEvaluator& at(int half_step) const { return evals_[half_step]; }
    double time_of(int half_step) const;
    int steps() const { return steps_; }
    const Evolution& evolution() const { return evolution_; }

  private:
    Evolution evolution_;
    int steps_;
    std::vector<VelocityEvaluator> evals_;
};

// Seed tag: -1 interior, 0 outer circle, k >= 1 hole k-1.
struct TrajectoryBatch {
    std::vector<Vec2> seeds;
    std::vector<int> tags;
    double lambda = 1.0;
    std::vector<double> checkpoint_t;
    std::vector<std::vector<Vec2>> positions;  // [checkpoint][seed]
    std::vector<std::vector<Mat2>> gradients;  // deformation gradients F
    double max_boundary_drift = 0.0;           // pre-projection drift, max over steps

    const std::vector<Vec2>& final_positions() const { return positions.back(); }
    const std::vector<Mat2>& final_gradients() const { return gradients.back(); }
};

TrajectoryBatch integrate_flow(const std::vector<Vec2>& seeds, const std::vector<int>& tags,
                               const Evolution& evolution, const FlowOptions& opts = {},
                               const FlowStageCache* cache = nullptr);

// Final positions f(x, lambda).
std::vector<Vec2> u_far(const TrajectoryBatch& batch);

struct DetReport {
    double max_deviation = 0.0;              // max |det F - 1|
    std::vector<double> per_checkpoint;
    bool pass = false;
    double tol = 0.0;
};

DetReport incompressibility_report(const TrajectoryBatch& batch, double tol_det = 1e-4);

struct InjectivityReport {
    double min_ratio = 0.0;   // min over pairs of |image gap| / |seed gap|
    std::size_t flagged = 0;  // pairs with ratio below the fold threshold
    double threshold = 0.0;
};

InjectivityReport injectivity_probe(const TrajectoryBatch& batch, double threshold = 1e-3);

// sum over seeds of |F|_F^2 at every checkpoint (for the decay certificate)
std::vector<double> gradient_frobenius_sums(const TrajectoryBatch& batch);

// standard certification seed set: rings on every boundary circle + interior cloud
void certification_seeds(const Evolution& evolution, int ring_points, int interior_points,
                         std::vector<Vec2>& seeds, std::vector<int>& tags,
                         std::uint64_t rng_seed = 12345);

}  // namespace cavflow
