#include "cavflow/flow.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include "parallel.hpp"

namespace cavflow {

FlowStageCache::FlowStageCache(const Evolution& evolution, int steps, const SolverOptions& opts)
    : evolution_(evolution), steps_(steps) {
    if (steps < 10) throw ConfigError("flow: at least 10 steps required");
    evals_.resize(2 * steps + 1);
    std::exception_ptr first_error;
    std::atomic<bool> failed{false};
    detail::parallel_for_chunks(evals_.size(), 8, [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k) {
            if (failed.load()) return;
            try {
                evals_[k] = build_velocity(evolution_, time_of(static_cast<int>(k)), opts);
            } catch (...) {
                if (!failed.exchange(true)) first_error = std::current_exception();
                return;
            }
        }
    });
    if (failed.load()) std::rethrow_exception(first_error);
}

double FlowStageCache::time_of(int half_step) const {
    const double h = (evolution_.lambda - 1.0) / steps_;
    return 1.0 + 0.5 * h * half_step;
}

namespace {

struct StageBuffers {
    std::vector<double> xs, ys, vx, vy, g00, g01, g10, g11;
    void resize(std::size_t n) {
        xs.resize(n);
        ys.resize(n);
        vx.resize(n);
        vy.resize(n);
        g00.resize(n);
        g01.resize(n);
        g10.resize(n);
        g11.resize(n);
    }
};

void eval_stage(const VelocityEvaluator& ev, const std::vector<Vec2>& pts, StageBuffers& buf) {
    const std::size_t n = pts.size();
    buf.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        buf.xs[i] = pts[i].x;
        buf.ys[i] = pts[i].y;
    }
    ev.eval_batch(buf.xs.data(), buf.ys.data(), n, buf.vx.data(), buf.vy.data(), buf.g00.data(),
                  buf.g01.data(), buf.g10.data(), buf.g11.data());
}

}  // namespace

TrajectoryBatch integrate_flow(const std::vector<Vec2>& seeds, const std::vector<int>& tags,
                               const Evolution& evolution, const FlowOptions& opts,
                               const FlowStageCache* cache) {
    if (seeds.size() != tags.size()) throw ConfigError("flow: seeds/tags size mismatch");
    if (opts.steps < 10) throw ConfigError("flow: at least 10 steps required");

    const HoleDomain dom1 = domain_at(evolution, 1.0);
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (!dom1.contains(seeds[i], 1e-9 * evolution.R0)) {
            std::ostringstream os;
            os << "flow: seed " << i << " lies outside E(1)";
            throw DomainError(os.str());
        }
    }

    std::unique_ptr<FlowStageCache> owned;
    if (cache == nullptr || cache->steps() != opts.steps) {
        owned = std::make_unique<FlowStageCache>(evolution, opts.steps, opts.solver);
        cache = owned.get();
    }

    const int N = opts.steps;
    const double h = (evolution.lambda - 1.0) / N;
    const std::size_t ns = seeds.size();

    TrajectoryBatch batch;
    batch.seeds = seeds;
    batch.tags = tags;
    batch.lambda = evolution.lambda;

    const int C = std::max(2, opts.checkpoints);
    std::vector<int> ck_steps(C);
    for (int c = 0; c < C; ++c) {
        ck_steps[c] = static_cast<int>(std::lround(static_cast<double>(c) * N / (C - 1)));
    }
    ck_steps.front() = 0;
    ck_steps.back() = N;
    batch.checkpoint_t.resize(C);
    batch.positions.assign(C, std::vector<Vec2>(ns));
    batch.gradients.assign(C, std::vector<Mat2>(ns));

    std::vector<Vec2> pos = seeds;
    std::vector<Mat2> grad(ns, Mat2::identity());

    int next_ck = 0;
    auto store_checkpoint = [&](int step) {
        while (next_ck < C && ck_steps[next_ck] == step) {
            batch.checkpoint_t[next_ck] = 1.0 + h * step;
            batch.positions[next_ck] = pos;
            batch.gradients[next_ck] = grad;
            ++next_ck;
        }
    };
    store_checkpoint(0);

    std::atomic<std::uint64_t> drift_bits{0};
    auto update_drift = [&](double local) {
        std::uint64_t cur = drift_bits.load();
        std::uint64_t val;
        std::memcpy(&val, &local, sizeof val);
        for (;;) {
            double curd;
            std::memcpy(&curd, &cur, sizeof curd);
            if (local <= curd) break;
            if (drift_bits.compare_exchange_weak(cur, val)) break;
        }
    };

    std::exception_ptr first_error;
    std::atomic<bool> failed{false};

    for (int step = 0; step < N; ++step) {
        const VelocityEvaluator& e0 = cache->at(2 * step);
        const VelocityEvaluator& em = cache->at(2 * step + 1);
        const VelocityEvaluator& e1 = cache->at(2 * step + 2);
        const double t1 = 1.0 + h * (step + 1);
        const HoleDomain dom_next = domain_at(evolution, t1);

        detail::parallel_for_chunks(ns, 512, [&](std::size_t b, std::size_t e) {
            if (failed.load()) return;
            const std::size_t m = e - b;
            std::vector<Vec2> stage(m);
            StageBuffers buf;
            std::vector<Vec2> k1(m), k2(m), k3(m), k4(m);
            std::vector<Mat2> k1F(m), k2F(m), k3F(m), k4F(m);

            for (std::size_t i = 0; i < m; ++i) stage[i] = pos[b + i];
            eval_stage(e0, stage, buf);
            for (std::size_t i = 0; i < m; ++i) {
                k1[i] = {buf.vx[i], buf.vy[i]};
                const Mat2 G{buf.g00[i], buf.g01[i], buf.g10[i], buf.g11[i]};
                k1F[i] = G.mul(grad[b + i]);
            }

            for (std::size_t i = 0; i < m; ++i) stage[i] = pos[b + i] + (0.5 * h) * k1[i];
            eval_stage(em, stage, buf);
            for (std::size_t i = 0; i < m; ++i) {
                k2[i] = {buf.vx[i], buf.vy[i]};
                const Mat2 G{buf.g00[i], buf.g01[i], buf.g10[i], buf.g11[i]};
                k2F[i] = G.mul(grad[b + i] + (0.5 * h) * k1F[i]);
            }

            for (std::size_t i = 0; i < m; ++i) stage[i] = pos[b + i] + (0.5 * h) * k2[i];
            eval_stage(em, stage, buf);
            for (std::size_t i = 0; i < m; ++i) {
                k3[i] = {buf.vx[i], buf.vy[i]};
                const Mat2 G{buf.g00[i], buf.g01[i], buf.g10[i], buf.g11[i]};
                k3F[i] = G.mul(grad[b + i] + (0.5 * h) * k2F[i]);
            }

            for (std::size_t i = 0; i < m; ++i) stage[i] = pos[b + i] + h * k3[i];
            eval_stage(e1, stage, buf);
            for (std::size_t i = 0; i < m; ++i) {
                k4[i] = {buf.vx[i], buf.vy[i]};
                const Mat2 G{buf.g00[i], buf.g01[i], buf.g10[i], buf.g11[i]};
                k4F[i] = G.mul(grad[b + i] + h * k3F[i]);
            }

            double local_drift = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const std::size_t s = b + i;
                pos[s] += (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                grad[s] += (h / 6.0) * (k1F[i] + 2.0 * k2F[i] + 2.0 * k3F[i] + k4F[i]);

                const int tag = tags[s];
                if (tag >= 0) {
                    const Vec2 zc = tag == 0 ? dom_next.outer_center
                                             : dom_next.holes[tag - 1].center;
                    const double rc =
                        tag == 0 ? dom_next.outer_radius : dom_next.holes[tag - 1].radius;
                    const Vec2 z = pos[s] - zc;
                    const double rho = z.norm();
                    local_drift = std::max(local_drift, std::abs(rho - rc));
                    pos[s] = zc + z * (rc / rho);
                } else if (!dom_next.contains(pos[s], opts.tol_bdry)) {
                    if (!failed.exchange(true)) {
                        std::ostringstream os;
                        os << "flow: trajectory of seed " << s << " left E(t) at t = " << t1
                           << " by more than tol_bdry";
                        first_error = std::make_exception_ptr(DomainError(os.str()));
                    }
                    return;
                }
            }
            update_drift(local_drift);
        });
        if (failed.load()) std::rethrow_exception(first_error);
        store_checkpoint(step + 1);
    }

    double drift;
    {
        const std::uint64_t bits = drift_bits.load();
        std::memcpy(&drift, &bits, sizeof drift);
    }
    batch.max_boundary_drift = drift;
    if (drift > opts.tol_bdry) {
        std::ostringstream os;
        os << "flow: boundary ring drift " << drift << " exceeds tol_bdry " << opts.tol_bdry;
        throw CertificateError(os.str());
    }
    return batch;
}

std::vector<Vec2> u_far(const TrajectoryBatch& batch) { return batch.final_positions(); }

DetReport incompressibility_report(const TrajectoryBatch& batch, double tol_det) {
    DetReport rep;
    rep.tol = tol_det;
    rep.per_checkpoint.resize(batch.checkpoint_t.size(), 0.0);
    for (std::size_t c = 0; c < batch.gradients.size(); ++c) {
        double worst = 0.0;
        for (const Mat2& F : batch.gradients[c]) {
            worst = std::max(worst, std::abs(F.det() - 1.0));
        }
        rep.per_checkpoint[c] = worst;
        rep.max_deviation = std::max(rep.max_deviation, worst);
    }
    rep.pass = rep.max_deviation <= tol_det;
    return rep;
}

InjectivityReport injectivity_probe(const TrajectoryBatch& batch, double threshold) {
    const auto& img = batch.final_positions();
    const auto& src = batch.seeds;
    if (src.size() < 2) throw ConfigError("injectivity_probe: need at least two seeds");
    InjectivityReport rep;
    rep.threshold = threshold;
    rep.min_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < src.size(); ++i) {
        for (std::size_t j = i + 1; j < src.size(); ++j) {
            const double ds = (src[i] - src[j]).norm();
            if (ds <= 0.0) continue;
            const double ratio = (img[i] - img[j]).norm() / ds;
            rep.min_ratio = std::min(rep.min_ratio, ratio);
            if (ratio < threshold) ++rep.flagged;
        }
    }
    return rep;
}

std::vector<double> gradient_frobenius_sums(const TrajectoryBatch& batch) {
    std::vector<double> sums(batch.gradients.size(), 0.0);
    for (std::size_t c = 0; c < batch.gradients.size(); ++c) {
        double s = 0.0;
        for (const Mat2& F : batch.gradients[c]) s += F.frob2();
        sums[c] = s;
    }
    return sums;
}

void certification_seeds(const Evolution& evolution, int ring_points, int interior_points,
                         std::vector<Vec2>& seeds, std::vector<int>& tags,
                         std::uint64_t rng_seed) {
    seeds.clear();
    tags.clear();
    const HoleDomain dom = domain_at(evolution, 1.0);
    for (std::size_t c = 0; c <= dom.holes.size(); ++c) {
        const Vec2 zc = c == 0 ? dom.outer_center : dom.holes[c - 1].center;
        const double rc = c == 0 ? dom.outer_radius : dom.holes[c - 1].radius;
        for (int q = 0; q < ring_points; ++q) {
            const double theta = 2.0 * kPi * q / ring_points;
            seeds.push_back(zc + Vec2{rc * std::cos(theta), rc * std::sin(theta)});
            tags.push_back(static_cast<int>(c));
        }
    }
    std::mt19937_64 rng(rng_seed);
    std::uniform_real_distribution<double> ur(0.0, 1.0);
    int placed = 0;
    while (placed < interior_points) {
        const double rho = dom.outer_radius * std::sqrt(ur(rng));
        const double theta = 2.0 * kPi * ur(rng);
        const Vec2 p = dom.outer_center + Vec2{rho * std::cos(theta), rho * std::sin(theta)};
        if (!dom.contains(p, -1e-6 * evolution.R0)) continue;  // keep strictly inside
        bool near_hole = false;
        for (const auto& hd : dom.holes) {
            if ((p - hd.center).norm() < hd.radius + 1e-6 * evolution.R0) near_hole = true;
        }
        if (near_hole) continue;
        seeds.push_back(p);
        tags.push_back(-1);
        ++placed;
    }
}

}  // namespace cavflow
