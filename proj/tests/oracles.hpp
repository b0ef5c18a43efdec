#pragma once

// Independent numerical oracles for the test suites: finite differences,
// composite Simpson quadrature, and deterministic RNG helpers.

#include <cmath>
#include <functional>
#include <random>

#include "cavflow/core.hpp"

namespace oracles {

using cavflow::Mat2;
using cavflow::Vec2;

inline Vec2 fd_gradient(const std::function<double(Vec2)>& f, Vec2 p, double h = 1e-5) {
    return {(f({p.x + h, p.y}) - f({p.x - h, p.y})) / (2.0 * h),
            (f({p.x, p.y + h}) - f({p.x, p.y - h})) / (2.0 * h)};
}

inline Mat2 fd_jacobian(const std::function<Vec2(Vec2)>& f, Vec2 p, double h = 1e-5) {
    const Vec2 dx = (f({p.x + h, p.y}) - f({p.x - h, p.y})) / (2.0 * h);
    const Vec2 dy = (f({p.x, p.y + h}) - f({p.x, p.y - h})) / (2.0 * h);
    return {dx.x, dy.x, dx.y, dy.y};
}

inline double fd_laplacian(const std::function<double(Vec2)>& f, Vec2 p, double h = 1e-3) {
    return (f({p.x + h, p.y}) + f({p.x - h, p.y}) + f({p.x, p.y + h}) + f({p.x, p.y - h}) -
            4.0 * f(p)) /
           (h * h);
}

inline double fd_divergence(const std::function<Vec2(Vec2)>& f, Vec2 p, double h = 1e-5) {
    return (f({p.x + h, p.y}).x - f({p.x - h, p.y}).x + f({p.x, p.y + h}).y -
            f({p.x, p.y - h}).y) /
           (2.0 * h);
}

inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int panels = 4096) {
    if (panels % 2) ++panels;
    const double h = (b - a) / panels;
    double s = f(a) + f(b);
    for (int i = 1; i < panels; ++i) {
        s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    }
    return s * h / 3.0;
}

struct Rng {
    std::mt19937_64 gen;
    explicit Rng(std::uint64_t seed = 987654321) : gen(seed) {}
    double uniform(double a, double b) {
        return std::uniform_real_distribution<double>(a, b)(gen);
    }
    Vec2 in_annulus(Vec2 c, double r_in, double r_out) {
        const double rho = std::sqrt(uniform(r_in * r_in, r_out * r_out));
        const double th = uniform(0.0, 2.0 * cavflow::kPi);
        return c + Vec2{rho * std::cos(th), rho * std::sin(th)};
    }
};

}  // namespace oracles
