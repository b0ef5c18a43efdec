#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace cavflow {

inline constexpr double kPi = std::numbers::pi;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2() = default;
    Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    Vec2& operator-=(Vec2 o) { x -= o.x; y -= o.y; return *this; }
    Vec2 operator-() const { return {-x, -y}; }

    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double cross(Vec2 o) const { return x * o.y - y * o.x; }
    double norm2() const { return x * x + y * y; }
    double norm() const { return std::hypot(x, y); }
    Vec2 perp() const { return {-y, x}; }  // counterclockwise rotation by 90 degrees
};

inline Vec2 operator*(double s, Vec2 v) { return v * s; }

struct Mat2 {
    // row-major: [a b; c d]
    double a = 0.0, b = 0.0, c = 0.0, d = 0.0;

    static Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static Mat2 outer(Vec2 u, Vec2 v) { return {u.x * v.x, u.x * v.y, u.y * v.x, u.y * v.y}; }

    Mat2 operator+(Mat2 o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
    Mat2 operator-(Mat2 o) const { return {a - o.a, b - o.b, c - o.c, d - o.d}; }
    Mat2 operator*(double s) const { return {a * s, b * s, c * s, d * s}; }
    Mat2& operator+=(Mat2 o) { a += o.a; b += o.b; c += o.c; d += o.d; return *this; }

    Vec2 apply(Vec2 v) const { return {a * v.x + b * v.y, c * v.x + d * v.y}; }
    Mat2 mul(Mat2 o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d,
                c * o.a + d * o.c, c * o.b + d * o.d};
    }
    double det() const { return a * d - b * c; }
    double trace() const { return a + d; }
    double frob2() const { return a * a + b * b + c * c + d * d; }
    double frob() const { return std::sqrt(frob2()); }
    // largest singular value
    double opnorm() const {
        const double f2 = frob2();
        const double dt = det();
        const double disc = std::sqrt(std::max(0.0, f2 * f2 - 4.0 * dt * dt));
        return std::sqrt(0.5 * (f2 + disc));
    }
};

inline Mat2 operator*(double s, Mat2 m) { return m * s; }

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid or inconsistent input configuration.
struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// The sufficient attainability test (or a geometric selection step) did not certify the input.
struct NotCertifiedError : Error {
    explicit NotCertifiedError(const std::string& msg) : Error(msg) {}
};

// A numerical certificate (residual, determinant drift, fit quality, ...) failed its threshold.
struct CertificateError : Error {
    explicit CertificateError(const std::string& msg) : Error(msg) {}
};

// Point handed to an evaluator lies outside the valid region.
struct DomainError : Error {
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

}  // namespace cavflow
