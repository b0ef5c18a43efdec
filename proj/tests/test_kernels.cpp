#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "cavflow/kernels/harmonic_kernels.hpp"
#include "oracles.hpp"

using namespace cavflow;
using namespace cavflow::kernels;

namespace {

struct BlockStorage {
    std::vector<double> g_re, g_im, mg_re, mg_im, m2g_re, m2g_im;
    CircleBlock blk;

    BlockStorage(double cx, double cy, double r, double alpha, bool outer, int M,
                 oracles::Rng& rng) {
        g_re.resize(M);
        g_im.resize(M);
        mg_re.resize(M);
        mg_im.resize(M);
        m2g_re.resize(M);
        m2g_im.resize(M);
        for (int m = 1; m <= M; ++m) {
            const double re = rng.uniform(-1.0, 1.0);
            const double im = rng.uniform(-1.0, 1.0);
            const double m2 = outer ? m * (m - 1.0) : m * (m + 1.0);
            g_re[m - 1] = re;
            g_im[m - 1] = im;
            mg_re[m - 1] = m * re;
            mg_im[m - 1] = m * im;
            m2g_re[m - 1] = m2 * re;
            m2g_im[m - 1] = m2 * im;
        }
        blk.cx = cx;
        blk.cy = cy;
        blk.r_ref = r;
        blk.alpha = alpha;
        blk.outer = outer;
        blk.modes = M;
        blk.g_re = g_re.data();
        blk.g_im = g_im.data();
        blk.mg_re = mg_re.data();
        blk.mg_im = mg_im.data();
        blk.m2g_re = m2g_re.data();
        blk.m2g_im = m2g_im.data();
    }
};

struct Outputs {
    std::vector<double> val, gx, gy, hxx, hxy;
    explicit Outputs(std::size_t n) : val(n, 0.0), gx(n, 0.0), gy(n, 0.0), hxx(n, 0.0), hxy(n, 0.0) {}
    EvalSink sink() {
        return {val.data(), gx.data(), gy.data(), hxx.data(), hxy.data()};
    }
};

double block_value(const CircleBlock& blk, Vec2 p) {
    double v = 0.0;
    EvalSink s;
    s.val = &v;
    eval_block_scalar(blk, &p.x, &p.y, 1, s, kValue);
    return v;
}

}  // namespace

TEST_CASE("hand-checked single-mode hole block") {
    // u = (r/rho) cos(theta) evaluated on the x-axis
    std::vector<double> one = {1.0}, zero = {0.0};
    CircleBlock blk;
    blk.r_ref = 1.0;
    blk.modes = 1;
    blk.g_re = one.data();
    blk.g_im = zero.data();
    blk.mg_re = one.data();
    blk.mg_im = zero.data();
    std::vector<double> two = {2.0};
    blk.m2g_re = two.data();
    blk.m2g_im = zero.data();

    const double x = 1.7, y = 0.0;
    Outputs out(1);
    eval_block_scalar(blk, &x, &y, 1, out.sink(), kValue | kGrad | kHess);
    CHECK(out.val[0] == doctest::Approx(1.0 / 1.7).epsilon(1e-14));
    CHECK(out.gx[0] == doctest::Approx(-1.0 / (1.7 * 1.7)).epsilon(1e-14));
    CHECK(out.gy[0] == doctest::Approx(0.0));
    CHECK(out.hxx[0] == doctest::Approx(2.0 / (1.7 * 1.7 * 1.7)).epsilon(1e-14));
}

TEST_CASE("hand-checked single-mode outer block") {
    // u = (rho/r) cos(theta) = x / r
    std::vector<double> one = {1.0}, zero = {0.0};
    CircleBlock blk;
    blk.outer = true;
    blk.r_ref = 2.0;
    blk.modes = 1;
    blk.g_re = one.data();
    blk.g_im = zero.data();
    blk.mg_re = one.data();
    blk.mg_im = zero.data();
    blk.m2g_re = zero.data();  // m(m-1) = 0 at m = 1
    blk.m2g_im = zero.data();

    const double x = 0.3, y = -0.6;
    Outputs out(1);
    eval_block_scalar(blk, &x, &y, 1, out.sink(), kValue | kGrad | kHess);
    CHECK(out.val[0] == doctest::Approx(0.15).epsilon(1e-14));
    CHECK(out.gx[0] == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(out.gy[0] == doctest::Approx(0.0));
    CHECK(out.hxx[0] == doctest::Approx(0.0));
}

TEST_CASE("gradient and hessian agree with finite differences") {
    oracles::Rng rng(42);
    for (int rep = 0; rep < 8; ++rep) {
        const bool outer = rep % 2 == 0;
        BlockStorage bs(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(0.5, 1.5),
                        outer ? 0.0 : rng.uniform(-1.0, 1.0), outer, 8, rng);
        auto f = [&](Vec2 p) { return block_value(bs.blk, p); };
        for (int k = 0; k < 10; ++k) {
            const Vec2 p = rng.in_annulus({bs.blk.cx, bs.blk.cy}, 1.2 * bs.blk.r_ref,
                                          outer ? 1.4 * bs.blk.r_ref : 2.5 * bs.blk.r_ref);
            Outputs out(1);
            eval_block_scalar(bs.blk, &p.x, &p.y, 1, out.sink(), kGrad | kHess);
            const Vec2 fd = oracles::fd_gradient(f, p);
            const double scale = std::max(1.0, std::hypot(out.gx[0], out.gy[0]));
            CHECK(std::abs(out.gx[0] - fd.x) / scale < 2e-7);
            CHECK(std::abs(out.gy[0] - fd.y) / scale < 2e-7);
            // harmonicity: FD Laplacian vanishes relative to the Hessian scale
            // (the FD truncation error itself grows with the 4th derivative)
            CHECK(std::abs(oracles::fd_laplacian(f, p)) <
                  1e-2 * std::max(1.0, std::abs(out.hxx[0])));
            // hessian entries vs FD of the gradient
            auto gx = [&](Vec2 q) {
                Outputs o(1);
                eval_block_scalar(bs.blk, &q.x, &q.y, 1, o.sink(), kGrad);
                return Vec2{o.gx[0], o.gy[0]};
            };
            const Mat2 J = oracles::fd_jacobian(gx, p);
            CHECK(std::abs(out.hxx[0] - J.a) < 2e-6 * std::max(1.0, std::abs(out.hxx[0])));
            CHECK(std::abs(out.hxy[0] - J.b) < 2e-6 * std::max(1.0, std::abs(out.hxy[0])));
        }
    }
}

#if defined(CAVFLOW_HAVE_AVX2)
TEST_CASE("avx2 kernel is bit-identical to the scalar reference") {
    if (!__builtin_cpu_supports("avx2")) {
        MESSAGE("avx2 not available on this host; skipping");
        return;
    }
    oracles::Rng rng(7);
    for (int rep = 0; rep < 12; ++rep) {
        const bool outer = rep % 2 == 1;
        const int M = rep % 3 == 0 ? 1 : (rep % 3 == 1 ? 5 : 32);
        BlockStorage bs(rng.uniform(-0.4, 0.4), rng.uniform(-0.4, 0.4), rng.uniform(0.3, 2.0),
                        outer ? 0.0 : rng.uniform(-2.0, 2.0), outer, M, rng);
        const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform(0, 66));
        std::vector<double> xs(n), ys(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec2 p = rng.in_annulus({bs.blk.cx, bs.blk.cy}, 1.1 * bs.blk.r_ref,
                                          3.0 * bs.blk.r_ref);
            xs[i] = p.x;
            ys[i] = p.y;
        }
        Outputs a(n), b(n);
        const unsigned what = kValue | kGrad | kHess;
        eval_block_scalar(bs.blk, xs.data(), ys.data(), n, a.sink(), what);
        eval_block_avx2(bs.blk, xs.data(), ys.data(), n, b.sink(), what);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(a.val[i] == b.val[i]);
            CHECK(a.gx[i] == b.gx[i]);
            CHECK(a.gy[i] == b.gy[i]);
            CHECK(a.hxx[i] == b.hxx[i]);
            CHECK(a.hxy[i] == b.hxy[i]);
        }
    }
}
#endif

TEST_CASE("dispatch reports an active kernel") {
    CHECK(eval_block_fn() != nullptr);
    const std::string name = active_kernel_name();
    CHECK((name == "scalar" || name == "avx2"));
}
