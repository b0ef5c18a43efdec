#pragma once

#include <cstddef>
#include <cstdint>

// Batch evaluation kernels for harmonic circle blocks.
//
// A block is either a "hole" block
//     u(x) = alpha*log(|z|/r) + sum_m Re( (g_re[m]+i*g_im[m]) * (r/z)^m ),  z = x - center,
// or an "outer" block
//     u(x) = sum_m Re( (g_re[m]+i*g_im[m]) * (z/r)^m ).
// Both are exactly harmonic away from the block center.  The kernels accumulate
// value, gradient and Hessian entries for a batch of points.  Because the basis
// is harmonic, h_yy = -h_xx and h_yx = h_xy, so only (hxx, hxy) are emitted.
//
// The scalar and AVX2 variants perform the same IEEE operations in the same
// order per point, so their outputs are bit-identical; this is asserted by the
// equivalence tests.

namespace cavflow::kernels {

enum EvalWhat : unsigned {
    kValue = 1u,
    kGrad = 2u,
    kHess = 4u,
};

struct CircleBlock {
    double cx = 0.0;
    double cy = 0.0;
    double r_ref = 1.0;    // scale radius of the block
    double alpha = 0.0;    // log coefficient (holes only)
    bool outer = false;    // growing (outer) vs decaying (hole) powers
    int modes = 0;         // M
    // coefficient streams, length M each; index m-1 holds mode m
    const double* g_re = nullptr;   // gamma_m
    const double* g_im = nullptr;
    const double* mg_re = nullptr;  // m * gamma_m
    const double* mg_im = nullptr;
    // hole: m*(m+1)*gamma_m ; outer: m*(m-1)*gamma_m
    const double* m2g_re = nullptr;
    const double* m2g_im = nullptr;
};

struct EvalSink {
    double* val = nullptr;  // accumulated with +=
    double* gx = nullptr;
    double* gy = nullptr;
    double* hxx = nullptr;
    double* hxy = nullptr;
};

using EvalBlockFn = void (*)(const CircleBlock&, const double* xs, const double* ys,
                             std::size_t n, const EvalSink&, unsigned what);

// Reference implementation.
void eval_block_scalar(const CircleBlock&, const double* xs, const double* ys,
                       std::size_t n, const EvalSink&, unsigned what);

#if defined(CAVFLOW_HAVE_AVX2)
void eval_block_avx2(const CircleBlock&, const double* xs, const double* ys,
                     std::size_t n, const EvalSink&, unsigned what);
#endif

// Active kernel, selected at load time from CPU features; the CAVFLOW_SIMD
// environment variable ("scalar" or "avx2") overrides the automatic choice.
EvalBlockFn eval_block_fn();
const char* active_kernel_name();

inline void eval_block(const CircleBlock& blk, const double* xs, const double* ys,
                       std::size_t n, const EvalSink& sink, unsigned what) {
    eval_block_fn()(blk, xs, ys, n, sink, what);
}

}  // namespace cavflow::kernels
