#if defined(CAVFLOW_HAVE_AVX2)

#include "cavflow/kernels/harmonic_kernels.hpp"

#include <immintrin.h>

#include <cmath>

// Four points per iteration.  Multiplies and adds are kept as separate
// intrinsics (this TU is built with -mavx2 but without -mfma) so every lane
// performs exactly the scalar reference operations; the remainder goes through
// the scalar kernel.

namespace cavflow::kernels {

namespace {

struct CplxAcc {
    __m256d re = _mm256_setzero_pd();
    __m256d im = _mm256_setzero_pd();

    inline void add_scaled(__m256d gre, __m256d gim, __m256d cr, __m256d ci) {
        re = _mm256_add_pd(re, _mm256_sub_pd(_mm256_mul_pd(gre, cr), _mm256_mul_pd(gim, ci)));
        im = _mm256_add_pd(im, _mm256_add_pd(_mm256_mul_pd(gre, ci), _mm256_mul_pd(gim, cr)));
    }
};

}  // namespace

void eval_block_avx2(const CircleBlock& blk, const double* xs, const double* ys,
                     std::size_t n, const EvalSink& sink, unsigned what) {
    const int M = blk.modes;
    const double r2s = blk.r_ref * blk.r_ref;
    const __m256d cx = _mm256_set1_pd(blk.cx);
    const __m256d cy = _mm256_set1_pd(blk.cy);
    const __m256d rv = _mm256_set1_pd(blk.r_ref);
    const __m256d r2 = _mm256_set1_pd(r2s);
    const __m256d alpha = _mm256_set1_pd(blk.alpha);
    const __m256d two = _mm256_set1_pd(2.0);

    const std::size_t n4 = n - (n % 4);

    if (!blk.outer) {
        for (std::size_t p = 0; p < n4; p += 4) {
            const __m256d zx = _mm256_sub_pd(_mm256_loadu_pd(xs + p), cx);
            const __m256d zy = _mm256_sub_pd(_mm256_loadu_pd(ys + p), cy);
            const __m256d rho2 =
                _mm256_add_pd(_mm256_mul_pd(zx, zx), _mm256_mul_pd(zy, zy));
            const __m256d inv = _mm256_div_pd(rv, rho2);
            const __m256d wr = _mm256_mul_pd(zx, inv);
            const __m256d wi = _mm256_sub_pd(_mm256_setzero_pd(), _mm256_mul_pd(zy, inv));

            __m256d cur_r = wr, cur_i = wi;
            CplxAcc sv, s1, s2;
            for (int m = 0; m < M; ++m) {
                sv.add_scaled(_mm256_set1_pd(blk.g_re[m]), _mm256_set1_pd(blk.g_im[m]), cur_r, cur_i);
                s1.add_scaled(_mm256_set1_pd(blk.mg_re[m]), _mm256_set1_pd(blk.mg_im[m]), cur_r, cur_i);
                s2.add_scaled(_mm256_set1_pd(blk.m2g_re[m]), _mm256_set1_pd(blk.m2g_im[m]), cur_r, cur_i);
                const __m256d nr =
                    _mm256_sub_pd(_mm256_mul_pd(cur_r, wr), _mm256_mul_pd(cur_i, wi));
                cur_i = _mm256_add_pd(_mm256_mul_pd(cur_r, wi), _mm256_mul_pd(cur_i, wr));
                cur_r = nr;
            }
            if (what & kValue) {
                alignas(32) double svr[4], rr[4];
                _mm256_store_pd(svr, sv.re);
                _mm256_store_pd(rr, rho2);
                for (int l = 0; l < 4; ++l) {
                    sink.val[p + l] += svr[l] + blk.alpha * (0.5 * std::log(rr[l] / r2s));
                }
            }
            if (what & kGrad) {
                const __m256d ar = _mm256_sub_pd(alpha, s1.re);
                const __m256d ai = _mm256_sub_pd(_mm256_setzero_pd(), s1.im);
                const __m256d fpr = _mm256_div_pd(
                    _mm256_sub_pd(_mm256_mul_pd(wr, ar), _mm256_mul_pd(wi, ai)), rv);
                const __m256d fpi = _mm256_div_pd(
                    _mm256_add_pd(_mm256_mul_pd(wr, ai), _mm256_mul_pd(wi, ar)), rv);
                _mm256_storeu_pd(sink.gx + p,
                                 _mm256_add_pd(_mm256_loadu_pd(sink.gx + p), fpr));
                _mm256_storeu_pd(sink.gy + p,
                                 _mm256_sub_pd(_mm256_loadu_pd(sink.gy + p), fpi));
            }
            if (what & kHess) {
                const __m256d w2r =
                    _mm256_sub_pd(_mm256_mul_pd(wr, wr), _mm256_mul_pd(wi, wi));
                const __m256d w2i = _mm256_mul_pd(two, _mm256_mul_pd(wr, wi));
                const __m256d br = _mm256_sub_pd(s2.re, alpha);
                const __m256d bi = s2.im;
                const __m256d fppr = _mm256_div_pd(
                    _mm256_sub_pd(_mm256_mul_pd(w2r, br), _mm256_mul_pd(w2i, bi)), r2);
                const __m256d fppi = _mm256_div_pd(
                    _mm256_add_pd(_mm256_mul_pd(w2r, bi), _mm256_mul_pd(w2i, br)), r2);
                _mm256_storeu_pd(sink.hxx + p,
                                 _mm256_add_pd(_mm256_loadu_pd(sink.hxx + p), fppr));
                _mm256_storeu_pd(sink.hxy + p,
                                 _mm256_sub_pd(_mm256_loadu_pd(sink.hxy + p), fppi));
            }
        }
    } else {
        for (std::size_t p = 0; p < n4; p += 4) {
            const __m256d sr = _mm256_div_pd(_mm256_sub_pd(_mm256_loadu_pd(xs + p), cx), rv);
            const __m256d si = _mm256_div_pd(_mm256_sub_pd(_mm256_loadu_pd(ys + p), cy), rv);

            __m256d pp_r = _mm256_setzero_pd(), pp_i = _mm256_setzero_pd();
            __m256d pr_r = _mm256_set1_pd(1.0), pr_i = _mm256_setzero_pd();
            __m256d cur_r = sr, cur_i = si;
            CplxAcc sv, s1, s2;
            for (int m = 0; m < M; ++m) {
                sv.add_scaled(_mm256_set1_pd(blk.g_re[m]), _mm256_set1_pd(blk.g_im[m]), cur_r, cur_i);
                s1.add_scaled(_mm256_set1_pd(blk.mg_re[m]), _mm256_set1_pd(blk.mg_im[m]), pr_r, pr_i);
                s2.add_scaled(_mm256_set1_pd(blk.m2g_re[m]), _mm256_set1_pd(blk.m2g_im[m]), pp_r, pp_i);
                pp_r = pr_r; pp_i = pr_i;
                pr_r = cur_r; pr_i = cur_i;
                const __m256d nr =
                    _mm256_sub_pd(_mm256_mul_pd(cur_r, sr), _mm256_mul_pd(cur_i, si));
                cur_i = _mm256_add_pd(_mm256_mul_pd(cur_r, si), _mm256_mul_pd(cur_i, sr));
                cur_r = nr;
            }
            if (what & kValue) {
                _mm256_storeu_pd(sink.val + p,
                                 _mm256_add_pd(_mm256_loadu_pd(sink.val + p), sv.re));
            }
            if (what & kGrad) {
                _mm256_storeu_pd(sink.gx + p,
                                 _mm256_add_pd(_mm256_loadu_pd(sink.gx + p),
                                               _mm256_div_pd(s1.re, rv)));
                _mm256_storeu_pd(sink.gy + p,
                                 _mm256_sub_pd(_mm256_loadu_pd(sink.gy + p),
                                               _mm256_div_pd(s1.im, rv)));
            }
            if (what & kHess) {
                _mm256_storeu_pd(sink.hxx + p,
                                 _mm256_add_pd(_mm256_loadu_pd(sink.hxx + p),
                                               _mm256_div_pd(s2.re, r2)));
                _mm256_storeu_pd(sink.hxy + p,
                                 _mm256_sub_pd(_mm256_loadu_pd(sink.hxy + p),
                                               _mm256_div_pd(s2.im, r2)));
            }
        }
    }

    if (n4 < n) {
        EvalSink tail = sink;
        tail.val = sink.val ? sink.val + n4 : nullptr;
        tail.gx = sink.gx ? sink.gx + n4 : nullptr;
        tail.gy = sink.gy ? sink.gy + n4 : nullptr;
        tail.hxx = sink.hxx ? sink.hxx + n4 : nullptr;
        tail.hxy = sink.hxy ? sink.hxy + n4 : nullptr;
        eval_block_scalar(blk, xs + n4, ys + n4, n - n4, tail, what);
    }
}

}  // namespace cavflow::kernels

#endif  // CAVFLOW_HAVE_AVX2
