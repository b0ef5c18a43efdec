#include "cavflow/kernels/harmonic_kernels.hpp"

#include <cmath>

namespace cavflow::kernels {

void eval_block_scalar(const CircleBlock& blk, const double* xs, const double* ys,
                       std::size_t n, const EvalSink& sink, unsigned what) {
    const double cx = blk.cx, cy = blk.cy, r = blk.r_ref, alpha = blk.alpha;
    const int M = blk.modes;
    const double r2 = r * r;

    if (!blk.outer) {
        for (std::size_t p = 0; p < n; ++p) {
            const double zx = xs[p] - cx;
            const double zy = ys[p] - cy;
            const double rho2 = zx * zx + zy * zy;
            const double inv = r / rho2;
            const double wr = zx * inv;
            const double wi = -(zy * inv);

            double cur_r = wr, cur_i = wi;
            double svr = 0.0, svi = 0.0;
            double s1r = 0.0, s1i = 0.0;
            double s2r = 0.0, s2i = 0.0;
            for (int m = 0; m < M; ++m) {
                svr += blk.g_re[m] * cur_r - blk.g_im[m] * cur_i;
                svi += blk.g_re[m] * cur_i + blk.g_im[m] * cur_r;
                s1r += blk.mg_re[m] * cur_r - blk.mg_im[m] * cur_i;
                s1i += blk.mg_re[m] * cur_i + blk.mg_im[m] * cur_r;
                s2r += blk.m2g_re[m] * cur_r - blk.m2g_im[m] * cur_i;
                s2i += blk.m2g_re[m] * cur_i + blk.m2g_im[m] * cur_r;
                const double nr = cur_r * wr - cur_i * wi;
                cur_i = cur_r * wi + cur_i * wr;
                cur_r = nr;
            }
            if (what & kValue) {
                sink.val[p] += svr + alpha * (0.5 * std::log(rho2 / r2));
            }
            if (what & kGrad) {
                // F' = (w/r) * (alpha - S1)
                const double ar = alpha - s1r;
                const double ai = -s1i;
                const double fpr = (wr * ar - wi * ai) / r;
                const double fpi = (wr * ai + wi * ar) / r;
                sink.gx[p] += fpr;
                sink.gy[p] += -fpi;
            }
            if (what & kHess) {
                // F'' = (w^2/r^2) * (S2 - alpha)
                const double w2r = wr * wr - wi * wi;
                const double w2i = 2.0 * (wr * wi);
                const double br = s2r - alpha;
                const double bi = s2i;
                const double fppr = (w2r * br - w2i * bi) / r2;
                const double fppi = (w2r * bi + w2i * br) / r2;
                sink.hxx[p] += fppr;
                sink.hxy[p] += -fppi;
            }
        }
        return;
    }

    // outer (growing) block: powers s^m with s = z/r
    for (std::size_t p = 0; p < n; ++p) {
        const double sr = (xs[p] - cx) / r;
        const double si = (ys[p] - cy) / r;

        double pp_r = 0.0, pp_i = 0.0;  // s^(m-2), coefficient is zero at m=1
        double pr_r = 1.0, pr_i = 0.0;  // s^(m-1)
        double cur_r = sr, cur_i = si;  // s^m
        double svr = 0.0, svi = 0.0;
        double s1r = 0.0, s1i = 0.0;
        double s2r = 0.0, s2i = 0.0;
        for (int m = 0; m < M; ++m) {
            svr += blk.g_re[m] * cur_r - blk.g_im[m] * cur_i;
            svi += blk.g_re[m] * cur_i + blk.g_im[m] * cur_r;
            s1r += blk.mg_re[m] * pr_r - blk.mg_im[m] * pr_i;
            s1i += blk.mg_re[m] * pr_i + blk.mg_im[m] * pr_r;
            s2r += blk.m2g_re[m] * pp_r - blk.m2g_im[m] * pp_i;
            s2i += blk.m2g_re[m] * pp_i + blk.m2g_im[m] * pp_r;
            pp_r = pr_r; pp_i = pr_i;
            pr_r = cur_r; pr_i = cur_i;
            const double nr = cur_r * sr - cur_i * si;
            cur_i = cur_r * si + cur_i * sr;
            cur_r = nr;
        }
        if (what & kValue) sink.val[p] += svr;
        if (what & kGrad) {
            sink.gx[p] += s1r / r;
            sink.gy[p] += -(s1i / r);
        }
        if (what & kHess) {
            sink.hxx[p] += s2r / r2;
            sink.hxy[p] += -(s2i / r2);
        }
    }
}

}  // namespace cavflow::kernels
