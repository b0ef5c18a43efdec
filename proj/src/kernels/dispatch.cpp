#include "cavflow/kernels/harmonic_kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace cavflow::kernels {

namespace {

struct Selection {
    EvalBlockFn fn;
    const char* name;
};

Selection select() {
    const char* env = std::getenv("CAVFLOW_SIMD");
#if defined(CAVFLOW_HAVE_AVX2)
    if (env != nullptr) {
        if (std::strcmp(env, "scalar") == 0) return {&eval_block_scalar, "scalar"};
        if (std::strcmp(env, "avx2") == 0) return {&eval_block_avx2, "avx2"};
    }
    if (__builtin_cpu_supports("avx2")) return {&eval_block_avx2, "avx2"};
#else
    (void)env;
#endif
    return {&eval_block_scalar, "scalar"};
}

const Selection g_selection = select();

}  // namespace

EvalBlockFn eval_block_fn() { return g_selection.fn; }

const char* active_kernel_name() { return g_selection.name; }

}  // namespace cavflow::kernels
