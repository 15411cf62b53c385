#include <cstdlib>
#include <cstring>

#include "pded/kernels.hpp"

namespace pded::kernels {

#ifdef PDED_HAVE_AVX2_TU
const KernelTable* avx2_table_impl();
#endif

const KernelTable* avx2_kernels() {
#ifdef PDED_HAVE_AVX2_TU
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma"))
    return avx2_table_impl();
#endif
  return nullptr;
}

const KernelTable& active_kernels() {
  static const KernelTable* selected = [] {
    const char* env = std::getenv("PDED_KERNEL");
    if (env != nullptr) {
      if (std::strcmp(env, "scalar") == 0) return &scalar_kernels();
      if (std::strcmp(env, "avx2") == 0 && avx2_kernels() != nullptr)
        return avx2_kernels();
    }
    const KernelTable* simd = avx2_kernels();
    return simd != nullptr ? simd : &scalar_kernels();
  }();
  return *selected;
}

}  // namespace pded::kernels
