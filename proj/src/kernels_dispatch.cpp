#include "reccas/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace reccas::kernels {

namespace {

const Ops& pick() {
  const Ops* avx2 = avx2_ops();
  const char* want = std::getenv("RECCAS_KERNELS");
  if (want != nullptr) {
    if (std::strcmp(want, "scalar") == 0) return scalar_ops();
    if (std::strcmp(want, "avx2") == 0 && avx2 != nullptr &&
        __builtin_cpu_supports("avx2")) {
      return *avx2;
    }
    return scalar_ops();
  }
  if (avx2 != nullptr && __builtin_cpu_supports("avx2")) return *avx2;
  return scalar_ops();
}

}  // namespace

const Ops& active() {
  static const Ops& ops = pick();
  return ops;
}

}  // namespace reccas::kernels
