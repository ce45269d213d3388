#include "gdhm/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace gdhm::kernels {

namespace {
const Table* g_forced = nullptr;
}

bool avx2_available() {
#ifdef GDHM_HAVE_AVX2
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

void force_table(const Table* t) { g_forced = t; }

const Table& active_table() {
  if (g_forced) return *g_forced;
  static const Table* selected = [] {
    const char* env = std::getenv("GDHM_KERNELS");
    if (env && std::strcmp(env, "scalar") == 0) return &scalar_table();
    if (avx2_available()) return &avx2_table();
    return &scalar_table();
  }();
  return *selected;
}

}  // namespace gdhm::kernels
