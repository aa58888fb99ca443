#include "bid/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace bid::kernels {

bool avx2_supported() {
#if defined(__x86_64__) || defined(__i386__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma") &&
         avx2_table().axpy_f32 != nullptr;
#else
  return false;
#endif
}

namespace {

const Table* resolve() {
  if (const char* env = std::getenv("BID_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return &scalar_table();
    if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return &avx2_table();
  }
  return avx2_supported() ? &avx2_table() : &scalar_table();
}

}  // namespace

const Table& active() {
  static const Table* t = resolve();
  return *t;
}

std::string active_name() { return active().name; }

}  // namespace bid::kernels
