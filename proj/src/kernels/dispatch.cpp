#include "lpr/kernels.hpp"

#include <atomic>

namespace lpr::kernels {
namespace {

Isa detect() {
#if defined(LPR_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  if (__builtin_cpu_supports("avx2")) return Isa::avx2;
#endif
  return Isa::scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

const KernelTable& table_for(Isa isa) {
  if (isa == Isa::avx2) {
    if (const KernelTable* t = avx2_table()) return *t;
  }
  return scalar_table();
}

}  // namespace

#ifndef LPR_HAVE_AVX2
const KernelTable* avx2_table() { return nullptr; }
#endif

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return true;
    case Isa::avx2:
#if defined(LPR_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      __builtin_cpu_init();
      return avx2_table() != nullptr && __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

const KernelTable& active() { return table_for(current().load(std::memory_order_relaxed)); }

bool select(Isa isa) {
  if (!isa_supported(isa)) return false;
  current().store(isa, std::memory_order_relaxed);
  return true;
}

Isa selected() { return current().load(std::memory_order_relaxed); }

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

}  // namespace lpr::kernels
