#include <atomic>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <string>

#include "assoc/errors.hpp"
#include "kernels_impl.hpp"

namespace assoc::kernels {
namespace {

const Table* initial_table() {
  const Table* best = &detail::kScalarTable;
  if (const Table* t = avx2_table(); t != nullptr && cpu_supports_avx2()) best = t;
  if (const char* env = std::getenv("ASSOC_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) best = &detail::kScalarTable;
  }
  return best;
}

std::atomic<const Table*>& active_slot() {
  static std::atomic<const Table*> slot{initial_table()};
  return slot;
}

}  // namespace

const Table& scalar_table() { return detail::kScalarTable; }

const Table* avx2_table() {
#if defined(ASSOC_HAVE_AVX2)
  return &detail::kAvx2Table;
#else
  return nullptr;
#endif
}

bool cpu_supports_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const Table& active() { return *active_slot().load(std::memory_order_relaxed); }

Backend backend() { return active().backend; }

void set_backend(Backend b) {
  if (b == Backend::scalar) {
    active_slot().store(&detail::kScalarTable);
    return;
  }
  const Table* t = avx2_table();
  if (t == nullptr || !cpu_supports_avx2()) {
    throw ArgumentError("avx2 kernels are not available on this build/CPU");
  }
  active_slot().store(t);
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
  }
  return "unknown";
}

double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const Table& t = active();
  const double m = t.max(x.data(), x.size());
  if (!std::isfinite(m)) return m;
  // exp_shift needs scratch; small inputs go through a stack buffer.
  double stack[64];
  if (x.size() <= 64) return m + std::log(t.exp_shift(x.data(), m, stack, x.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); i += 64) {
    const std::size_t len = std::min<std::size_t>(64, x.size() - i);
    s += t.exp_shift(x.data() + i, m, stack, len);
  }
  return m + std::log(s);
}

double softmax(std::span<const double> eta, std::span<double> p) {
  const Table& t = active();
  const double m = t.max(eta.data(), eta.size());
  const double s = t.exp_shift(eta.data(), m, p.data(), eta.size());
  t.scale(1.0 / s, p.data(), p.size());
  return m + std::log(s);
}

}  // namespace assoc::kernels
