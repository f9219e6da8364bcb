#include <cstdlib>
#include <cstring>

#include "vids/kernels.hpp"

namespace vids::kernels {
namespace {

bool cpu_has_avx2() {
#if VIDS_HAVE_AVX2 && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("VIDS_ISA"); env && std::strcmp(env, "scalar") == 0)
    return Isa::scalar;
  return cpu_has_avx2() ? Isa::avx2 : Isa::scalar;
}

Isa& current() {
  static Isa isa = detect();
  return isa;
}

}  // namespace

Isa active_isa() { return current(); }

bool isa_available(Isa isa) { return isa == Isa::scalar || cpu_has_avx2(); }

void force_isa(Isa isa) { current() = isa_available(isa) ? isa : Isa::scalar; }

std::string_view isa_name(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

#if VIDS_HAVE_AVX2
#define VIDS_DISPATCH(fn, ...) \
  (current() == Isa::avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define VIDS_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

double dot(std::span<const double> a, std::span<const double> b) {
  return VIDS_DISPATCH(dot, a, b);
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  VIDS_DISPATCH(axpy, alpha, x, y);
}

void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<const double> bias,
          std::span<double> out) {
  VIDS_DISPATCH(gemv, w, rows, cols, x, bias, out);
}

void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> v, std::span<double> out) {
  VIDS_DISPATCH(gemv_t_acc, w, rows, cols, v, out);
}

double sum_sq_diff(std::span<const double> v, double c) {
  return VIDS_DISPATCH(sum_sq_diff, v, c);
}

double sum(std::span<const double> v) { return VIDS_DISPATCH(sum, v); }

#undef VIDS_DISPATCH

}  // namespace vids::kernels
