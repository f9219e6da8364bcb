#pragma once

// Data-parallel inner loops shared by the dense layers, the likelihoods and
// the Monte Carlo prior. Every kernel has a scalar reference in
// vids::kernels::scalar; an AVX2/FMA variant lives in vids::kernels::avx2
// when the build enables it. The unqualified entry points dispatch on the
// ISA selected at startup (see active_isa()).
//
// The variants agree to within rounding; they do not promise identical bits,
// because the vector code reassociates sums. A given machine always takes the
// same path, so results stay reproducible run to run.

#include <cstddef>
#include <span>
#include <string_view>

namespace vids::kernels {

enum class Isa { scalar, avx2 };

/// ISA used by the dispatching entry points. Chosen once from CPUID, unless
/// the VIDS_ISA environment variable is set to "scalar".
Isa active_isa();

/// Overrides the dispatch choice. Requesting avx2 on a machine without it
/// falls back to scalar. Not thread-safe; call before starting work.
void force_isa(Isa isa);

bool isa_available(Isa isa);
std::string_view isa_name(Isa isa);

// Sum of a_i * b_i.
double dot(std::span<const double> a, std::span<const double> b);

// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// out = W x + bias, W row-major rows x cols. bias may be empty.
void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<const double> bias,
          std::span<double> out);

// out += W^T v, W row-major rows x cols.
void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> v, std::span<double> out);

// Sum of (v_i - c)^2.
double sum_sq_diff(std::span<const double> v, double c);

double sum(std::span<const double> v);

namespace scalar {
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<const double> bias,
          std::span<double> out);
void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> v, std::span<double> out);
double sum_sq_diff(std::span<const double> v, double c);
double sum(std::span<const double> v);
}  // namespace scalar

#if VIDS_HAVE_AVX2
namespace avx2 {
double dot(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<const double> bias,
          std::span<double> out);
void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> v, std::span<double> out);
double sum_sq_diff(std::span<const double> v, double c);
double sum(std::span<const double> v);
}  // namespace avx2
#endif

}  // namespace vids::kernels
