#include "vids/kernels.hpp"

namespace vids::kernels::scalar {

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void gemv(std::span<const double> w, std::size_t rows, std::size_t cols,
          std::span<const double> x, std::span<const double> bias,
          std::span<double> out) {
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = bias.empty() ? 0.0 : bias[r];
    const double* row = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    out[r] = acc;
  }
}

void gemv_t_acc(std::span<const double> w, std::size_t rows, std::size_t cols,
                std::span<const double> v, std::span<double> out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double vr = v[r];
    if (vr == 0.0) continue;
    const double* row = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) out[c] += vr * row[c];
  }
}

double sum_sq_diff(std::span<const double> v, double c) {
  double acc = 0.0;
  for (double x : v) {
    const double d = x - c;
    acc += d * d;
  }
  return acc;
}

double sum(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc;
}

}  // namespace vids::kernels::scalar
