#include <doctest.h>

#include <cmath>
#include <vector>

#include "vids/kernels.hpp"
#include "vids/rng.hpp"

namespace k = vids::kernels;

namespace {

std::vector<double> draw(std::size_t n, vids::Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-2.0, 2.0);
  return v;
}

double tol(double scale) { return 1e-12 * (1.0 + std::abs(scale)); }

}  // namespace

TEST_CASE("scalar kernels on hand-sized inputs") {
  std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  CHECK(k::scalar::dot(a, b) == 32.0);
  std::vector<double> y{1, 1, 1};
  k::scalar::axpy(2.0, a, y);
  CHECK(y == std::vector<double>{3, 5, 7});
  std::vector<double> w{1, 1, 0, 2};  // [[1,1],[0,2]]
  std::vector<double> x{1, 2}, bias{0.5, -1}, out(2);
  k::scalar::gemv(w, 2, 2, x, bias, out);
  CHECK(out == std::vector<double>{3.5, 3});
  std::vector<double> acc{1, 1};
  k::scalar::gemv_t_acc(w, 2, 2, std::vector<double>{1, 1}, acc);
  CHECK(acc == std::vector<double>{2, 4});
  CHECK(k::scalar::sum_sq_diff(a, 2.0) == 2.0);
  CHECK(k::scalar::sum(a) == 6.0);
}

TEST_CASE("empty spans") {
  std::vector<double> e;
  CHECK(k::dot(e, e) == 0.0);
  CHECK(k::sum(e) == 0.0);
  CHECK(k::sum_sq_diff(e, 1.0) == 0.0);
}

#if VIDS_HAVE_AVX2
TEST_CASE("avx2 kernels agree with the scalar reference") {
  if (!k::isa_available(k::Isa::avx2)) {
    MESSAGE("cpu lacks avx2; skipped");
    return;
  }
  vids::Rng rng(7);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 7u, 8u, 15u, 16u, 17u, 63u, 257u}) {
    CAPTURE(n);
    auto a = draw(n, rng), b = draw(n, rng);
    double ref = k::scalar::dot(a, b);
    CHECK(std::abs(k::avx2::dot(a, b) - ref) <= tol(ref) * n);
    CHECK(std::abs(k::avx2::sum(a) - k::scalar::sum(a)) <= tol(k::scalar::sum(a)) * n);
    CHECK(std::abs(k::avx2::sum_sq_diff(a, 0.3) - k::scalar::sum_sq_diff(a, 0.3)) <= 1e-12 * (n + 1));

    auto y1 = draw(n, rng);
    auto y2 = y1;
    k::scalar::axpy(-0.7, a, y1);
    k::avx2::axpy(-0.7, a, y2);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15 * (1 + std::abs(y1[i])));
  }
  for (std::size_t rows : {1u, 3u, 8u, 13u})
    for (std::size_t cols : {1u, 2u, 4u, 9u, 33u}) {
      CAPTURE(rows);
      CAPTURE(cols);
      auto w = draw(rows * cols, rng), x = draw(cols, rng), bias = draw(rows, rng), v = draw(rows, rng);
      std::vector<double> o1(rows), o2(rows);
      k::scalar::gemv(w, rows, cols, x, bias, o1);
      k::avx2::gemv(w, rows, cols, x, bias, o2);
      for (std::size_t i = 0; i < rows; ++i) CHECK(std::abs(o1[i] - o2[i]) <= 1e-12 * cols);
      k::scalar::gemv(w, rows, cols, x, {}, o1);
      k::avx2::gemv(w, rows, cols, x, {}, o2);
      for (std::size_t i = 0; i < rows; ++i) CHECK(std::abs(o1[i] - o2[i]) <= 1e-12 * cols);
      std::vector<double> t1(cols, 0.5), t2(cols, 0.5);
      k::scalar::gemv_t_acc(w, rows, cols, v, t1);
      k::avx2::gemv_t_acc(w, rows, cols, v, t2);
      for (std::size_t j = 0; j < cols; ++j) CHECK(std::abs(t1[j] - t2[j]) <= 1e-12 * rows);
    }
}
#endif

TEST_CASE("forcing the scalar path changes dispatch") {
  auto saved = k::active_isa();
  k::force_isa(k::Isa::scalar);
  CHECK(k::active_isa() == k::Isa::scalar);
  std::vector<double> a{1, 2, 3, 4, 5};
  CHECK(k::dot(a, a) == 55.0);
  k::force_isa(saved);
  CHECK(k::isa_name(k::Isa::scalar) == "scalar");
}
