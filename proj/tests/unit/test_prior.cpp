#include <doctest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "helpers.hpp"
#include "vids/error.hpp"
#include "vids/prior.hpp"

using namespace vids;

namespace {

PriorConfig classification() {
  PriorConfig c;
  c.task = Task::classification;
  return c;
}

// Trapezoid rule for 2 * integral of log N(y; c, 1) over [c - 5, c + 5].
double quadrature_oracle(double c, std::size_t nodes = 10000) {
  const double lo = c - 5.0, hi = c + 5.0, h = (hi - lo) / (nodes - 1);
  auto f = [c](double y) { return -0.5 * std::log(2 * std::numbers::pi) - 0.5 * (y - c) * (y - c); };
  double s = 0.5 * (f(lo) + f(hi));
  for (std::size_t i = 1; i + 1 < nodes; ++i) s += f(lo + i * h);
  return 2.0 * s * h;
}

// One train and one test embedding; theta = (0, c) gives f == c.
double constant_head_energy(double c, std::size_t r, std::uint64_t seed) {
  PriorConfig cfg{c - 5.0, c + 5.0, r, Task::regression};
  Rng rng(seed);
  std::vector<double> theta{0.0, c};
  return energy(theta, test::matrix(1, 1, {0.3}), std::vector<double>{-1.2}, cfg, rng);
}

}  // namespace

TEST_CASE("classification energy at zero logits") {
  Rng rng(0);
  std::vector<double> theta{0.0, 0.0};
  double e = energy(theta, test::matrix(1, 1, {0.7}), std::vector<double>{-2.0}, classification(), rng);
  CHECK(e == doctest::Approx(-2.772588722239781).epsilon(1e-14));
  double e3 = energy(theta, test::matrix(3, 1, {1, 2, 3}), std::vector<double>{4}, classification(), rng);
  CHECK(e3 == doctest::Approx(-4 * 2 * std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("classification energy with an informative train point") {
  Rng rng(0);
  // logit ln 4 gives p(y=1) = 0.8 on the train point; the test point sits at logit 0.
  std::vector<double> theta{std::log(4.0), 0.0};
  double e = energy(theta, test::matrix(1, 1, {1.0}), std::vector<double>{0.0}, classification(), rng);
  CHECK(e == doctest::Approx(-3.218875824868201).epsilon(1e-13));
  CHECK(log_prior_unnorm(theta, test::matrix(1, 1, {1.0}), std::vector<double>{0.0}, classification(), rng) == e);
}

TEST_CASE("classification energy equals brute-force enumeration") {
  Rng rng(21);
  for (int t = 0; t < 10; ++t) {
    Matrix train = test::random_matrix(5, 3, rng);
    std::vector<double> test_e{rng.normal(), rng.normal(), rng.normal()};
    std::vector<double> theta{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    double brute = 0;
    for (double y : {0.0, 1.0}) {
      for (std::size_t i = 0; i < train.rows; ++i) brute += log_lik(y, head_output(theta, train.row(i)), Task::classification);
      brute += log_lik(y, head_output(theta, test_e), Task::classification);
    }
    CHECK(energy(theta, train, test_e, classification(), rng) == doctest::Approx(brute).epsilon(1e-13));
  }
}

TEST_CASE("classification energy falls off at large parameters") {
  Rng rng(4);
  for (int t = 0; t < 10; ++t) {
    Matrix train = test::random_matrix(6, 2, rng);
    std::vector<double> test_e{rng.normal(), rng.normal()};
    std::vector<double> dir{rng.normal(), rng.normal(), rng.normal()};
    double n = std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]);
    for (double& v : dir) v *= 1e3 / n;
    std::vector<double> zero(3, 0.0);
    CHECK(energy(dir, train, test_e, classification(), rng) < energy(zero, train, test_e, classification(), rng));
  }
}

TEST_CASE("regression energy matches the quadrature oracle") {
  for (double c : {0.0, 1.5, -2.0}) {
    CAPTURE(c);
    double oracle = quadrature_oracle(c);
    CHECK(std::abs(constant_head_energy(c, 10000, 3) - oracle) <= 0.01 * std::abs(oracle));
  }
}

TEST_CASE("regression energy error shrinks with more draws") {
  const double oracle = quadrature_oracle(0.0);
  double prev = 1e300;
  for (std::size_t r : {100u, 1000u, 10000u}) {
    std::vector<double> errs;
    for (std::uint64_t s = 0; s < 20; ++s) errs.push_back(std::abs(constant_head_energy(0.0, r, 100 + s) - oracle));
    std::nth_element(errs.begin(), errs.begin() + 10, errs.end());
    CAPTURE(r);
    CHECK(errs[10] < prev);
    prev = errs[10];
  }
}

TEST_CASE("regression energy is reproducible under a shared seed") {
  CHECK(constant_head_energy(0.4, 64, 77) == constant_head_energy(0.4, 64, 77));
}

TEST_CASE("energy prefers heads that fit every target better") {
  // With a range centred on the head output, moving the output away lowers every integrand term.
  PriorConfig cfg{-3.0, 3.0, 256, Task::regression};
  auto draws_rng = Rng(5);
  auto draws = draw_prior_targets(cfg, draws_rng);
  Matrix train = test::matrix(2, 1, {0.0, 0.0});
  std::vector<double> test_e{0.0};
  double centred = energy_with_draws(std::vector<double>{1.0, 0.0}, train, test_e, cfg, draws);
  double shifted = energy_with_draws(std::vector<double>{1.0, 4.0}, train, test_e, cfg, draws);
  CHECK(centred > shifted);
}

TEST_CASE("prior config validation") {
  PriorConfig cfg{0.0, 1.0, 0, Task::regression};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.r = 3;
  cfg.y_max = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  Rng rng(0);
  cfg = PriorConfig{0.0, 1.0, 0, Task::regression};
  CHECK_THROWS_AS(energy(std::vector<double>{0, 0}, test::matrix(1, 1, {0}), std::vector<double>{0}, cfg, rng),
                  ConfigError);
}

TEST_CASE("point energy derivative") {
  PriorConfig cfg{-2.0, 4.0, 32, Task::regression};
  Rng rng(1);
  auto draws = draw_prior_targets(cfg, rng);
  auto pe = PointEnergy::make(cfg, draws);
  for (double f : {-1.0, 0.3, 2.5}) {
    double fd = (pe.value(f + 1e-6) - pe.value(f - 1e-6)) / 2e-6;
    CHECK(pe.grad(f) == doctest::Approx(fd).epsilon(1e-7));
  }
  auto pc = PointEnergy::make(classification(), {});
  double fd = (pc.value(0.7 + 1e-6) - pc.value(0.7 - 1e-6)) / 2e-6;
  CHECK(pc.grad(0.7) == doctest::Approx(fd).epsilon(1e-7));
}

TEST_CASE("exchangeability of intercept and the constant feature") {
  auto ex = prior_example_covariates(50, 50, 1.0, 11);
  const double c = 0.5;
  std::vector<std::array<double, 3>> bases{{0, 1, 0}, {1, -0.5, 2}, {-2, 1.5, -1}};
  std::vector<double> shifts{-1, -0.25, 0.5, 2};
  CHECK(exchangeability_gap(ex.train_x, Matrix(0, 2), c, bases, shifts) <= 1e-9);
  CHECK(exchangeability_gap(ex.train_x, ex.test_x, c, bases, shifts) > 1e-3);
  for (std::size_t i = 0; i < ex.train_x.rows; ++i) CHECK(ex.train_x(i, 1) == 0.5);
}

TEST_CASE("prior grid shape and contents") {
  auto ex = prior_example_covariates(20, 5, 1.0, 2);
  PriorGridSpec one;
  one.a = GridAxis{0, 0.5, 0.5, 1};
  one.b = GridAxis{2, -1.0, -1.0, 1};
  Matrix g1 = prior_grid(ex.train_x, ex.test_x, one);
  CHECK(g1.rows == 1);
  CHECK(g1.cols == 1);

  PriorGridSpec spec;
  spec.a = GridAxis{0, -2.0, 2.0, 5};
  spec.b = GridAxis{2, -4.0, 4.0, 9};
  Matrix g = prior_grid(ex.train_x, Matrix(0, 2), spec);
  CHECK(g.rows == 5);
  CHECK(g.cols == 9);
  // Nodes with equal beta0 + beta2 / 2 share an energy: (-2, 4) and (0, 0) and (2, -4).
  CHECK(g(0, 8) == doctest::Approx(g(2, 4)).epsilon(1e-12));
  CHECK(g(4, 0) == doctest::Approx(g(2, 4)).epsilon(1e-12));
  Rng rng(0);
  auto theta = logistic_theta(spec.a.at(1), spec.fixed_value, spec.b.at(3));
  CHECK(g(1, 3) == doctest::Approx(energy_multi(theta, ex.train_x, Matrix(0, 2), PriorConfig{-3, 3, 1, Task::classification}, {})));

  std::ostringstream os;
  write_prior_grid_csv(os, spec, g);
  std::string text = os.str();
  CHECK(text.rfind("beta_a,beta_b,energy\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 1 + 45);
}
