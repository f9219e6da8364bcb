#include <doctest.h>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "vids/env_theory.hpp"
#include "vids/error.hpp"

using namespace vids;

namespace {

BinnedDistribution dist(std::vector<double> p) { return BinnedDistribution{std::move(p)}; }

// All probability vectors on k bins with entries in multiples of 1/m.
void types(std::size_t k, std::size_t m, std::vector<std::size_t>& cur, std::vector<std::vector<double>>& out) {
  if (cur.size() + 1 == k) {
    std::size_t used = 0;
    for (auto c : cur) used += c;
    std::vector<double> q;
    for (auto c : cur) q.push_back(static_cast<double>(c) / m);
    q.push_back(static_cast<double>(m - used) / m);
    out.push_back(q);
    return;
  }
  std::size_t used = 0;
  for (auto c : cur) used += c;
  for (std::size_t c = 0; c + used <= m; ++c) {
    cur.push_back(c);
    types(k, m, cur, out);
    cur.pop_back();
  }
}

double binom(int n, int k) { return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0))); }

}  // namespace

TEST_CASE("binning data") {
  Partition part{{{0.0, 0.5, 1.0}}};
  CHECK(bin_data(std::vector<double>{0.1, 0.9}, part).probs == std::vector<double>{0.5, 0.5});
  CHECK(bin_data(std::vector<double>{0.1, 0.2, 0.3}, part).probs == std::vector<double>{1.0, 0.0});
  CHECK(bin_data(std::vector<double>{1.0}, part).probs == std::vector<double>{0.0, 1.0});
  CHECK(bin_data(std::vector<double>{0.5}, part).probs == std::vector<double>{0.0, 1.0});
  CHECK_THROWS_AS(bin_data(std::vector<double>{1.01}, part), InputError);
  CHECK_THROWS_AS(bin_data(std::vector<double>{-0.1}, part), InputError);

  Rng rng(3);
  std::vector<double> u(1000);
  for (double& v : u) v = rng.uniform();
  auto p = bin_data(u, equal_width_partition(0.0, 1.0, 4));
  for (double v : p.probs) {
    CHECK(v >= 0.2);
    CHECK(v <= 0.3);
  }
}

TEST_CASE("multi-dimensional partitions") {
  Matrix x = test::matrix(4, 2, {0, 0, 1, 1, 0, 1, 1, 0});
  Partition p = default_partition(x, 64);
  CHECK(p.cells() <= 64);
  CHECK(p.edges.size() == 2);
  auto b = bin_data(x, p);
  double total = 0;
  for (double v : b.probs) total += v;
  CHECK(total == doctest::Approx(1.0));
  CHECK_NOTHROW(b.validate());
  Partition q = default_partition(test::matrix(2, 3, {0, 0, 0, 1, 1, 1}), 10);
  CHECK(q.cells() <= 10);
}

TEST_CASE("distribution validation") {
  CHECK_THROWS_AS(dist({0.5, 0.6}).validate(), InputError);
  CHECK_THROWS_AS(dist({1.5, -0.5}).validate(), InputError);
  CHECK_NOTHROW(dist({0.25, 0.75}).validate());
}

TEST_CASE("rounded target") {
  CHECK(rounded_target(dist({0.5, 0.5}), 4).probs == std::vector<double>{0.5, 0.5});
  auto q = rounded_target(dist({0.3, 0.7}), 4);
  CHECK(q.probs[0] == doctest::Approx(0.25));
  CHECK(q.probs[1] == doctest::Approx(0.75));
  CHECK(l1(q.probs, std::vector<double>{0.3, 0.7}) == doctest::Approx(0.1));
  CHECK(rounded_target(dist({1.0}), 7).probs == std::vector<double>{1.0});

  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    std::size_t k = 1 + rng.below(6), m = 1 + rng.below(30);
    std::vector<double> p(k);
    double s = 0;
    for (double& v : p) s += v = rng.uniform();
    for (double& v : p) v /= s;
    auto r = rounded_target(dist(p), m);
    CHECK(l1(r.probs, p) <= 2.0 * (k - 1) / m + 1e-12);
    for (double v : r.probs) CHECK(std::abs(v * m - std::round(v * m)) < 1e-9);
  }
}

TEST_CASE("divergences") {
  std::vector<double> p{0.2, 0.3, 0.5};
  CHECK(kl(p, p) == 0.0);
  CHECK(l1(std::vector<double>{1, 0}, std::vector<double>{0, 1}) == 2.0);
  CHECK(kl(std::vector<double>{0.25, 0.75}, std::vector<double>{0.5, 0.5}) ==
        doctest::Approx(0.25 * std::log(0.5) + 0.75 * std::log(1.5)).epsilon(1e-14));
  CHECK(kl(std::vector<double>{0.25, 0.75}, std::vector<double>{0.5, 0.5}) == doctest::Approx(0.130812035941137));
  CHECK(kl(std::vector<double>{0.0, 1.0}, std::vector<double>{0.5, 0.5}) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(kl(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0}), SupportError);
}

TEST_CASE("type probability bound") {
  std::vector<double> u{0.5, 0.5};
  CHECK(xi_bound(u, u, 4, 2) == doctest::Approx(0.04).epsilon(1e-14));
  CHECK(xi_bound(u, u, 0, 2) == 1.0);
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    double a = rng.uniform();
    CHECK(xi_bound(std::vector<double>{0.5, 0.5}, std::vector<double>{a, 1 - a}, 1 + rng.below(20), 2) <= 1.0);
  }
}

TEST_CASE("bound never exceeds the exact type probability") {
  Rng rng(17);
  for (std::size_t k = 1; k <= 3; ++k)
    for (std::size_t m = 1; m <= 8; ++m)
      for (int rep = 0; rep < 3; ++rep) {
        std::vector<double> p(k);
        double s = 0;
        for (double& v : p) s += v = 0.05 + rng.uniform();
        for (double& v : p) v /= s;
        std::vector<std::vector<double>> qs;
        std::vector<std::size_t> cur;
        types(k, m, cur, qs);
        double total = 0;
        for (const auto& q : qs) {
          double exact = type_class_probability(q, p, m);
          total += exact;
          CAPTURE(k);
          CAPTURE(m);
          CHECK(xi_bound(q, p, m, k) <= exact * (1 + 1e-12));
        }
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
      }
  // m = 4, k = 2, balanced type: C(4,2) / 16
  CHECK(type_class_probability(std::vector<double>{0.5, 0.5}, std::vector<double>{0.5, 0.5}, 4) ==
        doctest::Approx(binom(4, 2) / 16.0).epsilon(1e-14));
}

TEST_CASE("required environment count") {
  CHECK(std::log(0.05) / std::log(0.96) == doctest::Approx(73.38).epsilon(1e-3));
  CHECK(required_L(0.04, 0.05) == 74);
  CHECK(required_L(0.5, 0.5) == 1);
  CHECK_THROWS_AS(required_L(0.0, 0.05), DomainError);
  CHECK_THROWS_AS(required_L(1.0, 0.05), DomainError);
  CHECK_THROWS_AS(required_L(0.3, 1.0), DomainError);
  std::size_t prev = SIZE_MAX;
  for (double xi = 0.01; xi < 0.99; xi += 0.01) {
    std::size_t L = required_L(xi, 0.05);
    CHECK(L <= prev);
    prev = L;
  }
  CHECK(samples_for_tolerance(0.5, 2) == 4);
  CHECK(samples_for_tolerance(2.0, 2) == 1);
  CHECK(samples_for_tolerance(0.3, 3) == 14);
}

TEST_CASE("tolerance bound dominates the exact requirement") {
  const double worked = (36.0 * std::exp(0.0) - 1.0) * std::log(20.0);
  CHECK(remark_bound(0.5, 2, 0.05, 0.0) == doctest::Approx(worked));
  CHECK(remark_bound(0.5, 2, 0.05, 0.0) >= 74);
  CHECK(remark_bound(0.5, 2, 1.0, 0.0) == doctest::Approx(0.0));
  Rng rng(2);
  for (double eps : {0.25, 0.5, 1.0, 1.5})
    for (double alpha : {0.01, 0.05, 0.2})
      for (std::size_t k = 2; k <= 4; ++k) {
        std::vector<double> p(k);
        double s = 0;
        for (double& v : p) s += v = 0.1 + rng.uniform();
        for (double& v : p) v /= s;
        const std::size_t m = samples_for_tolerance(eps, k);
        auto q = rounded_target(dist(p), m);
        const double d = kl(q.probs, p);
        const std::size_t L = required_L(xi_bound(q.probs, p, m, k), alpha);
        CAPTURE(eps);
        CAPTURE(k);
        CHECK(remark_bound(eps, k, alpha, d) >= static_cast<double>(L));
      }
}

TEST_CASE("support reduction") {
  auto same = support_reduce(dist({0.4, 0.6}), dist({0.5, 0.5}));
  CHECK(same.eps_prime == 0.0);
  CHECK(same.p.probs == std::vector<double>{0.4, 0.6});
  CHECK(same.kept == std::vector<std::size_t>{0, 1});

  auto red = support_reduce(dist({1.0, 0.0}), dist({0.9, 0.1}));
  CHECK(red.kept == std::vector<std::size_t>{0});
  CHECK(red.p.probs == std::vector<double>{1.0});
  CHECK(red.p_star.probs == std::vector<double>{1.0});
  CHECK(red.eps_prime == doctest::Approx(0.2));

  CHECK_THROWS_AS(support_reduce(dist({0.0, 1.0}), dist({1.0, 0.0})), SupportError);
}

TEST_CASE("certification rates") {
  auto u = dist({0.5, 0.5});
  Rng rng(10);
  const double expected = 1 - std::pow(0.625, 10);
  CHECK(exact_sample_success(u, u, 4, 0.0) == doctest::Approx(0.375));
  CHECK(std::abs(certify(u, u, 4, 10, 0.0, 10000, rng) - expected) <= 0.01);
  Rng r2(11);
  CHECK(certify(u, dist({0.9, 0.1}), 4, 3, 2.0, 500, r2) == 1.0);
}

TEST_CASE("certification meets the guarantee at the required count") {
  auto u = dist({0.5, 0.5});
  const std::size_t m = samples_for_tolerance(0.5, 2);
  const double xi = xi_bound(rounded_target(u, m).probs, u.probs, m, 2);
  const std::size_t L = required_L(xi, 0.05);
  CHECK(m == 4);
  CHECK(L == 74);
  Rng rng(12);
  const std::size_t trials = 10000;
  double rate = certify(u, u, m, L, 0.5, trials, rng);
  // One-sided 99% binomial threshold under success probability 0.95.
  const double threshold = 0.95 - 2.326 * std::sqrt(0.95 * 0.05 / trials);
  CHECK(rate >= threshold);
}

TEST_CASE("certification is monotone under matched randomness") {
  auto p = dist({0.3, 0.5, 0.2});
  auto ps = dist({0.4, 0.4, 0.2});
  double prev = -1;
  for (std::size_t L : {1u, 2u, 4u, 8u, 16u}) {
    Rng rng(33);
    double r = certify(p, ps, 6, L, 0.4, 3000, rng);
    CHECK(r >= prev);
    prev = r;
  }
  prev = -1;
  for (double eps : {0.0, 0.2, 0.4, 0.8, 2.0}) {
    Rng rng(34);
    double r = certify(p, ps, 6, 3, eps, 3000, rng);
    CHECK(r >= prev);
    prev = r;
  }
}

TEST_CASE("envcheck report") {
  auto u = dist({0.5, 0.5});
  auto rep = envcheck(u, u, 0.5, 0.05, 2000, 1);
  CHECK(rep.raw.k == 2);
  CHECK(rep.raw.m == 4);
  CHECK(rep.raw.xi == doctest::Approx(0.04));
  CHECK(rep.raw.L == 74);
  CHECK(rep.raw.rate >= 0.95);
  CHECK_FALSE(rep.reduced_used);

  CHECK(envcheck(u, u, 2.0, 0.05, 500, 1).raw.rate == 1.0);

  auto part = envcheck(dist({0.5, 0.5, 0.0}), dist({0.45, 0.45, 0.1}), 1.0, 0.05, 1000, 2);
  CHECK(part.reduced_used);
  CHECK(part.eps_prime == doctest::Approx(0.2));
  CHECK(part.reduced.eps == doctest::Approx(0.8));
  CHECK(part.reduced.k == 2);
  CHECK(std::isinf(part.raw.kl));

  CHECK_THROWS_AS(envcheck(dist({0.0, 1.0}), dist({1.0, 0.0}), 0.5, 0.05, 10, 3), SupportError);
}
