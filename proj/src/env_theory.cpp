#include "vids/env_theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "vids/error.hpp"

namespace vids {

void BinnedDistribution::validate() const {
  if (probs.empty()) throw InputError("binned distribution has no bins");
  double total = 0.0;
  for (double v : probs) {
    if (!(v >= 0.0)) throw InputError("binned distribution has a negative probability");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) throw InputError("binned distribution sums to " + std::to_string(total));
}

std::size_t Partition::cells() const {
  if (edges.empty()) return 0;
  std::size_t n = 1;
  for (const auto& e : edges) n *= e.size() - 1;
  return n;
}

std::size_t Partition::cell(std::span<const double> x) const {
  if (x.size() != edges.size()) throw DimensionError("partition: point has the wrong dimension");
  std::size_t idx = 0;
  for (std::size_t d = 0; d < edges.size(); ++d) {
    const auto& e = edges[d];
    const double v = x[d];
    if (!(v >= e.front() && v <= e.back()))
      throw InputError("value " + std::to_string(v) + " outside the partition in dimension " + std::to_string(d));
    std::size_t b = static_cast<std::size_t>(std::upper_bound(e.begin(), e.end(), v) - e.begin()) - 1;
    b = std::min(b, e.size() - 2);
    idx = idx * (e.size() - 1) + b;
  }
  return idx;
}

Partition equal_width_partition(double lo, double hi, std::size_t bins) {
  if (bins < 1 || !(hi > lo)) throw InputError("partition: need bins >= 1 and hi > lo");
  std::vector<double> e(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) e[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  e.back() = hi;
  return Partition{{std::move(e)}};
}

Partition default_partition(const Matrix& x, std::size_t max_cells) {
  if (x.rows == 0 || x.cols == 0) throw InputError("partition: empty data");
  std::size_t per_dim = max_cells;
  while (per_dim > 1) {
    double total = 1.0;
    for (std::size_t d = 0; d < x.cols; ++d) total *= static_cast<double>(per_dim);
    if (total <= static_cast<double>(max_cells)) break;
    --per_dim;
  }
  Partition p;
  for (std::size_t d = 0; d < x.cols; ++d) {
    double lo = x(0, d), hi = x(0, d);
    for (std::size_t i = 1; i < x.rows; ++i) {
      lo = std::min(lo, x(i, d));
      hi = std::max(hi, x(i, d));
    }
    if (hi == lo) {
      p.edges.push_back({lo, hi});
      continue;
    }
    p.edges.push_back(equal_width_partition(lo, hi, per_dim).edges.front());
  }
  return p;
}

BinnedDistribution bin_data(std::span<const double> values, const Partition& partition) {
  if (partition.edges.size() != 1) throw DimensionError("bin_data: scalar values need a one-dimensional partition");
  Matrix x(values.size(), 1);
  std::copy(values.begin(), values.end(), x.data.begin());
  return bin_data(x, partition);
}

BinnedDistribution bin_data(const Matrix& x, const Partition& partition) {
  if (x.rows == 0) throw InputError("bin_data: no values");
  BinnedDistribution out;
  out.probs.assign(partition.cells(), 0.0);
  std::vector<std::size_t> counts(partition.cells(), 0);
  for (std::size_t i = 0; i < x.rows; ++i) ++counts[partition.cell(x.row(i))];
  for (std::size_t b = 0; b < counts.size(); ++b)
    out.probs[b] = static_cast<double>(counts[b]) / static_cast<double>(x.rows);
  return out;
}

BinnedDistribution rounded_target(const BinnedDistribution& p_star, std::size_t m) {
  if (m < 1) throw DomainError("rounded_target: m must be at least 1");
  const std::size_t k = p_star.bins();
  BinnedDistribution q;
  q.probs.resize(k);
  std::size_t used = 0;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    // the slack absorbs products like 0.29 * 100 = 28.999999999999996
    const auto c = static_cast<std::size_t>(std::floor(static_cast<double>(m) * p_star.probs[i] + 1e-9));
    q.probs[i] = static_cast<double>(c) / static_cast<double>(m);
    used += c;
  }
  q.probs[k - 1] = static_cast<double>(m - std::min(used, m)) / static_cast<double>(m);
  return q;
}

double kl(std::span<const double> q, std::span<const double> p) {
  if (q.size() != p.size()) throw DimensionError("kl: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (q[i] <= 0.0) continue;
    if (p[i] <= 0.0) throw SupportError("kl: q has mass on bin " + std::to_string(i) + " outside supp(p)");
    acc += q[i] * std::log(q[i] / p[i]);
  }
  return acc;
}

double l1(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DimensionError("l1: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc;
}

double xi_bound(std::span<const double> q, std::span<const double> p, std::size_t m, std::size_t k) {
  const double md = static_cast<double>(m);
  return std::exp(-static_cast<double>(k) * std::log(md + 1.0) - md * kl(q, p));
}

std::size_t required_L(double xi, double alpha) {
  if (!(xi > 0.0 && xi < 1.0)) throw DomainError("required_L: xi must lie in (0, 1)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("required_L: alpha must lie in (0, 1)");
  const double ratio = std::log(alpha) / std::log1p(-xi);
  return static_cast<std::size_t>(std::max(1.0, std::ceil(ratio - 1e-12)));
}

std::size_t samples_for_tolerance(double eps, std::size_t k) {
  if (!(eps > 0.0)) throw DomainError("tolerance must be positive");
  const double m = std::ceil(2.0 * static_cast<double>(k - 1) / eps - 1e-12);
  return static_cast<std::size_t>(std::max(1.0, m));
}

double remark_bound(double eps, std::size_t k, double alpha, double kl_qp) {
  if (!(eps > 0.0)) throw DomainError("remark_bound: eps must be positive");
  const double a = 2.0 * static_cast<double>(k - 1) / eps;
  return (std::pow(a + 2.0, static_cast<double>(k)) * std::exp((a + 1.0) * kl_qp) - 1.0) * std::log(1.0 / alpha);
}

SupportReduction support_reduce(const BinnedDistribution& p, const BinnedDistribution& p_star) {
  if (p.bins() != p_star.bins()) throw DimensionError("support_reduce: bin counts differ");
  SupportReduction r;
  double mass_p = 0.0, mass_star = 0.0;
  for (std::size_t i = 0; i < p.bins(); ++i) {
    if (p.probs[i] > 0.0) {
      r.kept.push_back(i);
      mass_p += p.probs[i];
      mass_star += p_star.probs[i];
    }
  }
  if (!(mass_star > 0.0)) throw SupportError("irreducible: p* has no mass on the support of p");
  std::vector<double> embedded(p.bins(), 0.0);
  for (std::size_t i : r.kept) {
    r.p.probs.push_back(p.probs[i] / mass_p);
    r.p_star.probs.push_back(p_star.probs[i] / mass_star);
    embedded[i] = r.p_star.probs.back();
  }
  r.eps_prime = l1(p_star.probs, embedded);
  return r;
}

namespace {

std::vector<double> cumulative(const BinnedDistribution& p) {
  std::vector<double> c(p.bins());
  std::partial_sum(p.probs.begin(), p.probs.end(), c.begin());
  return c;
}

std::size_t draw_bin(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform() * cdf.back();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  std::size_t b = static_cast<std::size_t>(it - cdf.begin());
  b = std::min(b, cdf.size() - 1);
  // never land on an empty bin through rounding at the top of the cdf
  while (b > 0 && cdf[b] == cdf[b - 1]) --b;
  return b;
}

double log_multinomial(const std::vector<std::size_t>& counts) {
  std::size_t m = 0;
  double acc = 0.0;
  for (std::size_t c : counts) {
    m += c;
    acc -= std::lgamma(static_cast<double>(c) + 1.0);
  }
  return acc + std::lgamma(static_cast<double>(m) + 1.0);
}

template <class F>
void for_each_type(std::size_t k, std::size_t m, F&& f) {
  std::vector<std::size_t> counts(k, 0);
  auto rec = [&](auto& self, std::size_t i, std::size_t left) -> void {
    if (i + 1 == k) {
      counts[i] = left;
      f(counts);
      return;
    }
    for (std::size_t c = 0; c <= left; ++c) {
      counts[i] = c;
      self(self, i + 1, left - c);
    }
  };
  rec(rec, 0, m);
}

double type_probability(const std::vector<std::size_t>& counts, std::span<const double> p) {
  double log_prob = log_multinomial(counts);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] == 0) continue;
    if (p[i] <= 0.0) return 0.0;
    log_prob += static_cast<double>(counts[i]) * std::log(p[i]);
  }
  return std::exp(log_prob);
}

constexpr double kTolSlack = 1e-12;

}  // namespace

double certify(const BinnedDistribution& p, const BinnedDistribution& p_star, std::size_t m, std::size_t L,
               double eps, std::size_t trials, Rng& rng) {
  if (trials < 1) throw DomainError("certify: trials must be at least 1");
  if (m < 1 || L < 1) throw DomainError("certify: m and L must be at least 1");
  if (p.bins() != p_star.bins()) throw DimensionError("certify: bin counts differ");
  const std::vector<double> cdf = cumulative(p);
  const std::uint64_t base = rng.next_u64();
  const std::size_t k = p.bins();
  std::vector<std::size_t> counts(k);
  std::vector<double> emp(k);
  std::size_t successes = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng trial(derive_seed(base, static_cast<std::uint64_t>(t)));
    for (std::size_t l = 0; l < L; ++l) {
      std::fill(counts.begin(), counts.end(), 0);
      for (std::size_t s = 0; s < m; ++s) ++counts[draw_bin(cdf, trial)];
      for (std::size_t i = 0; i < k; ++i) emp[i] = static_cast<double>(counts[i]) / static_cast<double>(m);
      if (l1(emp, p_star.probs) <= eps + kTolSlack) {
        ++successes;
        break;
      }
    }
  }
  return static_cast<double>(successes) / static_cast<double>(trials);
}

double type_class_probability(std::span<const double> q, std::span<const double> p, std::size_t m) {
  if (q.size() != p.size()) throw DimensionError("type_class_probability: length mismatch");
  std::vector<std::size_t> counts(q.size());
  std::size_t total = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double c = q[i] * static_cast<double>(m);
    const double r = std::round(c);
    if (std::abs(c - r) > 1e-9 || r < 0.0) throw DomainError("type_class_probability: m q is not integral");
    counts[i] = static_cast<std::size_t>(r);
    total += counts[i];
  }
  if (total != m) throw DomainError("type_class_probability: counts do not sum to m");
  return type_probability(counts, p);
}

double exact_sample_success(const BinnedDistribution& p, const BinnedDistribution& p_star, std::size_t m,
                            double eps) {
  if (p.bins() != p_star.bins()) throw DimensionError("exact_sample_success: bin counts differ");
  const std::size_t k = p.bins();
  std::vector<double> emp(k);
  double total = 0.0;
  for_each_type(k, m, [&](const std::vector<std::size_t>& counts) {
    for (std::size_t i = 0; i < k; ++i) emp[i] = static_cast<double>(counts[i]) / static_cast<double>(m);
    if (l1(emp, p_star.probs) <= eps + kTolSlack) total += type_probability(counts, p.probs);
  });
  return total;
}

namespace {

EnvCheckRow check_row(const BinnedDistribution& p, const BinnedDistribution& p_star, double eps, double alpha,
                      std::size_t trials, Rng& rng) {
  EnvCheckRow row;
  row.k = p.bins();
  row.eps = eps;
  row.m = samples_for_tolerance(eps, row.k);
  const BinnedDistribution q = rounded_target(p_star, row.m);
  row.kl = kl(q.probs, p.probs);
  row.xi = xi_bound(q.probs, p.probs, row.m, row.k);
  row.L = row.xi < 1.0 ? required_L(row.xi, alpha) : 1;
  row.rate = certify(p, p_star, row.m, row.L, eps, trials, rng);
  return row;
}

}  // namespace

EnvCheckReport envcheck(const BinnedDistribution& p, const BinnedDistribution& p_star, double eps, double alpha,
                        std::size_t trials, std::uint64_t seed) {
  p.validate();
  p_star.validate();
  if (p.bins() != p_star.bins()) throw DimensionError("envcheck: bin counts differ");
  Rng rng(derive_seed(seed, "certify"));
  EnvCheckReport report;
  const SupportReduction red = support_reduce(p, p_star);
  if (red.eps_prime == 0.0) {
    report.raw = check_row(p, p_star, eps, alpha, trials, rng);
    return report;
  }
  report.raw.k = p.bins();
  report.raw.eps = eps;
  report.raw.m = samples_for_tolerance(eps, p.bins());
  report.raw.kl = std::numeric_limits<double>::infinity();
  report.raw.xi = 0.0;
  report.reduced_used = true;
  report.eps_prime = red.eps_prime;
  const double eps_left = eps - red.eps_prime;
  if (!(eps_left > 0.0))
    throw SupportError("irreducible: discarded mass " + std::to_string(red.eps_prime) + " exceeds tolerance " +
                       std::to_string(eps));
  report.reduced = check_row(red.p, red.p_star, eps_left, alpha, trials, rng);
  // raw mode has no bound of its own; run it at the reduced L for comparison
  report.raw.L = report.reduced.L;
  report.raw.rate = certify(p, p_star, report.raw.m, report.raw.L, eps, trials, rng);
  return report;
}

}  // namespace vids
