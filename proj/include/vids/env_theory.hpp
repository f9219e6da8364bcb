#pragma once

// Binned distributions and the method-of-types machinery that bounds how
// many bootstrap environments are needed before one of them lands within
// epsilon (in L1) of a target covariate distribution.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "vids/nn.hpp"
#include "vids/rng.hpp"

namespace vids {

struct BinnedDistribution {
  std::vector<double> probs;

  std::size_t bins() const { return probs.size(); }

  // Throws InputError if a prob is negative or the sum is off by > 1e-12.
  void validate() const;
};

// Per-dimension edges; cell index is mixed-radix with dimension 0 slowest.
// Bins are [e_i, e_{i+1}) except the last, which is closed.
struct Partition {
  std::vector<std::vector<double>> edges;

  std::size_t cells() const;
  // Throws InputError when a coordinate falls outside the edges.
  std::size_t cell(std::span<const double> x) const;
};

Partition equal_width_partition(double lo, double hi, std::size_t bins);

// Equal-width bins over the training range of each column. The per-dimension
// count is lowered until the cell total is at most max_cells.
Partition default_partition(const Matrix& x, std::size_t max_cells = 64);

BinnedDistribution bin_data(std::span<const double> values, const Partition& partition);
BinnedDistribution bin_data(const Matrix& x, const Partition& partition);

// q_i = floor(m p*_i) / m for i < k-1, the remainder on the last bin.
BinnedDistribution rounded_target(const BinnedDistribution& p_star, std::size_t m);

// Natural log. Throws SupportError when q_i > 0 where p_i = 0.
double kl(std::span<const double> q, std::span<const double> p);
double l1(std::span<const double> a, std::span<const double> b);

// (m+1)^-k exp(-m kl(q, p)).
double xi_bound(std::span<const double> q, std::span<const double> p, std::size_t m, std::size_t k);

// ceil(ln alpha / ln(1 - xi)). Throws DomainError outside (0,1).
std::size_t required_L(double xi, double alpha);

// m = ceil(2(k-1)/eps), at least 1.
std::size_t samples_for_tolerance(double eps, std::size_t k);

// ((2(k-1)/eps + 2)^k e^{(2(k-1)/eps + 1) kl} - 1) ln(1/alpha)
double remark_bound(double eps, std::size_t k, double alpha, double kl_qp);

struct SupportReduction {
  std::vector<std::size_t> kept;  // original bin indices
  BinnedDistribution p;
  BinnedDistribution p_star;
  double eps_prime = 0.0;         // L1 from p* to the renormalized reduction
};

// Drops the bins outside supp(p) and renormalizes both distributions.
// Throws SupportError when p* puts no mass on supp(p).
SupportReduction support_reduce(const BinnedDistribution& p, const BinnedDistribution& p_star);

// Fraction of trials in which at least one of L size-m samples from p has an
// empirical distribution within eps of p*. Trial t uses the stream
// derive_seed(base, t) with base drawn once from rng, so the same rng state
// gives nested sample sequences across L.
double certify(const BinnedDistribution& p, const BinnedDistribution& p_star, std::size_t m, std::size_t L,
               double eps, std::size_t trials, Rng& rng);

// Exact probability that a size-m sample from p has type exactly q (q m must
// be integral).
double type_class_probability(std::span<const double> q, std::span<const double> p, std::size_t m);

// Exact probability that one size-m sample from p lands within eps of p*,
// by enumerating all types. Intended for small k and m.
double exact_sample_success(const BinnedDistribution& p, const BinnedDistribution& p_star, std::size_t m,
                            double eps);

struct EnvCheckRow {
  std::size_t k = 0;
  std::size_t m = 0;
  double kl = 0.0;
  double xi = 0.0;
  std::size_t L = 0;
  double rate = 0.0;
  double eps = 0.0;
};

struct EnvCheckReport {
  EnvCheckRow raw;
  bool reduced_used = false;
  EnvCheckRow reduced;
  double eps_prime = 0.0;
};

// m, q, xi and L from (eps, alpha), then certify. If p* leaves supp(p) the
// raw row reports xi = 0 and the reduced row carries the certification at
// tolerance eps - eps'. Throws SupportError for disjoint supports.
EnvCheckReport envcheck(const BinnedDistribution& p, const BinnedDistribution& p_star, double eps, double alpha,
                        std::size_t trials, std::uint64_t seed);

}  // namespace vids
