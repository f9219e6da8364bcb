#include "vids/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>

#include "vids/csv.hpp"
#include "vids/error.hpp"

namespace vids {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size())
    throw DimensionError(std::string(what) + ": " + std::to_string(a.size()) + " predictions for " +
                         std::to_string(b.size()) + " targets");
  if (a.empty()) throw InputError(std::string(what) + ": no predictions");
}

}  // namespace

double rmse(std::span<const double> preds, std::span<const double> targets) {
  check_pair(preds, targets, "rmse");
  double acc = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) acc += (preds[i] - targets[i]) * (preds[i] - targets[i]);
  return std::sqrt(acc / static_cast<double>(preds.size()));
}

double accuracy(std::span<const double> probs, std::span<const double> labels, double threshold) {
  check_pair(probs, labels, "accuracy");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double pred = probs[i] >= threshold ? 1.0 : 0.0;
    if (pred == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(probs.size());
}

double ace(std::span<const double> probs, std::span<const double> labels, std::size_t R) {
  check_pair(probs, labels, "ace");
  if (R < 1) throw InputError("ace: R must be at least 1");
  const std::size_t n = probs.size();
  if (n < R) throw InputError("ace: fewer predictions than bins");
  std::vector<double> conf(n);
  for (std::size_t i = 0; i < n; ++i) conf[i] = std::max(probs[i], 1.0 - probs[i]);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return conf[a] < conf[b]; });

  double total = 0.0;
  std::size_t start = 0;
  for (std::size_t b = 0; b < R; ++b) {
    const std::size_t size = n / R + (b < n % R ? 1 : 0);
    double acc = 0.0, c = 0.0;
    for (std::size_t j = start; j < start + size; ++j) {
      const std::size_t i = order[j];
      const double pred = probs[i] >= 0.5 ? 1.0 : 0.0;
      acc += pred == labels[i] ? 1.0 : 0.0;
      c += conf[i];
    }
    total += std::abs(acc - c) / static_cast<double>(size);
    start += size;
  }
  return total / static_cast<double>(R);
}

double spread_profile(std::span<const double> stds, std::span<const double> x, const RegionPredicate& in_a,
                      const RegionPredicate& in_b) {
  check_pair(stds, x, "spread_profile");
  double sa = 0.0, sb = 0.0;
  std::size_t na = 0, nb = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (in_a(x[i])) {
      sa += stds[i];
      ++na;
    }
    if (in_b(x[i])) {
      sb += stds[i];
      ++nb;
    }
  }
  if (na == 0 || nb == 0) throw InputError("spread_profile: empty region");
  return (sa / static_cast<double>(na)) / (sb / static_cast<double>(nb));
}

std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  check_pair(a, b, "spearman");
  const std::vector<double> ra = average_ranks(a), rb = average_ranks(b);
  const double ma = mean(ra), mb = mean(rb);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

double mean(std::span<const double> v) {
  if (v.empty()) throw InputError("mean of an empty set");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double standard_error(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0.0;
  for (double e : v) ss += (e - m) * (e - m);
  const double n = static_cast<double>(v.size());
  return std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
}

double median_of(std::span<const double> v) {
  if (v.empty()) throw InputError("median of an empty set");
  std::vector<double> s(v.begin(), v.end());
  std::sort(s.begin(), s.end());
  const std::size_t h = s.size() / 2;
  return s.size() % 2 ? s[h] : 0.5 * (s[h - 1] + s[h]);
}

MetricRow summarize(const std::string& metric, std::span<const double> per_seed) {
  return MetricRow{metric, mean(per_seed), standard_error(per_seed), per_seed.size()};
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricRow>& rows) {
  write_csv_row(os, {"metric", "value", "stderr", "n_seeds"});
  for (const MetricRow& r : rows)
    write_csv_row(os, {r.metric, format_double(r.value), format_double(r.stderr_), std::to_string(r.n_seeds)});
}

std::vector<MetricRow> read_metrics_csv(std::istream& is) {
  const CsvTable t = read_csv(is);
  const std::size_t cm = t.column("metric"), cv = t.column("value"), cs = t.column("stderr"),
                    cn = t.column("n_seeds");
  std::vector<MetricRow> out;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto v = parse_double(t.rows[r][cv]);
    const auto s = parse_double(t.rows[r][cs]);
    const auto n = parse_double(t.rows[r][cn]);
    if (!v || !s || !n) throw ParseError("metrics row " + std::to_string(r + 1) + ": bad number");
    out.push_back(MetricRow{t.rows[r][cm], *v, *s, static_cast<std::size_t>(*n)});
  }
  return out;
}

}  // namespace vids
