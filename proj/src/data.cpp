#include "vids/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>

#include "vids/csv.hpp"
#include "vids/error.hpp"

namespace vids {

std::string_view noise_scale_name(NoiseScale s) { return s == NoiseScale::stddev ? "stddev" : "variance"; }

NoiseScale parse_noise_scale(std::string_view name) {
  if (name == "stddev") return NoiseScale::stddev;
  if (name == "variance") return NoiseScale::variance;
  throw ConfigError("unknown noise scale '" + std::string(name) + "' (expected stddev or variance)");
}

DataSplit gen_hetero_linear(double a, double b, double beta, std::size_t n_train, std::size_t n_test,
                            std::uint64_t seed, NoiseScale noise) {
  if (!(a > 0.0 && a < b)) throw InputError("hetero: need 0 < a < b");
  Rng rng(derive_seed(seed, "data"));
  auto draw = [&](double hi, std::size_t n) {
    Dataset d;
    d.task = Task::regression;
    d.x = Matrix(n, 1);
    d.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double x = rng.uniform(0.0, hi);
      const double sd = noise == NoiseScale::stddev ? x / 10.0 : std::sqrt(x / 10.0);
      d.x(i, 0) = x;
      d.y[i] = beta * x + sd * rng.normal();
    }
    return d;
  };
  DataSplit out;
  out.train = draw(a, n_train);
  out.test = draw(b, n_test);
  return out;
}

double sample_arcsine(Rng& rng) {
  const double s = std::sin(std::numbers::pi * rng.uniform() / 2.0);
  return s * s;
}

DataSplit gen_logistic_gap(double t, std::size_t n_train, std::size_t n_test, std::uint64_t seed) {
  if (!(t > 0.0 && t < 0.5)) throw InputError("logistic gap: need 0 < t < 0.5");
  Rng rng(derive_seed(seed, "data"));
  auto draw = [&](std::size_t n, bool gap) {
    Dataset d;
    d.task = Task::classification;
    d.x = Matrix(n, 1);
    d.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      double x = sample_arcsine(rng);
      while (gap && x > t && x < 1.0 - t) x = sample_arcsine(rng);
      d.x(i, 0) = x;
      d.y[i] = rng.uniform() < stable_sigmoid(-5.0 + 10.0 * x) ? 1.0 : 0.0;
    }
    return d;
  };
  DataSplit out;
  out.train = draw(n_train, true);
  out.test = draw(n_test, false);
  return out;
}

LoadedCsv load_csv(std::istream& is, const std::string& target, Task task) {
  const CsvTable table = read_csv(is);
  std::size_t target_col = 0;
  try {
    target_col = table.column(target);
  } catch (const InputError&) {
    throw InputError("target column '" + target + "' not found");
  }
  if (table.rows.empty()) throw InputError("csv has a header but no rows");

  LoadedCsv out;
  std::vector<std::size_t> cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    const bool numeric = parse_double(table.rows[0][c]).has_value();
    if (c == target_col) {
      if (!numeric) throw InputError("target column '" + target + "' is not numeric");
      continue;
    }
    if (!numeric) {
      out.warnings.push_back("dropping non-numeric column '" + table.header[c] + "'");
      continue;
    }
    cols.push_back(c);
    out.covariates.push_back(table.header[c]);
  }

  Dataset& d = out.data;
  d.task = task;
  d.x = Matrix(table.rows.size(), cols.size());
  d.y.resize(table.rows.size());
  auto cell = [&](std::size_t r, std::size_t c) {
    const auto v = parse_double(table.rows[r][c]);
    if (!v)
      throw ParseError("row " + std::to_string(r + 1) + ", column '" + table.header[c] + "': cannot parse '" +
                       table.rows[r][c] + "'");
    return *v;
  };
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    for (std::size_t j = 0; j < cols.size(); ++j) d.x(r, j) = cell(r, cols[j]);
    d.y[r] = cell(r, target_col);
  }
  d.validate();
  return out;
}

LoadedCsv load_csv(const std::string& path, const std::string& target, Task task) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return load_csv(is, target, task);
}

void write_dataset_csv(std::ostream& os, const Dataset& data, const std::vector<std::string>& covariates) {
  std::vector<std::string> header;
  for (std::size_t j = 0; j < data.width(); ++j)
    header.push_back(j < covariates.size() ? covariates[j] : "x" + std::to_string(j));
  header.push_back("y");
  write_csv_row(os, header);
  std::vector<std::string> cells(data.width() + 1);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < data.width(); ++j) cells[j] = format_double(data.x(i, j));
    cells.back() = format_double(data.y[i]);
    write_csv_row(os, cells);
  }
}

void write_dataset_csv(const std::string& path, const Dataset& data, const std::vector<std::string>& covariates) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write '" + path + "'");
  write_dataset_csv(os, data, covariates);
  if (!os) throw IoError("write failed for '" + path + "'");
}

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

Matrix plus_plus_seed(const Matrix& x, std::size_t K, Rng& rng) {
  Matrix c(K, x.cols);
  std::vector<double> d2(x.rows, std::numeric_limits<double>::infinity());
  std::size_t pick = static_cast<std::size_t>(rng.below(x.rows));
  for (std::size_t k = 0; k < K; ++k) {
    std::copy(x.row(pick).begin(), x.row(pick).end(), c.row(k).begin());
    if (k + 1 == K) break;
    double total = 0.0;
    for (std::size_t i = 0; i < x.rows; ++i) {
      d2[i] = std::min(d2[i], sq_dist(x.row(i), c.row(k)));
      total += d2[i];
    }
    if (!(total > 0.0)) {
      pick = static_cast<std::size_t>(rng.below(x.rows));
      continue;
    }
    const double u = rng.uniform() * total;
    double acc = 0.0;
    pick = x.rows - 1;
    for (std::size_t i = 0; i < x.rows; ++i) {
      acc += d2[i];
      if (u < acc && d2[i] > 0.0) {
        pick = i;
        break;
      }
    }
  }
  return c;
}

std::size_t nearest(const Matrix& c, std::span<const double> v) {
  std::size_t best = 0;
  double best_d = sq_dist(c.row(0), v);
  for (std::size_t k = 1; k < c.rows; ++k) {
    const double d = sq_dist(c.row(k), v);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

}  // namespace

KMeansResult kmeans(const Matrix& x, std::size_t K, Rng& rng, std::size_t max_iter) {
  if (K < 1) throw InputError("kmeans: K must be at least 1");
  if (x.rows < K) throw InputError("kmeans: fewer rows than clusters");
  constexpr std::size_t kMaxReseeds = 10;
  for (std::size_t attempt = 0; attempt <= kMaxReseeds; ++attempt) {
    KMeansResult r;
    r.reseeds = attempt;
    r.centroids = plus_plus_seed(x, K, rng);
    r.assignment.assign(x.rows, 0);
    bool empty = false;
    for (std::size_t it = 0; it < max_iter; ++it) {
      bool changed = it == 0;
      for (std::size_t i = 0; i < x.rows; ++i) {
        const std::size_t k = nearest(r.centroids, x.row(i));
        if (k != r.assignment[i]) changed = true;
        r.assignment[i] = k;
      }
      r.iterations = it + 1;
      if (!changed) break;
      Matrix sums(K, x.cols);
      std::vector<std::size_t> counts(K, 0);
      for (std::size_t i = 0; i < x.rows; ++i) {
        ++counts[r.assignment[i]];
        auto s = sums.row(r.assignment[i]);
        auto v = x.row(i);
        for (std::size_t j = 0; j < x.cols; ++j) s[j] += v[j];
      }
      if (std::find(counts.begin(), counts.end(), 0) != counts.end()) {
        empty = true;
        break;
      }
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t j = 0; j < x.cols; ++j) r.centroids(k, j) = sums(k, j) / static_cast<double>(counts[k]);
    }
    if (!empty) return r;
  }
  throw InputError("kmeans: empty cluster persisted after 10 reseeds");
}

void SplitSpec::validate() const {
  if (K < 2) throw InputError("split: K must be at least 2 (the majority ratio is undefined for one cluster)");
  if (!(train_majority_ratio > 0.5 && train_majority_ratio <= 1.0))
    throw InputError("split: train_majority_ratio must lie in (0.5, 1]");
}

ShiftSplit kmeans_shift_split(const Dataset& data, const SplitSpec& spec) {
  spec.validate();
  data.validate();
  if (data.size() < 2 * spec.K) throw InputError("split: need at least 2K rows");

  Rng rng(derive_seed(spec.seed, "split"));
  const KMeansResult km = kmeans(data.x, spec.K, rng);

  ShiftSplit out;
  out.assignment = km.assignment;
  out.spread.assign(spec.K, 0.0);
  std::vector<std::size_t> counts(spec.K, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::size_t k = km.assignment[i];
    out.spread[k] += std::sqrt(sq_dist(data.x.row(i), km.centroids.row(k)));
    ++counts[k];
  }
  for (std::size_t k = 0; k < spec.K; ++k) out.spread[k] /= static_cast<double>(counts[k]);
  out.high_cluster = static_cast<std::size_t>(std::max_element(out.spread.begin(), out.spread.end()) -
                                              out.spread.begin());

  std::vector<std::size_t> high, low;
  for (std::size_t i = 0; i < data.size(); ++i) (km.assignment[i] == out.high_cluster ? high : low).push_back(i);
  auto shuffle = [&](std::vector<std::size_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(rng.below(i))]);
  };
  shuffle(high);
  shuffle(low);

  const double ratio = spec.train_majority_ratio;
  double n_train = static_cast<double>(spec.train_size ? spec.train_size : std::min(high.size(), low.size()));
  double n_test = static_cast<double>(spec.test_size ? spec.test_size : std::min(high.size(), low.size()));
  const double need_high = ratio * n_train + (1.0 - ratio) * n_test;
  const double need_low = (1.0 - ratio) * n_train + ratio * n_test;
  const double shrink = std::min({1.0, static_cast<double>(high.size()) / need_high,
                                  static_cast<double>(low.size()) / need_low});
  n_train = std::floor(n_train * shrink + 1e-9);
  n_test = std::floor(n_test * shrink + 1e-9);

  auto take = [](double n, double frac) { return static_cast<std::size_t>(std::llround(n * frac)); };
  out.train_from_high = std::min(take(n_train, ratio), high.size());
  std::size_t train_from_low = std::min(static_cast<std::size_t>(n_train) - out.train_from_high, low.size());
  std::size_t test_from_low = std::min(take(n_test, ratio), low.size() - train_from_low);
  out.test_from_high =
      std::min(static_cast<std::size_t>(n_test) - test_from_low, high.size() - out.train_from_high);

  out.train_rows.assign(high.begin(), high.begin() + static_cast<std::ptrdiff_t>(out.train_from_high));
  out.train_rows.insert(out.train_rows.end(), low.begin(), low.begin() + static_cast<std::ptrdiff_t>(train_from_low));
  out.test_rows.assign(low.begin() + static_cast<std::ptrdiff_t>(train_from_low),
                       low.begin() + static_cast<std::ptrdiff_t>(train_from_low + test_from_low));
  out.test_rows.insert(out.test_rows.end(), high.begin() + static_cast<std::ptrdiff_t>(out.train_from_high),
                       high.begin() + static_cast<std::ptrdiff_t>(out.train_from_high + out.test_from_high));
  std::sort(out.train_rows.begin(), out.train_rows.end());
  std::sort(out.test_rows.begin(), out.test_rows.end());
  if (out.train_rows.empty() || out.test_rows.empty()) throw InputError("split: clusters too small for a split");
  out.train = data.subset(out.train_rows);
  out.test = data.subset(out.test_rows);
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) throw InputError("median of an empty column");
  const std::size_t h = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), v.end());
  const double upper = v[h];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h));
  return 0.5 * (lower + upper);
}

namespace {

ColumnTransform fit_column(const std::vector<double>& v, const std::string& name, std::vector<std::string>& warnings) {
  ColumnTransform t;
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double e : v) ss += (e - mean) * (e - mean);
  const double sd = std::sqrt(ss / n);
  if (!(sd > 0.0)) {
    t.passthrough = true;
    warnings.push_back("column '" + name + "' is constant on the training set; left unchanged");
    return t;
  }
  t.center = median(v);
  t.scale = sd;
  return t;
}

}  // namespace

Dataset Standardizer::apply(const Dataset& d) const {
  if (d.width() != x.size()) throw DimensionError("standardizer: width mismatch");
  Dataset out = d;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d.width(); ++j) out.x(i, j) = x[j].apply(d.x(i, j));
  if (d.task == Task::regression)
    for (double& v : out.y) v = y.apply(v);
  return out;
}

Dataset Standardizer::invert(const Dataset& d) const {
  if (d.width() != x.size()) throw DimensionError("standardizer: width mismatch");
  Dataset out = d;
  for (std::size_t i = 0; i < d.size(); ++i)
    for (std::size_t j = 0; j < d.width(); ++j) out.x(i, j) = x[j].invert(d.x(i, j));
  if (d.task == Task::regression)
    for (double& v : out.y) v = y.invert(v);
  return out;
}

Standardized standardize(const Dataset& train, const Dataset& test) {
  train.validate();
  if (test.width() != train.width()) throw DimensionError("standardize: train and test widths differ");
  Standardized out;
  std::vector<double> col(train.size());
  for (std::size_t j = 0; j < train.width(); ++j) {
    for (std::size_t i = 0; i < train.size(); ++i) col[i] = train.x(i, j);
    out.transform.x.push_back(fit_column(col, "x" + std::to_string(j), out.warnings));
  }
  if (train.task == Task::regression)
    out.transform.y = fit_column(train.y, "y", out.warnings);
  else
    out.transform.y.passthrough = true;
  out.train = out.transform.apply(train);
  out.test = out.transform.apply(test);
  return out;
}

}  // namespace vids
