#pragma once

// Synthetic generators, CSV ingestion, the K-means covariate-shift split and
// median/std standardization.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vids/model.hpp"
#include "vids/rng.hpp"

namespace vids {

struct DataSplit {
  Dataset train;
  Dataset test;
};

// How the heteroscedastic noise scale x/10 is read.
enum class NoiseScale { stddev, variance };

std::string_view noise_scale_name(NoiseScale s);
NoiseScale parse_noise_scale(std::string_view name);

// train x ~ U[0,a], test x ~ U[0,b], y = beta x + e, e ~ N(0, x/10).
// Throws InputError unless 0 < a < b.
DataSplit gen_hetero_linear(double a, double b, double beta, std::size_t n_train, std::size_t n_test,
                            std::uint64_t seed, NoiseScale noise = NoiseScale::stddev);

// x ~ Beta(1/2, 1/2), y ~ Bernoulli(sigmoid(-5 + 10 x)). Train rows with x in
// (t, 1-t) are rejected and redrawn; test rows are not filtered.
DataSplit gen_logistic_gap(double t, std::size_t n_train, std::size_t n_test, std::uint64_t seed);

// Arcsine law by inverse cdf: sin^2(pi u / 2).
double sample_arcsine(Rng& rng);

struct LoadedCsv {
  Dataset data;
  std::vector<std::string> covariates;
  std::vector<std::string> warnings;
};

// A column is numeric when its first data cell parses; any later cell that
// does not parse is a ParseError naming the row (1-based, header excluded).
LoadedCsv load_csv(const std::string& path, const std::string& target, Task task = Task::regression);
LoadedCsv load_csv(std::istream& is, const std::string& target, Task task = Task::regression);

void write_dataset_csv(std::ostream& os, const Dataset& data, const std::vector<std::string>& covariates = {});
void write_dataset_csv(const std::string& path, const Dataset& data,
                       const std::vector<std::string>& covariates = {});

struct KMeansResult {
  Matrix centroids;
  std::vector<std::size_t> assignment;
  std::size_t iterations = 0;
  std::size_t reseeds = 0;
};

// k-means++ seeding, Lloyd iterations (at most max_iter), ties to the lowest
// centroid index. An empty cluster triggers a reseed; after 10 reseeds it is
// an InputError.
KMeansResult kmeans(const Matrix& x, std::size_t K, Rng& rng, std::size_t max_iter = 100);

struct SplitSpec {
  std::size_t K = 2;
  double train_majority_ratio = 0.9;
  std::size_t train_size = 0;  // 0: the smaller of the two pools
  std::size_t test_size = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ShiftSplit {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  std::vector<std::size_t> assignment;
  std::size_t high_cluster = 0;
  std::vector<double> spread;  // mean distance to centroid per cluster
  std::size_t train_from_high = 0;
  std::size_t test_from_high = 0;
};

// The cluster with the largest mean within-cluster distance is the majority
// of the training set; every other cluster is pooled as the minority.
ShiftSplit kmeans_shift_split(const Dataset& data, const SplitSpec& spec);

struct ColumnTransform {
  double center = 0.0;
  double scale = 1.0;
  bool passthrough = false;

  double apply(double v) const { return passthrough ? v : (v - center) / scale; }
  double invert(double v) const { return passthrough ? v : v * scale + center; }
};

struct Standardizer {
  std::vector<ColumnTransform> x;
  ColumnTransform y;

  Dataset apply(const Dataset& d) const;
  Dataset invert(const Dataset& d) const;
};

struct Standardized {
  Dataset train;
  Dataset test;
  Standardizer transform;
  std::vector<std::string> warnings;
};

double median(std::vector<double> v);

// (v - train median) / train population std for every covariate and, for
// regression, the target. Constant train columns pass through.
Standardized standardize(const Dataset& train, const Dataset& test);

}  // namespace vids
