#pragma once

// Point-prediction and calibration scores, predictive-spread summaries and
// the metrics report.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace vids {

// Throws DimensionError on length mismatch, InputError when empty.
double rmse(std::span<const double> preds, std::span<const double> targets);

// Predicted class is 1 iff prob >= threshold.
double accuracy(std::span<const double> probs, std::span<const double> labels, double threshold = 0.5);

// Adaptive calibration error: rows sorted by confidence max(p, 1-p) (stable)
// and cut into R nearly equal-count bins, the first N mod R bins one larger.
// ACE = (1/R) sum_b |acc_b - conf_b|. Requires N >= R >= 1.
double ace(std::span<const double> probs, std::span<const double> labels, std::size_t R = 10);

using RegionPredicate = std::function<bool(double)>;

// mean(std | in_a(x)) / mean(std | in_b(x)). Throws InputError if a region
// is empty.
double spread_profile(std::span<const double> stds, std::span<const double> x, const RegionPredicate& in_a,
                      const RegionPredicate& in_b);

// Ranks start at 1; ties share their average rank.
std::vector<double> average_ranks(std::span<const double> v);

// Pearson correlation of the average ranks. NaN when either side is constant.
double spearman(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> v);
// Sample std / sqrt(n); 0 for a single value.
double standard_error(std::span<const double> v);
double median_of(std::span<const double> v);

struct MetricRow {
  std::string metric;
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t n_seeds = 1;
};

MetricRow summarize(const std::string& metric, std::span<const double> per_seed);

// Header metric,value,stderr,n_seeds.
void write_metrics_csv(std::ostream& os, const std::vector<MetricRow>& rows);
std::vector<MetricRow> read_metrics_csv(std::istream& is);

}  // namespace vids
