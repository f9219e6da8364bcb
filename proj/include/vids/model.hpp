#pragma once

// Embedding network g, affine prediction head f_theta, the likelihoods and
// maximum-likelihood pretraining of (g, head).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "vids/nn.hpp"

namespace vids {

enum class Task { regression, classification };

std::string_view task_name(Task t);
Task parse_task(std::string_view name);

struct Dataset {
  Matrix x;
  std::vector<double> y;
  Task task = Task::regression;

  std::size_t size() const { return x.rows; }
  std::size_t width() const { return x.cols; }

  // Throws InputError: empty, y length mismatch, or labels outside {0,1}.
  void validate() const;

  Dataset subset(std::span<const std::size_t> rows) const;
};

// Head parameters: k weights followed by the bias.
struct HeadParams {
  std::vector<double> values;

  std::size_t embed_width() const { return values.empty() ? 0 : values.size() - 1; }
  bool operator==(const HeadParams&) const = default;
};

// f_theta(z) = w . z + b for theta = (w, b).
double head_output(std::span<const double> theta, std::span<const double> embed);

double stable_sigmoid(double v);
double softplus(double v);

// Unit-variance Gaussian at mean `output` (regression) or Bernoulli with
// logit `output` (classification). Throws InputError for a label not in {0,1}.
double log_lik(double y, double output, Task task);

// d log_lik / d output.
double log_lik_grad(double y, double output, Task task);

struct EmbeddingModel {
  DenseNet g;

  std::size_t input_width() const { return g.input_width(); }
  std::size_t width() const { return g.output_width(); }
};

std::vector<double> embed(const EmbeddingModel& model, std::span<const double> x);
Matrix embed_all(const EmbeddingModel& model, const Matrix& x);

// Coordinate-wise mean. Summands are reduced in lexicographic order of their
// values, so any permutation of the rows gives identical bits.
// Throws InputError on an empty set.
std::vector<double> aggregate(const Matrix& embeddings);
std::vector<double> aggregate(const Matrix& embeddings, std::span<const std::size_t> rows);

struct PretrainConfig {
  std::vector<std::size_t> hidden{8};  // hidden widths; the last one is k
  Activation activation = Activation::relu;  // identity gives a linear embedding
  std::size_t epochs = 2000;
  double lr = 0.05;
  std::uint64_t seed = 0;
};

struct PretrainResult {
  EmbeddingModel embedding;
  HeadParams head;
  std::vector<double> mean_loglik;  // per epoch, before the update
};

// Full-batch gradient ascent on the mean log-likelihood of (g, head) jointly.
// Throws DivergenceError if the objective becomes non-finite.
PretrainResult pretrain_embedding(const Dataset& data, const PretrainConfig& cfg);

// Design matrix rows (g(x_i), 1) so that a head output is one dot product.
Matrix design_matrix(const Matrix& embeddings);

}  // namespace vids
