#pragma once

// Dense-network substrate: row-major matrices, fully connected layers with
// hand-derived backpropagation, a finite-difference gradient checker and a
// plain gradient step. All arithmetic is double precision.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vids/rng.hpp"

namespace vids {

struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

  bool operator==(const Matrix&) const = default;
};

enum class Activation { identity, relu, sigmoid };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation act = Activation::identity;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;     // out

  bool operator==(const Layer&) const = default;
};

class DenseNet {
 public:
  DenseNet() = default;
  // Throws DimensionError unless consecutive shapes chain.
  explicit DenseNet(std::vector<Layer> layers);

  // widths has one more entry than acts. Weights ~ U(-s, s) with
  // s = sqrt(6 / (in + out)); biases zero.
  static DenseNet random(std::span<const std::size_t> widths,
                         std::span<const Activation> acts, Rng& rng);
  static DenseNet zeros(std::span<const std::size_t> widths,
                        std::span<const Activation> acts);

  std::size_t input_width() const;
  std::size_t output_width() const;
  std::size_t param_count() const;
  bool empty() const { return layers_.empty(); }

  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  std::vector<double> forward(std::span<const double> x) const;
  Matrix forward(const Matrix& x) const;

  // Flat view over parameters: per layer, weights then bias.
  double& param(std::size_t flat_index);
  double param(std::size_t flat_index) const;

  bool operator==(const DenseNet&) const = default;

 private:
  std::vector<Layer> layers_;
};

// Per-parameter partial derivatives, shape-congruent with a DenseNet.
struct GradientTape {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  static GradientTape zeros_like(const DenseNet& net);
  bool congruent_with(const DenseNet& net) const;
  double& at(std::size_t flat_index);
  double at(std::size_t flat_index) const;
  std::size_t size() const;
  void add(const GradientTape& other, double scale = 1.0);
  void scale(double s);
  double norm() const;
};

struct ForwardCache {
  std::vector<Matrix> pre;   // pre-activation per layer
  std::vector<Matrix> post;  // post[0] is the input, post[l + 1] the output of layer l
};

const Matrix& forward_cached(const DenseNet& net, const Matrix& x, ForwardCache& cache);

// Accumulates dL/dparams into tape given dL/d(outputs). Relu uses the
// subgradient 0 at 0. If d_input is non-null it receives dL/d(inputs).
void backward(const DenseNet& net, const ForwardCache& cache, const Matrix& d_out,
              GradientTape& tape, Matrix* d_input = nullptr);

// Scalar objective of a batch of network outputs. When d_outputs is non-null
// it must be filled with the gradient (same shape as outputs).
using OutputObjective = std::function<double(const Matrix& outputs, Matrix* d_outputs)>;

struct GradResult {
  double value = 0.0;
  GradientTape tape;
};

GradResult grad(const DenseNet& net, const Matrix& inputs, const OutputObjective& objective);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // parameters whose +-eps probe crosses a relu kink
};

// Central differences per parameter; error is |g_ad - g_fd| / max(1, |g_fd|).
GradCheckReport check_gradients(const DenseNet& net, const Matrix& inputs,
                                const OutputObjective& objective, double eps = 1e-5);

enum class StepDirection { ascent, descent };

void sgd_step(DenseNet& net, const GradientTape& tape, double lr, StepDirection dir);

// Checkpoint: text table, one token per value, floats in hexadecimal so the
// round trip is bit-exact.
//
//   vids-densenet 1
//   layers <count>
//   layer <in> <out> <identity|relu|sigmoid>
//   w <in*out hex doubles, row-major>
//   b <out hex doubles>
void save_checkpoint(const DenseNet& net, std::ostream& os);
DenseNet load_checkpoint(std::istream& is);
void save_checkpoint(const DenseNet& net, const std::string& path);
DenseNet load_checkpoint(const std::string& path);

}  // namespace vids
