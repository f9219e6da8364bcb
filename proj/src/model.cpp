#include "vids/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "vids/error.hpp"
#include "vids/kernels.hpp"

namespace vids {

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2 pi)
}

std::string_view task_name(Task t) { return t == Task::regression ? "regression" : "classification"; }

Task parse_task(std::string_view name) {
  if (name == "regression") return Task::regression;
  if (name == "classification") return Task::classification;
  throw ParseError("unknown task '" + std::string(name) + "'");
}

void Dataset::validate() const {
  if (x.rows == 0) throw InputError("dataset is empty");
  if (y.size() != x.rows)
    throw InputError("dataset has " + std::to_string(x.rows) + " rows but " + std::to_string(y.size()) +
                     " outcomes");
  if (task == Task::classification)
    for (std::size_t i = 0; i < y.size(); ++i)
      if (y[i] != 0.0 && y[i] != 1.0)
        throw InputError("classification label at row " + std::to_string(i) + " is not 0 or 1");
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.task = task;
  out.x = Matrix(rows.size(), x.cols);
  out.y.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(x.row(rows[i]).begin(), x.cols, out.x.row(i).begin());
    out.y[i] = y[rows[i]];
  }
  return out;
}

double head_output(std::span<const double> theta, std::span<const double> embed) {
  if (theta.size() != embed.size() + 1)
    throw DimensionError("head has " + std::to_string(theta.size()) + " parameters for embedding width " +
                         std::to_string(embed.size()));
  return kernels::dot(theta.first(embed.size()), embed) + theta.back();
}

double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double softplus(double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

double log_lik(double y, double output, Task task) {
  if (task == Task::regression) {
    const double d = y - output;
    return -kHalfLog2Pi - 0.5 * d * d;
  }
  if (y != 0.0 && y != 1.0) throw InputError("Bernoulli outcome must be 0 or 1");
  // y ln s(l) + (1-y) ln(1 - s(l)) = y l - softplus(l)
  return y * output - softplus(output);
}

double log_lik_grad(double y, double output, Task task) {
  if (task == Task::regression) return y - output;
  return y - stable_sigmoid(output);
}

std::vector<double> embed(const EmbeddingModel& model, std::span<const double> x) {
  return model.g.forward(x);
}

Matrix embed_all(const EmbeddingModel& model, const Matrix& x) { return model.g.forward(x); }

namespace {

std::vector<double> mean_in_order(const Matrix& e, std::vector<std::size_t> order) {
  if (order.empty()) throw InputError("aggregate: empty embedding set");
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto ra = e.row(a);
    auto rb = e.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  std::vector<double> acc(e.cols, 0.0);
  for (std::size_t i : order) {
    auto r = e.row(i);
    for (std::size_t j = 0; j < e.cols; ++j) acc[j] += r[j];
  }
  const double inv = 1.0 / static_cast<double>(order.size());
  for (double& v : acc) v *= inv;
  return acc;
}

}  // namespace

std::vector<double> aggregate(const Matrix& embeddings) {
  std::vector<std::size_t> order(embeddings.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  return mean_in_order(embeddings, std::move(order));
}

std::vector<double> aggregate(const Matrix& embeddings, std::span<const std::size_t> rows) {
  for (std::size_t r : rows)
    if (r >= embeddings.rows) throw DimensionError("aggregate: row index out of range");
  return mean_in_order(embeddings, std::vector<std::size_t>(rows.begin(), rows.end()));
}

Matrix design_matrix(const Matrix& embeddings) {
  Matrix z(embeddings.rows, embeddings.cols + 1);
  for (std::size_t i = 0; i < embeddings.rows; ++i) {
    auto src = embeddings.row(i);
    auto dst = z.row(i);
    std::copy(src.begin(), src.end(), dst.begin());
    dst.back() = 1.0;
  }
  return z;
}

PretrainResult pretrain_embedding(const Dataset& data, const PretrainConfig& cfg) {
  data.validate();
  if (cfg.epochs < 1) throw ConfigError("pretrain: epochs must be at least 1");
  if (cfg.hidden.empty()) throw ConfigError("pretrain: at least one hidden layer is required");
  if (!(cfg.lr > 0.0)) throw ConfigError("pretrain: learning rate must be positive");
  if (cfg.activation == Activation::sigmoid) throw ConfigError("pretrain: activation must be relu or identity");

  std::vector<std::size_t> widths{data.width()};
  std::vector<Activation> acts;
  for (std::size_t h : cfg.hidden) {
    widths.push_back(h);
    acts.push_back(cfg.activation);
  }
  widths.push_back(1);
  acts.push_back(Activation::identity);

  Rng rng(cfg.seed);
  DenseNet net = DenseNet::random(widths, acts, rng);
  const double inv_n = 1.0 / static_cast<double>(data.size());
  const Task task = data.task;
  const OutputObjective objective = [&](const Matrix& out, Matrix* d_out) {
    double total = 0.0;
    for (std::size_t i = 0; i < out.rows; ++i) {
      total += log_lik(data.y[i], out(i, 0), task);
      if (d_out) (*d_out)(i, 0) = log_lik_grad(data.y[i], out(i, 0), task) * inv_n;
    }
    return total * inv_n;
  };

  PretrainResult result;
  result.mean_loglik.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    GradResult g = grad(net, data.x, objective);
    if (!std::isfinite(g.value) || !std::isfinite(g.tape.norm()))
      throw DivergenceError("pretrain diverged at epoch " + std::to_string(epoch) +
                            " (mean log-likelihood " + std::to_string(g.value) + ")");
    result.mean_loglik.push_back(g.value);
    sgd_step(net, g.tape, cfg.lr, StepDirection::ascent);
  }

  std::vector<Layer> layers = net.layers();
  const Layer head = layers.back();
  layers.pop_back();
  result.embedding.g = DenseNet(std::move(layers));
  result.head.values = head.weights;
  result.head.values.push_back(head.bias[0]);
  return result;
}

}  // namespace vids
