#include "vids/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vids/error.hpp"
#include "vids/kernels.hpp"

namespace vids {

std::string_view activation_name(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  throw ParseError("unknown activation '" + std::string(name) + "'");
}

namespace {

double activate(Activation a, double v) {
  switch (a) {
    case Activation::identity: return v;
    case Activation::relu: return v > 0.0 ? v : 0.0;
    case Activation::sigmoid:
      return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return v;
}

// Derivative in terms of the pre-activation and the activation output.
double activate_grad(Activation a, double pre, double post) {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: return post * (1.0 - post);
  }
  return 1.0;
}

void check_shapes(std::span<const std::size_t> widths, std::span<const Activation> acts) {
  if (widths.size() != acts.size() + 1 || acts.empty())
    throw DimensionError("network needs one more width than activations");
  for (std::size_t w : widths)
    if (w == 0) throw DimensionError("layer widths must be positive");
}

}  // namespace

DenseNet::DenseNet(std::vector<Layer> layers) : layers_(std::move(layers)) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& layer = layers_[l];
    if (layer.weights.size() != layer.in * layer.out || layer.bias.size() != layer.out)
      throw DimensionError("layer " + std::to_string(l) + " parameter sizes do not match its shape");
    if (l > 0 && layers_[l - 1].out != layer.in)
      throw DimensionError("layer " + std::to_string(l) + " input width " + std::to_string(layer.in) +
                           " does not chain with previous output " + std::to_string(layers_[l - 1].out));
  }
}

DenseNet DenseNet::random(std::span<const std::size_t> widths, std::span<const Activation> acts,
                          Rng& rng) {
  check_shapes(widths, acts);
  std::vector<Layer> layers;
  for (std::size_t l = 0; l < acts.size(); ++l) {
    Layer layer{widths[l], widths[l + 1], acts[l], {}, {}};
    const double s = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    layer.weights.resize(layer.in * layer.out);
    for (double& w : layer.weights) w = rng.uniform(-s, s);
    layer.bias.assign(layer.out, 0.0);
    layers.push_back(std::move(layer));
  }
  return DenseNet(std::move(layers));
}

DenseNet DenseNet::zeros(std::span<const std::size_t> widths, std::span<const Activation> acts) {
  check_shapes(widths, acts);
  std::vector<Layer> layers;
  for (std::size_t l = 0; l < acts.size(); ++l)
    layers.push_back(Layer{widths[l], widths[l + 1], acts[l],
                           std::vector<double>(widths[l] * widths[l + 1], 0.0),
                           std::vector<double>(widths[l + 1], 0.0)});
  return DenseNet(std::move(layers));
}

std::size_t DenseNet::input_width() const { return layers_.empty() ? 0 : layers_.front().in; }
std::size_t DenseNet::output_width() const { return layers_.empty() ? 0 : layers_.back().out; }

std::size_t DenseNet::param_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

std::vector<double> DenseNet::forward(std::span<const double> x) const {
  if (x.size() != input_width())
    throw DimensionError("forward: input width " + std::to_string(x.size()) + ", network expects " +
                         std::to_string(input_width()));
  std::vector<double> cur(x.begin(), x.end());
  std::vector<double> next;
  for (const Layer& layer : layers_) {
    next.assign(layer.out, 0.0);
    kernels::gemv(layer.weights, layer.out, layer.in, cur, layer.bias, next);
    for (double& v : next) v = activate(layer.act, v);
    cur.swap(next);
  }
  return cur;
}

Matrix DenseNet::forward(const Matrix& x) const {
  ForwardCache cache;
  return forward_cached(*this, x, cache);
}

double& DenseNet::param(std::size_t flat) {
  for (Layer& l : layers_) {
    if (flat < l.weights.size()) return l.weights[flat];
    flat -= l.weights.size();
    if (flat < l.bias.size()) return l.bias[flat];
    flat -= l.bias.size();
  }
  throw DimensionError("parameter index out of range");
}

double DenseNet::param(std::size_t flat) const { return const_cast<DenseNet*>(this)->param(flat); }

GradientTape GradientTape::zeros_like(const DenseNet& net) {
  GradientTape t;
  for (const Layer& l : net.layers()) {
    t.weights.emplace_back(l.weights.size(), 0.0);
    t.bias.emplace_back(l.bias.size(), 0.0);
  }
  return t;
}

bool GradientTape::congruent_with(const DenseNet& net) const {
  if (weights.size() != net.layers().size() || bias.size() != net.layers().size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l)
    if (weights[l].size() != net.layers()[l].weights.size() ||
        bias[l].size() != net.layers()[l].bias.size())
      return false;
  return true;
}

double& GradientTape::at(std::size_t flat) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (flat < weights[l].size()) return weights[l][flat];
    flat -= weights[l].size();
    if (flat < bias[l].size()) return bias[l][flat];
    flat -= bias[l].size();
  }
  throw DimensionError("tape index out of range");
}

double GradientTape::at(std::size_t flat) const { return const_cast<GradientTape*>(this)->at(flat); }

std::size_t GradientTape::size() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].size() + bias[l].size();
  return n;
}

void GradientTape::add(const GradientTape& other, double s) {
  if (other.weights.size() != weights.size()) throw DimensionError("tape shapes differ");
  for (std::size_t l = 0; l < weights.size(); ++l) {
    kernels::axpy(s, other.weights[l], weights[l]);
    kernels::axpy(s, other.bias[l], bias[l]);
  }
}

void GradientTape::scale(double s) {
  for (auto& w : weights)
    for (double& v : w) v *= s;
  for (auto& b : bias)
    for (double& v : b) v *= s;
}

double GradientTape::norm() const {
  double acc = 0.0;
  for (const auto& w : weights) acc += kernels::dot(w, w);
  for (const auto& b : bias) acc += kernels::dot(b, b);
  return std::sqrt(acc);
}

const Matrix& forward_cached(const DenseNet& net, const Matrix& x, ForwardCache& cache) {
  if (x.cols != net.input_width())
    throw DimensionError("forward: input width " + std::to_string(x.cols) + ", network expects " +
                         std::to_string(net.input_width()));
  const auto& layers = net.layers();
  cache.pre.resize(layers.size());
  cache.post.resize(layers.size() + 1);
  cache.post[0] = x;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Layer& layer = layers[l];
    Matrix& pre = cache.pre[l];
    Matrix& post = cache.post[l + 1];
    pre = Matrix(x.rows, layer.out);
    post = Matrix(x.rows, layer.out);
    const Matrix& in = cache.post[l];
    for (std::size_t b = 0; b < x.rows; ++b) {
      kernels::gemv(layer.weights, layer.out, layer.in, in.row(b), layer.bias, pre.row(b));
      auto pr = pre.row(b);
      auto po = post.row(b);
      for (std::size_t j = 0; j < layer.out; ++j) po[j] = activate(layer.act, pr[j]);
    }
  }
  return cache.post.back();
}

void backward(const DenseNet& net, const ForwardCache& cache, const Matrix& d_out,
              GradientTape& tape, Matrix* d_input) {
  const auto& layers = net.layers();
  if (!tape.congruent_with(net)) throw DimensionError("gradient tape is not congruent with the network");
  if (cache.post.size() != layers.size() + 1) throw DimensionError("forward cache does not match network");
  const std::size_t batch = cache.post[0].rows;
  if (d_out.rows != batch || d_out.cols != net.output_width())
    throw DimensionError("output gradient shape does not match network output");

  Matrix delta = d_out;
  for (std::size_t li = layers.size(); li-- > 0;) {
    const Layer& layer = layers[li];
    const Matrix& pre = cache.pre[li];
    const Matrix& post = cache.post[li + 1];
    const Matrix& in = cache.post[li];
    const bool need_input_grad = li > 0 || d_input != nullptr;
    Matrix d_prev = need_input_grad ? Matrix(batch, layer.in) : Matrix();
    for (std::size_t b = 0; b < batch; ++b) {
      auto d = delta.row(b);
      auto pr = pre.row(b);
      auto po = post.row(b);
      for (std::size_t j = 0; j < layer.out; ++j) d[j] *= activate_grad(layer.act, pr[j], po[j]);
      kernels::axpy(1.0, d, tape.bias[li]);
      auto in_row = in.row(b);
      for (std::size_t j = 0; j < layer.out; ++j) {
        if (d[j] == 0.0) continue;
        kernels::axpy(d[j], in_row, std::span<double>(tape.weights[li]).subspan(j * layer.in, layer.in));
      }
      if (need_input_grad) kernels::gemv_t_acc(layer.weights, layer.out, layer.in, d, d_prev.row(b));
    }
    if (li == 0) {
      if (d_input) *d_input = std::move(d_prev);
    } else {
      delta = std::move(d_prev);
    }
  }
}

GradResult grad(const DenseNet& net, const Matrix& inputs, const OutputObjective& objective) {
  ForwardCache cache;
  const Matrix& out = forward_cached(net, inputs, cache);
  Matrix d_out(out.rows, out.cols);
  GradResult result{objective(out, &d_out), GradientTape::zeros_like(net)};
  backward(net, cache, d_out, result.tape);
  return result;
}

namespace {

// Relu on/off pattern over every relu unit of the batch.
std::vector<bool> relu_pattern(const DenseNet& net, const Matrix& inputs) {
  ForwardCache cache;
  forward_cached(net, inputs, cache);
  std::vector<bool> pattern;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    if (net.layers()[l].act != Activation::relu) continue;
    for (double v : cache.pre[l].data) pattern.push_back(v > 0.0);
  }
  return pattern;
}

}  // namespace

GradCheckReport check_gradients(const DenseNet& net, const Matrix& inputs,
                                const OutputObjective& objective, double eps) {
  if (!(eps > 0.0)) throw DomainError("check_gradients: eps must be positive");
  const GradResult analytic = grad(net, inputs, objective);
  const auto value_at = [&](const DenseNet& n) { return objective(n.forward(inputs), nullptr); };
  const std::vector<bool> base_pattern = relu_pattern(net, inputs);

  GradCheckReport report;
  DenseNet probe = net;
  for (std::size_t i = 0; i < net.param_count(); ++i) {
    const double orig = probe.param(i);
    probe.param(i) = orig + eps;
    const bool kink_plus = relu_pattern(probe, inputs) != base_pattern;
    const double f_plus = value_at(probe);
    probe.param(i) = orig - eps;
    const bool kink_minus = relu_pattern(probe, inputs) != base_pattern;
    const double f_minus = value_at(probe);
    probe.param(i) = orig;
    if (kink_plus || kink_minus) {
      ++report.skipped;
      continue;
    }
    const double fd = (f_plus - f_minus) / (2.0 * eps);
    const double err = std::abs(analytic.tape.at(i) - fd) / std::max(1.0, std::abs(fd));
    report.max_rel_error = std::max(report.max_rel_error, err);
    ++report.checked;
  }
  return report;
}

void sgd_step(DenseNet& net, const GradientTape& tape, double lr, StepDirection dir) {
  if (!(lr > 0.0)) throw DomainError("sgd_step: learning rate must be positive");
  if (!tape.congruent_with(net)) throw DimensionError("sgd_step: tape is not congruent with the network");
  const double s = dir == StepDirection::ascent ? lr : -lr;
  for (std::size_t l = 0; l < net.layers().size(); ++l) {
    Layer& layer = net.layers()[l];
    kernels::axpy(s, tape.weights[l], layer.weights);
    kernels::axpy(s, tape.bias[l], layer.bias);
  }
}

}  // namespace vids
