#include "itd/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace itd::nn {

std::string_view activation_name(Activation a) {
  switch (a) {
  case Activation::Tanh: return "tanh";
  case Activation::Relu: return "relu";
  case Activation::Sigmoid: return "sigmoid";
  case Activation::Identity: return "identity";
  }
  return "?";
}

std::string_view loss_name(Loss loss) { return loss == Loss::Bce ? "bce" : "mse"; }

double activate(Activation a, double z) {
  switch (a) {
  case Activation::Tanh: return std::tanh(z);
  case Activation::Relu: return z > 0.0 ? z : 0.0;
  case Activation::Sigmoid:
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    else {
      const double e = std::exp(z);
      return e / (1.0 + e);
    }
  case Activation::Identity: return z;
  }
  return z;
}

double activate_derivative(Activation a, double z, double y) {
  switch (a) {
  case Activation::Tanh: return 1.0 - y * y;
  case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
  case Activation::Sigmoid: return y * (1.0 - y);
  case Activation::Identity: return 1.0;
  }
  return 1.0;
}

DenseLayer::DenseLayer(std::size_t in_, std::size_t out_, Activation act)
    : in(in_), out(out_), weights(in_ * out_, 0.0), bias(out_, 0.0), activation(act) {}

void DenseLayer::apply(std::span<const double> x, std::span<double> pre,
                       std::span<double> post) const {
  for (std::size_t r = 0; r < out; ++r) {
    const double *row = weights.data() + r * in;
    double z = bias[r];
    for (std::size_t c = 0; c < in; ++c) z += row[c] * x[c];
    if (!pre.empty()) pre[r] = z;
    post[r] = activate(activation, z);
  }
}

std::size_t Network::input_dim() const { return layers.empty() ? 0 : layers.front().in; }
std::size_t Network::output_dim() const { return layers.empty() ? 0 : layers.back().out; }

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (const auto &l : layers) n += l.param_count();
  return n;
}

std::vector<std::size_t> Network::sizes() const {
  std::vector<std::size_t> s;
  if (layers.empty()) return s;
  s.push_back(layers.front().in);
  for (const auto &l : layers) s.push_back(l.out);
  return s;
}

void Network::validate() const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto &l = layers[i];
    if (l.weights.size() != l.in * l.out || l.bias.size() != l.out) {
      throw ConfigError(fmt::format("layer {}: parameter shapes do not match {}x{}", i, l.out, l.in));
    }
    if (i > 0 && layers[i - 1].out != l.in) {
      throw ConfigError(fmt::format("layer {}: input {} does not match previous output {}", i,
                                    l.in, layers[i - 1].out));
    }
    auto finite = [](double v) { return std::isfinite(v); };
    if (!std::all_of(l.weights.begin(), l.weights.end(), finite) ||
        !std::all_of(l.bias.begin(), l.bias.end(), finite)) {
      throw ConfigError(fmt::format("layer {}: non-finite parameter", i));
    }
  }
}

Network make_network(std::span<const std::size_t> sizes, std::span<const Activation> activations) {
  if (sizes.size() != activations.size() + 1) {
    throw ConfigError("make_network: need one activation per layer");
  }
  Network net;
  for (std::size_t i = 0; i < activations.size(); ++i) {
    if (sizes[i] == 0 || sizes[i + 1] == 0) throw ConfigError("make_network: zero-width layer");
    net.layers.emplace_back(sizes[i], sizes[i + 1], activations[i]);
  }
  return net;
}

void glorot_init(DenseLayer &layer, Rng &rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (double &w : layer.weights) w = dist(rng);
  std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
}

void glorot_init(Network &net, std::uint64_t seed) {
  Rng rng(seed);
  for (auto &layer : net.layers) glorot_init(layer, rng);
}

void append_params(const DenseLayer &layer, std::vector<double> &out) {
  out.insert(out.end(), layer.weights.begin(), layer.weights.end());
  out.insert(out.end(), layer.bias.begin(), layer.bias.end());
}

std::size_t assign_params(DenseLayer &layer, std::span<const double> params) {
  const std::size_t n = layer.param_count();
  if (params.size() < n) throw ConfigError("assign_params: parameter vector too short");
  std::copy_n(params.begin(), layer.weights.size(), layer.weights.begin());
  std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(layer.weights.size()), layer.bias.size(),
              layer.bias.begin());
  return n;
}

std::vector<double> flatten(const Network &net) {
  std::vector<double> out;
  out.reserve(net.param_count());
  for (const auto &l : net.layers) append_params(l, out);
  return out;
}

void unflatten(Network &net, std::span<const double> params) {
  if (params.size() != net.param_count()) {
    throw ConfigError(fmt::format("unflatten: expected {} parameters, got {}", net.param_count(),
                                  params.size()));
  }
  std::size_t offset = 0;
  for (auto &l : net.layers) offset += assign_params(l, params.subspan(offset));
}

Trace forward(const Network &net, std::span<const double> x) {
  if (net.layers.empty()) throw ConfigError("forward: empty network");
  if (x.size() != net.input_dim()) {
    throw ConfigError(fmt::format("forward: input has {} values, network expects {}", x.size(),
                                  net.input_dim()));
  }
  Trace t;
  t.pre.resize(net.layers.size());
  t.post.resize(net.layers.size() + 1);
  t.post[0].assign(x.begin(), x.end());
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    const auto &l = net.layers[i];
    t.pre[i].resize(l.out);
    t.post[i + 1].resize(l.out);
    l.apply(t.post[i], t.pre[i], t.post[i + 1]);
  }
  return t;
}

std::vector<double> predict(const Network &net, std::span<const double> x) {
  return forward(net, x).output();
}

double example_loss(Loss loss, std::span<const double> output, std::span<const double> target) {
  if (output.size() != target.size()) throw ConfigError("loss: output/target size mismatch");
  double sum = 0.0;
  if (loss == Loss::Mse) {
    for (std::size_t i = 0; i < output.size(); ++i) {
      const double d = output[i] - target[i];
      sum += d * d;
    }
  } else {
    for (std::size_t i = 0; i < output.size(); ++i) {
      const double y = std::clamp(output[i], kProbFloor, 1.0 - kProbFloor);
      sum -= target[i] * std::log(y) + (1.0 - target[i]) * std::log(1.0 - y);
    }
  }
  return sum / static_cast<double>(output.size());
}

void output_delta(Loss loss, const DenseLayer &last, std::span<const double> pre,
                  std::span<const double> output, std::span<const double> target, double scale,
                  std::span<double> delta) {
  const double k = scale / static_cast<double>(output.size());
  if (loss == Loss::Bce) {
    if (last.activation != Activation::Sigmoid) {
      throw ConfigError("BCE loss requires a sigmoid output layer");
    }
    for (std::size_t i = 0; i < output.size(); ++i) delta[i] = k * (output[i] - target[i]);
    return;
  }
  for (std::size_t i = 0; i < output.size(); ++i) {
    delta[i] = k * 2.0 * (output[i] - target[i]) *
               activate_derivative(last.activation, pre[i], output[i]);
  }
}

std::vector<double> backward(const Network &net, const Trace &trace, std::vector<double> delta,
                             std::span<double> grad, bool want_input_grad) {
  std::vector<std::size_t> offsets(net.layers.size());
  std::size_t offset = 0;
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    offsets[i] = offset;
    offset += net.layers[i].param_count();
  }
  std::vector<double> prev;
  for (std::size_t li = net.layers.size(); li-- > 0;) {
    const auto &l = net.layers[li];
    const auto &x = trace.post[li];
    double *gw = grad.data() + offsets[li];
    double *gb = gw + l.weights.size();
    for (std::size_t r = 0; r < l.out; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      double *row = gw + r * l.in;
      for (std::size_t c = 0; c < l.in; ++c) row[c] += d * x[c];
      gb[r] += d;
    }
    if (li == 0 && !want_input_grad) break;
    prev.assign(l.in, 0.0);
    for (std::size_t r = 0; r < l.out; ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      const double *row = l.weights.data() + r * l.in;
      for (std::size_t c = 0; c < l.in; ++c) prev[c] += row[c] * d;
    }
    if (li > 0) {
      const auto &below = net.layers[li - 1];
      const auto &z = trace.pre[li - 1];
      for (std::size_t c = 0; c < l.in; ++c) {
        prev[c] *= activate_derivative(below.activation, z[c], x[c]);
      }
    }
    delta.swap(prev);
  }
  if (!want_input_grad) return {};
  return delta;
}

namespace {

// Everything that could throw inside the parallel region is checked here.
void check_batch(const Network &net, const Samples &inputs, const Samples &targets, Loss loss) {
  if (net.layers.empty()) throw ConfigError("backprop: empty network");
  if (loss == Loss::Bce && net.layers.back().activation != Activation::Sigmoid) {
    throw ConfigError("BCE loss requires a sigmoid output layer");
  }
  if (inputs.empty()) throw ConfigError("backprop: empty batch");
  if (inputs.size() != targets.size()) throw ConfigError("backprop: inputs/targets count mismatch");
  if (inputs.dim() != net.input_dim() || targets.dim() != net.output_dim()) {
    throw ConfigError(fmt::format("backprop: batch shape {}->{} does not fit network {}->{}",
                                  inputs.dim(), targets.dim(), net.input_dim(), net.output_dim()));
  }
}

/// Adds one example's contribution (scaled by `scale`) into grad; returns its loss.
double accumulate_example(const Network &net, std::span<const double> x,
                          std::span<const double> target, Loss loss, double scale,
                          std::span<double> grad) {
  const Trace trace = forward(net, x);
  const double value = example_loss(loss, trace.output(), target);
  std::vector<double> delta(net.output_dim());
  output_delta(loss, net.layers.back(), trace.pre.back(), trace.output(), target, scale, delta);
  backward(net, trace, std::move(delta), grad);
  return value;
}

} // namespace

BatchResult backprop(const Network &net, const Samples &inputs, const Samples &targets, Loss loss) {
  check_batch(net, inputs, targets, loss);
  const std::size_t n = inputs.size();
  const std::size_t p = net.param_count();
  const std::size_t chunks = (n + kReductionChunk - 1) / kReductionChunk;
  std::vector<std::vector<double>> partial(chunks);
  std::vector<double> partial_loss(chunks, 0.0);
  std::vector<std::size_t> bad(chunks, n);

#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < chunks; ++c) {
    partial[c].assign(p, 0.0);
    const std::size_t end = std::min(n, (c + 1) * kReductionChunk);
    for (std::size_t i = c * kReductionChunk; i < end; ++i) {
      const double value = accumulate_example(net, inputs.row(i), targets.row(i), loss, 1.0, partial[c]);
      if (!std::isfinite(value) && bad[c] == n) bad[c] = i;
      partial_loss[c] += value;
    }
  }

  const std::size_t first_bad = *std::min_element(bad.begin(), bad.end());
  if (first_bad < n) {
    throw NumericError(fmt::format("non-finite loss at batch example {}", first_bad));
  }
  BatchResult result;
  result.grad.assign(p, 0.0);
  for (std::size_t c = 0; c < chunks; ++c) {
    for (std::size_t k = 0; k < p; ++k) result.grad[k] += partial[c][k];
    result.loss += partial_loss[c];
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (double &g : result.grad) g *= inv;
  result.loss *= inv;
  return result;
}

double batch_loss(const Network &net, const Samples &inputs, const Samples &targets, Loss loss) {
  check_batch(net, inputs, targets, loss);
  double sum = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    sum += example_loss(loss, predict(net, inputs.row(i)), targets.row(i));
  }
  return sum / static_cast<double>(inputs.size());
}

std::vector<double> fd_gradient(const Network &net, const Samples &inputs, const Samples &targets,
                                Loss loss, double step) {
  if (!(step > 0.0)) throw ConfigError("fd_gradient: step must be positive");
  Network probe = net;
  std::vector<double> grad;
  grad.reserve(net.param_count());
  auto central = [&](double &param) {
    const double saved = param;
    param = saved + step;
    const double up = batch_loss(probe, inputs, targets, loss);
    param = saved - step;
    const double down = batch_loss(probe, inputs, targets, loss);
    param = saved;
    grad.push_back((up - down) / (2.0 * step));
  };
  for (auto &layer : probe.layers) {
    for (double &w : layer.weights) central(w);
    for (double &b : layer.bias) central(b);
  }
  return grad;
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) throw ConfigError("max_relative_error: size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

} // namespace itd::nn
