#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "itd/common.hpp"
#include "itd/samples.hpp"

namespace itd::nn {

enum class Activation : std::uint8_t { Tanh = 0, Relu = 1, Sigmoid = 2, Identity = 3 };
enum class Loss : std::uint8_t { Mse = 0, Bce = 1 };

std::string_view activation_name(Activation a);
std::string_view loss_name(Loss loss);

/// Sigmoid outputs are clamped to [kProbFloor, 1 - kProbFloor] inside BCE.
inline constexpr double kProbFloor = 1e-12;

double activate(Activation a, double z);
/// Derivative expressed through the pre-activation z and output y = f(z).
double activate_derivative(Activation a, double z, double y);

struct DenseLayer {
  DenseLayer() = default;
  DenseLayer(std::size_t in, std::size_t out, Activation act);

  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights; ///< out x in, row-major
  std::vector<double> bias;    ///< out
  Activation activation = Activation::Identity;

  double &w(std::size_t row, std::size_t col) { return weights[row * in + col]; }
  double w(std::size_t row, std::size_t col) const { return weights[row * in + col]; }
  std::size_t param_count() const noexcept { return weights.size() + bias.size(); }

  /// y = f(W x + b); also writes the pre-activation when `pre` is non-empty.
  void apply(std::span<const double> x, std::span<double> pre, std::span<double> post) const;

  friend bool operator==(const DenseLayer &, const DenseLayer &) = default;
};

/// Ordered stack of dense layers.
struct Network {
  std::vector<DenseLayer> layers;

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t param_count() const;
  /// Layer widths, input first: {in_0, out_0, out_1, ...}.
  std::vector<std::size_t> sizes() const;
  /// Throws ConfigError on inconsistent shapes or non-finite entries.
  void validate() const;

  friend bool operator==(const Network &, const Network &) = default;
};

/// `sizes` has one more entry than `activations`.
Network make_network(std::span<const std::size_t> sizes, std::span<const Activation> activations);

/// Uniform Glorot init: W ~ U(-a, a), a = sqrt(6 / (fan_in + fan_out)); b = 0.
void glorot_init(Network &net, std::uint64_t seed);
void glorot_init(DenseLayer &layer, Rng &rng);

// Flat parameter order: for each layer, W (row-major) then b.
std::vector<double> flatten(const Network &net);
void unflatten(Network &net, std::span<const double> params);
void append_params(const DenseLayer &layer, std::vector<double> &out);
std::size_t assign_params(DenseLayer &layer, std::span<const double> params);

/// Intermediates of one forward pass. post[0] is the input and post[i + 1]
/// the output of layer i; pre[i] is layer i's pre-activation.
struct Trace {
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;

  const std::vector<double> &output() const { return post.back(); }
};

/// Throws ConfigError when x does not match the first layer.
Trace forward(const Network &net, std::span<const double> x);
std::vector<double> predict(const Network &net, std::span<const double> x);

/// Per-example loss, averaged over output units.
double example_loss(Loss loss, std::span<const double> output, std::span<const double> target);

/// dL/d(pre-activation of the last layer) for example_loss, scaled by `scale`.
/// BCE with a Sigmoid output uses the fused (y - t) form.
void output_delta(Loss loss, const DenseLayer &last, std::span<const double> pre,
                  std::span<const double> output, std::span<const double> target, double scale,
                  std::span<double> delta);

/// Backpropagates `delta` (dL/d pre-activation of the last layer) through the
/// trace, adding dL/dparam into `grad` (flat order). Returns dL/dx when
/// `want_input_grad` is set, otherwise an empty vector.
std::vector<double> backward(const Network &net, const Trace &trace, std::vector<double> delta,
                             std::span<double> grad, bool want_input_grad = false);

struct BatchResult {
  std::vector<double> grad; ///< gradient of the mean batch loss, flat order
  double loss = 0.0;        ///< mean batch loss
};

/// Rows per reduction chunk. Chunks reduce in index order regardless of the
/// thread count, so results are bitwise reproducible.
inline constexpr std::size_t kReductionChunk = 16;

/// Mean loss and gradient over the batch. Chunks run on OpenMP threads.
/// Throws ConfigError for shape problems and NumericError (naming the first
/// offending example index) when the loss is not finite.
BatchResult backprop(const Network &net, const Samples &inputs, const Samples &targets, Loss loss);

/// Mean loss only.
double batch_loss(const Network &net, const Samples &inputs, const Samples &targets, Loss loss);

/// Central differences (L(p+h) - L(p-h)) / 2h for every parameter.
std::vector<double> fd_gradient(const Network &net, const Samples &inputs, const Samples &targets,
                                Loss loss, double step);

/// Largest |a - b| / max(|a|, |b|, floor) over paired entries.
double max_relative_error(std::span<const double> a, std::span<const double> b,
                          double floor = 1e-6);

namespace reference {

/// Single-threaded backprop accumulating examples in order. Kept as the
/// baseline the parallel kernel is checked and benchmarked against.
BatchResult backprop(const Network &net, const Samples &inputs, const Samples &targets, Loss loss);

} // namespace reference

} // namespace itd::nn
