#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "itd/nadam.hpp"
#include "itd/nn.hpp"

namespace itd::nn {

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 256;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  bool shuffle = true;
  NadamParams nadam{};
  /// Called after every epoch with its index and mean loss.
  std::function<void(std::size_t, double)> on_epoch;

  /// Throws ConfigError unless epochs >= 1, batch_size >= 1, lr > 0.
  void validate() const;
};

/// A model that exposes its parameters as one flat vector and can evaluate
/// the mean loss gradient on a subset of its training rows.
class Trainable {
public:
  virtual ~Trainable() = default;

  virtual std::size_t example_count() const = 0;
  virtual std::vector<double> parameters() const = 0;
  virtual void set_parameters(std::span<const double> params) = 0;
  /// Gradient at the current parameters. Models that sample noise draw it
  /// from `rng`, sequentially, before any parallel work.
  virtual BatchResult gradient(std::span<const std::size_t> rows, Rng &rng) const = 0;
  virtual std::unique_ptr<Trainable> clone() const = 0;
};

struct TrainHistory {
  std::vector<double> epoch_loss; ///< mean example loss per epoch
  std::size_t steps = 0;
};

/// epochs x ceil(N / batch) NADAM steps; rows are reshuffled each epoch
/// when cfg.shuffle is set. The short last batch is kept. Throws NumericError
/// naming the epoch and step on divergence.
TrainHistory train(Trainable &model, const TrainConfig &cfg);

/// Self-contained objective for a plain network (inputs -> targets).
class NetworkObjective final : public Trainable {
public:
  NetworkObjective(Network &net, const Samples &inputs, const Samples &targets, Loss loss);

  std::size_t example_count() const override { return inputs_->size(); }
  std::vector<double> parameters() const override { return flatten(*net_); }
  void set_parameters(std::span<const double> params) override { unflatten(*net_, params); }
  BatchResult gradient(std::span<const std::size_t> rows, Rng &rng) const override;
  std::unique_ptr<Trainable> clone() const override;

private:
  std::shared_ptr<Network> owned_; // set on clones
  Network *net_;
  const Samples *inputs_;
  const Samples *targets_;
  Loss loss_;
};

TrainHistory train(Network &net, const Samples &inputs, const Samples &targets, Loss loss,
                   const TrainConfig &cfg);

struct LrFinderConfig {
  double lr_min = 1e-7;
  double lr_max = 1.0;
  std::size_t steps = 100;
  std::size_t batch_size = 256;
  /// Exponential smoothing factor for the recorded loss.
  double smoothing = 0.98;
  /// The sweep stops once the smoothed loss exceeds this multiple of its best.
  double divergence_factor = 4.0;
  /// Leading points ignored when picking the steepest slope, where the
  /// bias-corrected average is still close to the raw, noisy loss. Not
  /// applied to curves shorter than twice this.
  std::size_t skip_start = 10;
  std::uint64_t seed = 0;
  NadamParams nadam{};
};

struct LrPoint {
  double lr = 0.0;
  double loss = 0.0;          ///< raw mini-batch loss
  double smoothed_loss = 0.0; ///< bias-corrected exponential average
};

struct LrFinderResult {
  std::vector<LrPoint> curve;
  double suggested_lr = 0.0;
  bool diverged = false;
};

/// Learning-rate range test: lr grows geometrically from lr_min to lr_max,
/// one mini-batch per step, on a clone of `model` (the original is not
/// touched). Suggests the lr of steepest smoothed-loss descent over log lr,
/// divided by 10. Throws NumericError if no finite loss is ever recorded.
LrFinderResult lr_finder(const Trainable &model, const LrFinderConfig &cfg);

} // namespace itd::nn
