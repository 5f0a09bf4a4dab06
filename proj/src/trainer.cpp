#include "itd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <fmt/format.h>

namespace itd::nn {

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train: learning rate must be > 0");
}

TrainHistory train(Trainable &model, const TrainConfig &cfg) {
  cfg.validate();
  const std::size_t n = model.example_count();
  if (n == 0) throw ConfigError("train: no training data");

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> params = model.parameters();
  NadamParams hp = cfg.nadam;
  hp.lr = cfg.lr;
  NadamState state(params.size(), hp);

  TrainHistory history;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.shuffle) std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t len = std::min(cfg.batch_size, n - start);
      const std::span<const std::size_t> rows(order.data() + start, len);
      try {
        const BatchResult r = model.gradient(rows, rng);
        total += r.loss * static_cast<double>(len);
        state.apply(params, r.grad);
      } catch (const NumericError &e) {
        throw NumericError(fmt::format("training diverged at epoch {} step {}: {}", epoch + 1,
                                       history.steps + 1, e.what()));
      }
      model.set_parameters(params);
      ++history.steps;
    }
    const double mean = total / static_cast<double>(n);
    if (!std::isfinite(mean)) {
      throw NumericError(fmt::format("training diverged at epoch {}: loss {}", epoch + 1, mean));
    }
    history.epoch_loss.push_back(mean);
    if (cfg.on_epoch) cfg.on_epoch(history.epoch_loss.size() - 1, mean);
  }
  return history;
}

NetworkObjective::NetworkObjective(Network &net, const Samples &inputs, const Samples &targets,
                                   Loss loss)
    : net_(&net), inputs_(&inputs), targets_(&targets), loss_(loss) {
  if (inputs.size() != targets.size()) throw ConfigError("objective: inputs/targets count mismatch");
}

BatchResult NetworkObjective::gradient(std::span<const std::size_t> rows, Rng &) const {
  return backprop(*net_, inputs_->gather(rows), targets_->gather(rows), loss_);
}

std::unique_ptr<Trainable> NetworkObjective::clone() const {
  auto copy = std::make_shared<Network>(*net_);
  auto out = std::make_unique<NetworkObjective>(*copy, *inputs_, *targets_, loss_);
  out->owned_ = std::move(copy);
  return out;
}

TrainHistory train(Network &net, const Samples &inputs, const Samples &targets, Loss loss,
                   const TrainConfig &cfg) {
  NetworkObjective objective(net, inputs, targets, loss);
  return train(objective, cfg);
}

LrFinderResult lr_finder(const Trainable &model, const LrFinderConfig &cfg) {
  if (!(cfg.lr_min > 0.0 && cfg.lr_min < cfg.lr_max)) {
    throw ConfigError("lr_finder: need 0 < lr_min < lr_max");
  }
  if (cfg.steps < 1 || cfg.batch_size < 1) throw ConfigError("lr_finder: steps and batch must be >= 1");
  auto probe = model.clone();
  const std::size_t n = probe->example_count();
  if (n == 0) throw ConfigError("lr_finder: no data");

  Rng rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;

  std::vector<double> params = probe->parameters();
  NadamParams hp = cfg.nadam;
  hp.lr = cfg.lr_min;
  NadamState state(params.size(), hp);

  LrFinderResult result;
  double average = 0.0;
  double best = std::numeric_limits<double>::infinity();
  const double ratio = cfg.lr_max / cfg.lr_min;
  for (std::size_t i = 0; i < cfg.steps; ++i) {
    const double lr = cfg.steps == 1
                          ? cfg.lr_min
                          : cfg.lr_min * std::pow(ratio, static_cast<double>(i) /
                                                             static_cast<double>(cfg.steps - 1));
    if (cursor >= n) {
      std::shuffle(order.begin(), order.end(), rng);
      cursor = 0;
    }
    const std::size_t len = std::min(cfg.batch_size, n - cursor);
    const std::span<const std::size_t> rows(order.data() + cursor, len);
    cursor += len;

    BatchResult r;
    try {
      r = probe->gradient(rows, rng);
    } catch (const NumericError &) {
      result.diverged = true;
      break;
    }
    if (!std::isfinite(r.loss)) {
      result.diverged = true;
      break;
    }
    average = cfg.smoothing * average + (1.0 - cfg.smoothing) * r.loss;
    const double smoothed = average / (1.0 - std::pow(cfg.smoothing, static_cast<double>(i + 1)));
    result.curve.push_back({lr, r.loss, smoothed});
    if (smoothed > cfg.divergence_factor * best) {
      result.diverged = true;
      break;
    }
    best = std::min(best, smoothed);

    state.set_lr(lr);
    try {
      state.apply(params, r.grad);
    } catch (const NumericError &) {
      result.diverged = true;
      break;
    }
    probe->set_parameters(params);
  }

  if (result.curve.empty()) throw NumericError("lr_finder: no stable learning rate in range");

  const std::size_t skip = result.curve.size() >= 2 * cfg.skip_start ? cfg.skip_start : 0;
  std::size_t steepest = skip;
  double steepest_slope = 0.0;
  for (std::size_t i = skip; i + 1 < result.curve.size(); ++i) {
    const auto &a = result.curve[i];
    const auto &b = result.curve[i + 1];
    const double slope = (b.smoothed_loss - a.smoothed_loss) / (std::log(b.lr) - std::log(a.lr));
    if (slope < steepest_slope) {
      steepest_slope = slope;
      steepest = i;
    }
  }
  result.suggested_lr = result.curve[steepest].lr / 10.0;
  return result;
}

} // namespace itd::nn
