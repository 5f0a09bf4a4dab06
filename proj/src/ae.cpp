#include "itd/ae.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace itd::ae {

std::vector<std::size_t> layer_sizes(std::size_t d, std::size_t bottleneck) {
  return {d, 2 * d, d, bottleneck, d, 2 * d, d};
}

AeModel build_ae(std::size_t input_dim, std::size_t bottleneck, std::uint64_t seed, nn::Loss loss) {
  if (input_dim == 0) throw ConfigError("build_ae: input dimension must be >= 1");
  if (bottleneck == 0) bottleneck = input_dim;
  using nn::Activation;
  const auto sizes = layer_sizes(input_dim, bottleneck);
  constexpr std::array acts = {Activation::Tanh, Activation::Tanh, Activation::Tanh,
                               Activation::Relu, Activation::Relu, Activation::Sigmoid};
  AeModel model;
  model.net = nn::make_network(sizes, acts);
  nn::glorot_init(model.net, seed);
  model.input_dim = input_dim;
  model.bottleneck = bottleneck;
  model.loss = loss;
  return model;
}

nn::TrainConfig default_train_config() {
  nn::TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 256;
  return cfg;
}

void train_ae(AeModel &model, const Samples &train, const nn::TrainConfig &cfg) {
  if (train.dim() != model.input_dim) {
    throw ConfigError(fmt::format("train_ae: data width {} does not match model input {}",
                                  train.dim(), model.input_dim));
  }
  const nn::TrainHistory history = nn::train(model.net, train, train, model.loss, cfg);
  model.loss_history.insert(model.loss_history.end(), history.epoch_loss.begin(),
                            history.epoch_loss.end());
  model.trained = true;
}

std::vector<double> encode(const AeModel &model, std::span<const double> x) {
  return nn::forward(model.net, x).post[AeModel::kCodeLayer + 1];
}

std::vector<double> reconstruct(const AeModel &model, std::span<const double> x) {
  return nn::predict(model.net, x);
}

double reconstruction_error(const AeModel &model, std::span<const double> x) {
  if (!model.trained) throw ConfigError("reconstruction_error: model is untrained");
  return nn::example_loss(model.loss, reconstruct(model, x), x);
}

std::vector<double> score_all(const AeModel &model, const Samples &data) {
  if (!model.trained) throw ConfigError("score_all: model is untrained");
  if (!data.empty() && data.dim() != model.input_dim) {
    throw ConfigError("score_all: data width does not match the model");
  }
  std::vector<double> scores(data.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < data.size(); ++i) {
    scores[i] = nn::example_loss(model.loss, nn::predict(model.net, data.row(i)), data.row(i));
  }
  return scores;
}

ThresholdStrategy ThresholdStrategy::parse(std::string_view text) {
  if (text == "maxf1") return {};
  constexpr std::string_view prefix = "quantile:";
  if (text.starts_with(prefix)) {
    const std::string value(text.substr(prefix.size()));
    std::size_t used = 0;
    double q = 0.0;
    try {
      q = std::stod(value, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used == value.size() && used > 0 && q >= 0.0 && q <= 1.0) {
      return {Kind::Quantile, q};
    }
  }
  throw ConfigError(fmt::format("unknown threshold strategy '{}' (use maxf1 or quantile:Q)", text));
}

std::string ThresholdStrategy::to_string() const {
  return kind == Kind::MaxF1 ? "maxf1" : fmt::format("quantile:{}", q);
}

namespace {

double max_f1_threshold(std::vector<ScoredLabel> scored) {
  std::sort(scored.begin(), scored.end(),
            [](const ScoredLabel &a, const ScoredLabel &b) { return a.score < b.score; });
  std::size_t total_pos = 0;
  for (const auto &s : scored) total_pos += s.label;
  if (total_pos == 0) throw ConfigError("calibrate_threshold: MaxF1 needs at least one positive");

  // Groups of equal scores; a cut after group g predicts positive for every
  // score in groups g+1..end.
  struct Group {
    double score;
    std::size_t pos;
    std::size_t neg;
  };
  std::vector<Group> groups;
  for (const auto &s : scored) {
    if (groups.empty() || groups.back().score != s.score) groups.push_back({s.score, 0, 0});
    (s.label ? groups.back().pos : groups.back().neg) += 1;
  }

  const std::size_t total_neg = scored.size() - total_pos;
  auto f1_of = [](std::size_t tp, std::size_t fp, std::size_t fn) {
    const std::size_t denom = 2 * tp + fp + fn;
    return denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  };

  // Start with everything predicted positive.
  std::size_t tp = total_pos;
  std::size_t fp = total_neg;
  double best_f1 = f1_of(tp, fp, 0);
  double best = std::nextafter(groups.front().score, -std::numeric_limits<double>::infinity());
  for (std::size_t g = 0; g + 1 < groups.size(); ++g) {
    tp -= groups[g].pos;
    fp -= groups[g].neg;
    const double f1 = f1_of(tp, fp, total_pos - tp);
    if (f1 > best_f1) {
      best_f1 = f1;
      const double lo = groups[g].score;
      const double hi = groups[g + 1].score;
      double mid = lo + (hi - lo) / 2.0;
      if (!(mid < hi)) mid = lo;
      best = mid;
    }
  }
  return best;
}

double benign_quantile(std::span<const ScoredLabel> scored, double q) {
  std::vector<double> benign;
  for (const auto &s : scored) {
    if (s.label == 0) benign.push_back(s.score);
  }
  if (benign.empty()) throw ConfigError("calibrate_threshold: quantile needs label-0 scores");
  std::sort(benign.begin(), benign.end());
  const double pos = q * static_cast<double>(benign.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, benign.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return benign[lo] + frac * (benign[hi] - benign[lo]);
}

} // namespace

double calibrate_threshold(std::span<const ScoredLabel> scored, ThresholdStrategy strategy) {
  if (scored.empty()) throw ConfigError("calibrate_threshold: no scores");
  for (const auto &s : scored) {
    if (!std::isfinite(s.score)) throw NumericError("calibrate_threshold: non-finite score");
  }
  if (strategy.kind == ThresholdStrategy::Kind::MaxF1) {
    return max_f1_threshold({scored.begin(), scored.end()});
  }
  return benign_quantile(scored, strategy.q);
}

std::uint8_t classify(const AeModel &model, std::optional<double> threshold,
                      std::span<const double> x) {
  if (!threshold) throw ConfigError("classify: threshold is not calibrated");
  return classify(reconstruction_error(model, x), *threshold);
}

} // namespace itd::ae
