#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "itd/nn.hpp"
#include "itd/trainer.hpp"

namespace itd::ae {

/// Deep autoencoder: d -> 2d -> d -> bottleneck -> d -> 2d -> d.
/// Encoder layers use tanh, decoder hidden layers relu, the output sigmoid.
struct AeModel {
  nn::Network net;
  std::size_t input_dim = 0;
  std::size_t bottleneck = 0;
  nn::Loss loss = nn::Loss::Bce;
  std::optional<double> threshold;
  std::vector<double> loss_history;
  bool trained = false;

  /// Index of the layer whose output is the compressed code.
  static constexpr std::size_t kCodeLayer = 2;
};

std::vector<std::size_t> layer_sizes(std::size_t input_dim, std::size_t bottleneck);

/// bottleneck = 0 selects the default, equal to input_dim.
AeModel build_ae(std::size_t input_dim, std::size_t bottleneck = 0, std::uint64_t seed = 0,
                 nn::Loss loss = nn::Loss::Bce);

/// 30 epochs, batch 256.
nn::TrainConfig default_train_config();

/// Self-reconstruction training (target = input).
void train_ae(AeModel &model, const Samples &train, const nn::TrainConfig &cfg);

std::vector<double> encode(const AeModel &model, std::span<const double> x);
std::vector<double> reconstruct(const AeModel &model, std::span<const double> x);

/// Mean per-unit loss between x and its reconstruction. Throws ConfigError
/// on an untrained model.
double reconstruction_error(const AeModel &model, std::span<const double> x);

/// Scores every row on OpenMP workers; the model is read-only.
std::vector<double> score_all(const AeModel &model, const Samples &data);

struct ThresholdStrategy {
  enum class Kind { MaxF1, Quantile } kind = Kind::MaxF1;
  double q = 0.95;

  /// "maxf1" or "quantile:<q>".
  static ThresholdStrategy parse(std::string_view text);
  std::string to_string() const;
};

struct ScoredLabel {
  double score = 0.0;
  std::uint8_t label = 0;
};

/// MaxF1 tries every cut between consecutive distinct scores (plus "all
/// positive") and returns the one with the best F1, preferring the lower
/// threshold on ties; each cut is the midpoint of its two scores.
/// Quantile(q) is the linearly interpolated q-quantile of label-0 scores.
/// Throws ConfigError on empty input, MaxF1 without positives, or Quantile
/// without negatives.
double calibrate_threshold(std::span<const ScoredLabel> scored, ThresholdStrategy strategy);

/// 1 iff score > threshold.
inline std::uint8_t classify(double score, double threshold) { return score > threshold ? 1 : 0; }

/// Throws ConfigError when no threshold is set.
std::uint8_t classify(const AeModel &model, std::optional<double> threshold,
                      std::span<const double> x);

} // namespace itd::ae
