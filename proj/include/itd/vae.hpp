#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "itd/nn.hpp"
#include "itd/trainer.hpp"

namespace itd::vae {

/// Encoder trunk (tanh) feeding two linear heads, mu and log sigma^2, and a
/// decoder mirroring the trunk (relu hidden layers, sigmoid output).
struct VaeModel {
  nn::Network trunk;
  nn::DenseLayer mu_head;
  nn::DenseLayer logvar_head;
  nn::Network decoder;
  std::size_t input_dim = 0;
  std::size_t latent_dim = 0;
  double kl_weight = 1.0;
  std::optional<double> threshold;
  std::vector<double> loss_history;
  bool trained = false;

  std::size_t param_count() const;
};

/// Empty `hidden` selects the default trunk {2d, d}.
VaeModel build_vae(std::size_t input_dim, std::size_t latent_dim = 2, std::uint64_t seed = 0,
                   std::vector<std::size_t> hidden = {});

/// 1000 epochs, batch 128.
nn::TrainConfig default_train_config();

// Flat order: trunk, mu head, log-variance head, decoder.
std::vector<double> flatten(const VaeModel &model);
void unflatten(VaeModel &model, std::span<const double> params);

struct Encoding {
  std::vector<double> mu;
  std::vector<double> logvar;
};

Encoding encode(const VaeModel &model, std::span<const double> x);

/// z = mu + exp(logvar / 2) * eps.
std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> logvar,
                                   std::span<const double> eps);

/// KL(N(mu, sigma^2) || N(0, I)) = 1/2 sum(mu^2 + sigma^2 - 1 - log sigma^2).
double kl_divergence(std::span<const double> mu, std::span<const double> logvar);

/// Summed per-bit BCE between a reconstruction and its target.
double reconstruction_bce(std::span<const double> output, std::span<const double> target);

/// Per-example training loss with a frozen noise draw:
/// reconstruction_bce(decoder(z), x) + kl_weight * KL.
double example_loss(const VaeModel &model, std::span<const double> x, std::span<const double> eps);

/// Adds d(example_loss)/dparams into `grad` (flat order); returns the loss.
double accumulate_gradient(const VaeModel &model, std::span<const double> x,
                           std::span<const double> eps, std::span<double> grad);

/// Mean loss and gradient over rows of x, with eps row i used for x row i.
nn::BatchResult batch_gradient(const VaeModel &model, const Samples &x, const Samples &eps);

/// Central-difference oracle for batch_gradient.
std::vector<double> fd_gradient(const VaeModel &model, const Samples &x, const Samples &eps,
                                double step);

/// Trains with one fresh standard-normal eps per example per step.
class VaeObjective final : public nn::Trainable {
public:
  VaeObjective(VaeModel &model, const Samples &data);

  std::size_t example_count() const override { return data_->size(); }
  std::vector<double> parameters() const override { return flatten(*model_); }
  void set_parameters(std::span<const double> params) override { unflatten(*model_, params); }
  nn::BatchResult gradient(std::span<const std::size_t> rows, Rng &rng) const override;
  std::unique_ptr<nn::Trainable> clone() const override;

private:
  std::shared_ptr<VaeModel> owned_;
  VaeModel *model_;
  const Samples *data_;
};

void train_vae(VaeModel &model, const Samples &train, const nn::TrainConfig &cfg);

/// Negative-ELBO anomaly score: mean over n_samples draws of
/// reconstruction_bce(decoder(z), x) + KL. n_samples = 0 uses z = mu.
/// Throws ConfigError on an untrained model.
double vae_score(const VaeModel &model, std::span<const double> x, std::size_t n_samples,
                 std::uint64_t seed);

/// Row i draws from a stream derived from (seed, i), so results do not
/// depend on how rows are spread across threads.
std::vector<double> score_all(const VaeModel &model, const Samples &data, std::size_t n_samples,
                              std::uint64_t seed);

/// decoder(z); with no z, draws z ~ N(0, I) from `seed`.
std::vector<double> generate(const VaeModel &model, std::optional<std::vector<double>> z,
                             std::uint64_t seed);

} // namespace itd::vae
