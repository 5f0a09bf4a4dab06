#include "itd/vae.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

namespace itd::vae {

using nn::Activation;

std::size_t VaeModel::param_count() const {
  return trunk.param_count() + mu_head.param_count() + logvar_head.param_count() +
         decoder.param_count();
}

VaeModel build_vae(std::size_t input_dim, std::size_t latent_dim, std::uint64_t seed,
                   std::vector<std::size_t> hidden) {
  if (input_dim == 0 || latent_dim == 0) throw ConfigError("build_vae: dimensions must be >= 1");
  if (hidden.empty()) hidden = {2 * input_dim, input_dim};

  VaeModel model;
  model.input_dim = input_dim;
  model.latent_dim = latent_dim;

  std::vector<std::size_t> enc_sizes{input_dim};
  enc_sizes.insert(enc_sizes.end(), hidden.begin(), hidden.end());
  model.trunk = nn::make_network(enc_sizes, std::vector<Activation>(hidden.size(), Activation::Tanh));

  model.mu_head = nn::DenseLayer(hidden.back(), latent_dim, Activation::Identity);
  model.logvar_head = nn::DenseLayer(hidden.back(), latent_dim, Activation::Identity);

  std::vector<std::size_t> dec_sizes{latent_dim};
  dec_sizes.insert(dec_sizes.end(), hidden.rbegin(), hidden.rend());
  dec_sizes.push_back(input_dim);
  std::vector<Activation> dec_acts(hidden.size(), Activation::Relu);
  dec_acts.push_back(Activation::Sigmoid);
  model.decoder = nn::make_network(dec_sizes, dec_acts);

  Rng rng(seed);
  for (auto &l : model.trunk.layers) nn::glorot_init(l, rng);
  nn::glorot_init(model.mu_head, rng);
  nn::glorot_init(model.logvar_head, rng);
  for (auto &l : model.decoder.layers) nn::glorot_init(l, rng);
  return model;
}

nn::TrainConfig default_train_config() {
  nn::TrainConfig cfg;
  cfg.epochs = 1000;
  cfg.batch_size = 128;
  return cfg;
}

std::vector<double> flatten(const VaeModel &model) {
  std::vector<double> out;
  out.reserve(model.param_count());
  for (const auto &l : model.trunk.layers) nn::append_params(l, out);
  nn::append_params(model.mu_head, out);
  nn::append_params(model.logvar_head, out);
  for (const auto &l : model.decoder.layers) nn::append_params(l, out);
  return out;
}

void unflatten(VaeModel &model, std::span<const double> params) {
  if (params.size() != model.param_count()) {
    throw ConfigError(fmt::format("vae unflatten: expected {} parameters, got {}",
                                  model.param_count(), params.size()));
  }
  std::size_t offset = 0;
  for (auto &l : model.trunk.layers) offset += nn::assign_params(l, params.subspan(offset));
  offset += nn::assign_params(model.mu_head, params.subspan(offset));
  offset += nn::assign_params(model.logvar_head, params.subspan(offset));
  for (auto &l : model.decoder.layers) offset += nn::assign_params(l, params.subspan(offset));
}

namespace {

std::vector<double> apply_head(const nn::DenseLayer &head, std::span<const double> h) {
  std::vector<double> out(head.out);
  head.apply(h, {}, out);
  return out;
}

void check_input(const VaeModel &model, std::span<const double> x) {
  if (x.size() != model.input_dim) {
    throw ConfigError(fmt::format("vae: input has {} values, model expects {}", x.size(),
                                  model.input_dim));
  }
}

} // namespace

Encoding encode(const VaeModel &model, std::span<const double> x) {
  check_input(model, x);
  const auto h = nn::predict(model.trunk, x);
  return {apply_head(model.mu_head, h), apply_head(model.logvar_head, h)};
}

std::vector<double> reparameterize(std::span<const double> mu, std::span<const double> logvar,
                                   std::span<const double> eps) {
  if (mu.size() != logvar.size() || mu.size() != eps.size()) {
    throw ConfigError("reparameterize: shape mismatch");
  }
  std::vector<double> z(mu.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = mu[i] + std::exp(0.5 * logvar[i]) * eps[i];
  return z;
}

double kl_divergence(std::span<const double> mu, std::span<const double> logvar) {
  if (mu.size() != logvar.size()) throw ConfigError("kl_divergence: shape mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    sum += mu[i] * mu[i] + std::exp(logvar[i]) - 1.0 - logvar[i];
  }
  return 0.5 * sum;
}

double reconstruction_bce(std::span<const double> output, std::span<const double> target) {
  return nn::example_loss(nn::Loss::Bce, output, target) * static_cast<double>(output.size());
}

double example_loss(const VaeModel &model, std::span<const double> x, std::span<const double> eps) {
  const Encoding e = encode(model, x);
  const auto z = reparameterize(e.mu, e.logvar, eps);
  return reconstruction_bce(nn::predict(model.decoder, z), x) +
         model.kl_weight * kl_divergence(e.mu, e.logvar);
}

double accumulate_gradient(const VaeModel &model, std::span<const double> x,
                           std::span<const double> eps, std::span<double> grad) {
  check_input(model, x);
  const std::size_t trunk_params = model.trunk.param_count();
  const std::size_t mu_params = model.mu_head.param_count();
  const std::size_t lv_params = model.logvar_head.param_count();
  const std::span<double> g_trunk = grad.subspan(0, trunk_params);
  const std::span<double> g_mu = grad.subspan(trunk_params, mu_params);
  const std::span<double> g_lv = grad.subspan(trunk_params + mu_params, lv_params);
  const std::span<double> g_dec = grad.subspan(trunk_params + mu_params + lv_params);

  const nn::Trace enc = nn::forward(model.trunk, x);
  const auto &h = enc.output();
  const auto mu = apply_head(model.mu_head, h);
  const auto lv = apply_head(model.logvar_head, h);
  const std::size_t k = model.latent_dim;

  std::vector<double> sigma(k), z(k);
  for (std::size_t i = 0; i < k; ++i) {
    sigma[i] = std::exp(0.5 * lv[i]);
    z[i] = mu[i] + sigma[i] * eps[i];
  }
  const nn::Trace dec = nn::forward(model.decoder, z);
  const auto &y = dec.output();
  const double loss = reconstruction_bce(y, x) + model.kl_weight * kl_divergence(mu, lv);

  // Sigmoid + summed BCE: dL/d(pre-activation) = y - x.
  std::vector<double> delta(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) delta[i] = y[i] - x[i];
  const auto dz = nn::backward(model.decoder, dec, std::move(delta), g_dec, true);

  const double w = model.kl_weight;
  std::vector<double> dmu(k), dlv(k);
  for (std::size_t i = 0; i < k; ++i) {
    dmu[i] = dz[i] + w * mu[i];
    dlv[i] = dz[i] * eps[i] * 0.5 * sigma[i] + w * 0.5 * (sigma[i] * sigma[i] - 1.0);
  }

  std::vector<double> dh(h.size(), 0.0);
  auto head_backward = [&](const nn::DenseLayer &head, const std::vector<double> &d,
                           std::span<double> g) {
    double *gw = g.data();
    double *gb = gw + head.weights.size();
    for (std::size_t r = 0; r < head.out; ++r) {
      for (std::size_t c = 0; c < head.in; ++c) {
        gw[r * head.in + c] += d[r] * h[c];
        dh[c] += head.w(r, c) * d[r];
      }
      gb[r] += d[r];
    }
  };
  head_backward(model.mu_head, dmu, g_mu);
  head_backward(model.logvar_head, dlv, g_lv);

  const auto &top = model.trunk.layers.back();
  for (std::size_t c = 0; c < dh.size(); ++c) {
    dh[c] *= nn::activate_derivative(top.activation, enc.pre.back()[c], h[c]);
  }
  nn::backward(model.trunk, enc, std::move(dh), g_trunk);
  return loss;
}

nn::BatchResult batch_gradient(const VaeModel &model, const Samples &x, const Samples &eps) {
  if (x.empty() || x.size() != eps.size() || x.dim() != model.input_dim ||
      eps.dim() != model.latent_dim) {
    throw ConfigError("vae batch_gradient: bad batch shape");
  }
  const std::size_t n = x.size();
  const std::size_t p = model.param_count();
  const std::size_t chunks = (n + nn::kReductionChunk - 1) / nn::kReductionChunk;
  std::vector<std::vector<double>> partial(chunks);
  std::vector<double> partial_loss(chunks, 0.0);

#pragma omp parallel for schedule(static)
  for (std::size_t c = 0; c < chunks; ++c) {
    partial[c].assign(p, 0.0);
    const std::size_t end = std::min(n, (c + 1) * nn::kReductionChunk);
    for (std::size_t i = c * nn::kReductionChunk; i < end; ++i) {
      partial_loss[c] += accumulate_gradient(model, x.row(i), eps.row(i), partial[c]);
    }
  }

  nn::BatchResult result;
  result.grad.assign(p, 0.0);
  for (std::size_t c = 0; c < chunks; ++c) {
    for (std::size_t j = 0; j < p; ++j) result.grad[j] += partial[c][j];
    result.loss += partial_loss[c];
  }
  const double inv = 1.0 / static_cast<double>(n);
  for (double &g : result.grad) g *= inv;
  result.loss *= inv;
  if (!std::isfinite(result.loss)) throw NumericError("vae: non-finite batch loss");
  return result;
}

std::vector<double> fd_gradient(const VaeModel &model, const Samples &x, const Samples &eps,
                                double step) {
  if (!(step > 0.0)) throw ConfigError("fd_gradient: step must be positive");
  auto mean_loss = [&](const VaeModel &m) {
    double sum = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) sum += example_loss(m, x.row(i), eps.row(i));
    return sum / static_cast<double>(x.size());
  };
  VaeModel probe = model;
  std::vector<double> params = flatten(model);
  std::vector<double> grad(params.size());
  for (std::size_t j = 0; j < params.size(); ++j) {
    const double saved = params[j];
    params[j] = saved + step;
    unflatten(probe, params);
    const double up = mean_loss(probe);
    params[j] = saved - step;
    unflatten(probe, params);
    const double down = mean_loss(probe);
    params[j] = saved;
    grad[j] = (up - down) / (2.0 * step);
  }
  return grad;
}

VaeObjective::VaeObjective(VaeModel &model, const Samples &data) : model_(&model), data_(&data) {
  if (data.dim() != model.input_dim) throw ConfigError("vae: data width does not match the model");
}

nn::BatchResult VaeObjective::gradient(std::span<const std::size_t> rows, Rng &rng) const {
  Samples eps(rows.size(), model_->latent_dim);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (double &e : eps.row(i)) e = normal(rng);
  }
  return batch_gradient(*model_, data_->gather(rows), eps);
}

std::unique_ptr<nn::Trainable> VaeObjective::clone() const {
  auto copy = std::make_shared<VaeModel>(*model_);
  auto out = std::make_unique<VaeObjective>(*copy, *data_);
  out->owned_ = std::move(copy);
  return out;
}

void train_vae(VaeModel &model, const Samples &train, const nn::TrainConfig &cfg) {
  VaeObjective objective(model, train);
  const nn::TrainHistory history = nn::train(objective, cfg);
  model.loss_history.insert(model.loss_history.end(), history.epoch_loss.begin(),
                            history.epoch_loss.end());
  model.trained = true;
}

double vae_score(const VaeModel &model, std::span<const double> x, std::size_t n_samples,
                 std::uint64_t seed) {
  if (!model.trained) throw ConfigError("vae_score: model is untrained");
  const Encoding e = encode(model, x);
  const double kl = kl_divergence(e.mu, e.logvar);
  if (n_samples == 0) return reconstruction_bce(nn::predict(model.decoder, e.mu), x) + kl;

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> eps(model.latent_dim);
  double sum = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    for (double &v : eps) v = normal(rng);
    sum += reconstruction_bce(nn::predict(model.decoder, reparameterize(e.mu, e.logvar, eps)), x);
  }
  return sum / static_cast<double>(n_samples) + kl;
}

std::vector<double> score_all(const VaeModel &model, const Samples &data, std::size_t n_samples,
                              std::uint64_t seed) {
  if (!model.trained) throw ConfigError("score_all: model is untrained");
  std::vector<double> scores(data.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < data.size(); ++i) {
    scores[i] = vae_score(model, data.row(i), n_samples, mix_seed(seed, i));
  }
  return scores;
}

std::vector<double> generate(const VaeModel &model, std::optional<std::vector<double>> z,
                             std::uint64_t seed) {
  if (!z) {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    z.emplace(model.latent_dim);
    for (double &v : *z) v = normal(rng);
  }
  if (z->size() != model.latent_dim) {
    throw ConfigError(fmt::format("generate: latent vector has {} values, model expects {}",
                                  z->size(), model.latent_dim));
  }
  return nn::predict(model.decoder, *z);
}

} // namespace itd::vae
