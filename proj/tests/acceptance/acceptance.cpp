// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "../support.hpp"
#include "itd/ae.hpp"
#include "itd/eval.hpp"
#include "itd/features.hpp"
#include "itd/nadam.hpp"
#include "itd/nn.hpp"
#include "itd/trainer.hpp"
#include "itd/vae.hpp"
#include "json.hpp"

using namespace itd;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// 1. Backprop and the VAE gradient against central differences.
Outcome gradient_correctness() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst_nn = 0.0;
  const std::vector<std::size_t> sizes{38, 16, 38};
  const std::vector<nn::Activation> acts{nn::Activation::Tanh, nn::Activation::Sigmoid};
  for (int trial = 0; trial < 100; ++trial) {
    nn::Network net = nn::make_network(sizes, acts);
    nn::glorot_init(net, 1000 + trial);
    for (auto &l : net.layers) {
      for (auto &b : l.bias) b = testing::uniform(rng, -0.5, 0.5);
    }
    const Samples x = testing::random_binary_samples(rng, 2, 38);
    const Samples mse_t = testing::random_samples(rng, 2, 38, 0.0, 1.0);
    const auto bce = nn::backprop(net, x, x, nn::Loss::Bce);
    worst_nn = std::max(worst_nn, nn::max_relative_error(
                                      bce.grad, nn::fd_gradient(net, x, x, nn::Loss::Bce, 1e-5)));
    const auto mse = nn::backprop(net, x, mse_t, nn::Loss::Mse);
    worst_nn = std::max(worst_nn, nn::max_relative_error(
                                      mse.grad, nn::fd_gradient(net, x, mse_t, nn::Loss::Mse, 1e-5)));
  }

  vae::VaeModel m = vae::build_vae(38, 2, 7, {8});
  auto p = vae::flatten(m);
  for (double &v : p) v = testing::uniform(rng, -0.5, 0.5);
  vae::unflatten(m, p);
  const Samples x = testing::random_binary_samples(rng, 4, 38);
  const Samples eps = testing::random_samples(rng, 4, 2, -1.5, 1.5);
  const double worst_vae = nn::max_relative_error(vae::batch_gradient(m, x, eps).grad,
                                                  vae::fd_gradient(m, x, eps, 1e-5));
  const double secs = seconds_since(t0);
  return {worst_nn <= 1e-4 && worst_vae <= 1e-4 && secs < 30.0,
          fmt::format("max rel err nn {:.2e}, vae {:.2e}; {:.1f}s", worst_nn, worst_vae, secs)};
}

// 2. Metrics against a brute-force recount, plus two fixed F1 values.
Outcome metric_oracle() {
  Rng rng(202);
  const auto preds = testing::random_bits(rng, 1000, 0.4);
  const auto labels = testing::random_bits(rng, 1000, 0.3);
  double tp = 0, fp = 0, tn = 0, fn = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    if (preds[i] && labels[i]) tp += 1;
    if (preds[i] && !labels[i]) fp += 1;
    if (!preds[i] && !labels[i]) tn += 1;
    if (!preds[i] && labels[i]) fn += 1;
  }
  const double acc = (tp + tn) / 1000.0;
  const double prec = tp / (tp + fp);
  const double rec = tp / (tp + fn);
  const double f = 2 * prec * rec / (prec + rec);
  const auto r = eval::make_report("x", eval::confusion(preds, labels));
  const double err = std::max({std::abs(*r.accuracy - acc), std::abs(*r.precision - prec),
                               std::abs(*r.recall - rec), std::abs(*r.f1 - f)});
  const double f_vae = eval::f1(0.92, 0.96).value();
  const double f_ae = eval::f1(0.90, 0.95).value();
  const bool table = std::abs(f_vae - 0.9396) <= 5e-5 && std::abs(f_ae - 0.9243) <= 5e-5 &&
                     eval::percent(f_vae) == "94%" && eval::percent(f_ae) == "92%";
  return {err <= 1e-12 && table,
          fmt::format("max abs err {:.1e}; F1 {:.4f} -> {}, {:.4f} -> {}", err, f_vae,
                      eval::percent(f_vae), f_ae, eval::percent(f_ae))};
}

// 3. Closed-form KL against a Monte-Carlo estimate of E_q[log q - log p].
Outcome kl_correctness() {
  Rng rng(303);
  std::normal_distribution<double> normal(0.0, 1.0);
  constexpr double kLog2Pi = 1.8378770664093453;
  double worst = 0.0;
  for (int pair = 0; pair < 20; ++pair) {
    std::vector<double> mu(2), lv(2);
    for (std::size_t k = 0; k < 2; ++k) {
      const double mag = testing::uniform(rng, 0.5, 2.0);
      mu[k] = testing::uniform_int(rng, 0, 1) ? mag : -mag;
      lv[k] = testing::uniform(rng, -1.5, 1.5);
    }
    // Antithetic pairs (eps, -eps): same sample count, and the zero-mean
    // term linear in eps cancels within each pair.
    double sum = 0.0;
    const int n = 100000;
    std::vector<double> eps(2);
    for (int s = 0; s < n; ++s) {
      if (s % 2 == 0) {
        for (double &e : eps) e = normal(rng);
      } else {
        for (double &e : eps) e = -e;
      }
      double log_ratio = 0.0;
      for (std::size_t k = 0; k < 2; ++k) {
        const double sd = std::exp(0.5 * lv[k]);
        const double z = mu[k] + sd * eps[k];
        const double log_q = -0.5 * (kLog2Pi + lv[k] + (z - mu[k]) * (z - mu[k]) / (sd * sd));
        const double log_p = -0.5 * (kLog2Pi + z * z);
        log_ratio += log_q - log_p;
      }
      sum += log_ratio;
    }
    const double mc = sum / n;
    const double exact = vae::kl_divergence(mu, lv);
    worst = std::max(worst, std::abs(exact - mc) / mc);
  }
  const double at_prior = vae::kl_divergence(std::vector<double>{0.0, 0.0},
                                             std::vector<double>{0.0, 0.0});
  return {worst <= 0.01 && at_prior == 0.0,
          fmt::format("max rel dev {:.3f}%; KL(0, 0) = {}", worst * 100.0, at_prior)};
}

// 4. One-hot encoding is a bijection and activity codes run 1..7.
Outcome encoding_bijectivity() {
  std::size_t ok = 0;
  for (int d = 0; d <= 6; ++d) {
    for (int t = 1; t <= 24; ++t) {
      for (int a = 1; a <= 7; ++a) {
        EncodedEvent e;
        e.day = d;
        e.time = t;
        e.activity_code = a;
        const auto back = decode_one_hot(one_hot(e).bits);
        ok += back && back->day == d && back->time == t && back->activity_code == a;
      }
    }
  }
  const std::vector<std::pair<ActivityKind, int>> table{
      {ActivityKind::Logon, 1}, {ActivityKind::Logoff, 2}, {ActivityKind::Connect, 3},
      {ActivityKind::Disconnect, 4}, {ActivityKind::Email, 5}, {ActivityKind::File, 6},
      {ActivityKind::Http, 7}};
  std::size_t codes = 0;
  for (const auto &[kind, code] : table) codes += encode_activity(kind) == code;
  return {ok == 1176 && codes == 7, fmt::format("{}/1176 round-trips, {}/7 codes", ok, codes)};
}

// 5. Default layer sizes and latent heads.
Outcome architecture() {
  const auto sizes = ae::build_ae(50).net.sizes();
  const auto v = vae::build_vae(50);
  const bool ae_ok = sizes == std::vector<std::size_t>{50, 100, 50, 50, 50, 100, 50};
  std::string shape;
  for (std::size_t i = 0; i < sizes.size(); ++i) shape += (i ? "-" : "") + std::to_string(sizes[i]);
  return {ae_ok && v.mu_head.out == 2 && v.logvar_head.out == 2,
          fmt::format("AE {}; VAE heads {}/{}", shape, v.mu_head.out, v.logvar_head.out)};
}

int run_itd(const std::string &args, const std::filesystem::path &log) {
  const std::string cmd =
      std::string("\"") + ITD_BINARY + "\" " + args + " >\"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string desk_args(const std::filesystem::path &out) {
  return "pipeline --synth --users 100 --insiders 10 --days 60 --synth-seed 1 --seed 1 "
         "--ae-epochs 30 --ae-batch 256 --vae-epochs 200 --vae-batch 128 "
         "--threshold maxf1 --out \"" + out.string() + "\"";
}

// 6. Detection quality at desk scale.
Outcome desk_scale(const testing::ScratchDir &dir) {
  const auto t0 = Clock::now();
  const int code = run_itd(desk_args(dir / "run1"), dir / "run1.log");
  const double secs = seconds_since(t0);
  if (code != 0) return {false, fmt::format("pipeline exited {}: {}", code, slurp(dir / "run1.log"))};
  const auto j = nlohmann::json::parse(slurp(dir / "run1" / "report.json"));
  auto metric = [&](std::size_t i, const char *k) {
    const auto &v = j["reports"][i][k];
    return v.is_null() ? 0.0 : v.get<double>();
  };
  const double ae_f1 = metric(0, "f1"), ae_acc = metric(0, "accuracy");
  const double vae_f1 = metric(1, "f1"), vae_acc = metric(1, "accuracy");
  const bool pass = ae_f1 >= 0.85 && vae_f1 >= 0.85 && ae_acc >= 0.90 && vae_acc >= 0.90 &&
                    vae_f1 >= ae_f1 - 0.05 && secs <= 600.0;
  return {pass, fmt::format("AE F1 {:.4f} acc {:.4f}; VAE F1 {:.4f} acc {:.4f}; {:.0f}s", ae_f1,
                            ae_acc, vae_f1, vae_acc, secs)};
}

// 7. A second identical run reproduces report.json byte for byte.
Outcome determinism(const testing::ScratchDir &dir) {
  if (!std::filesystem::exists(dir / "run1" / "report.json")) {
    const int code = run_itd(desk_args(dir / "run1"), dir / "run1.log");
    if (code != 0) return {false, fmt::format("first run exited {}", code)};
  }
  const int code = run_itd(desk_args(dir / "run2"), dir / "run2.log");
  if (code != 0) return {false, fmt::format("second run exited {}", code)};
  const std::string a = slurp(dir / "run1" / "report.json");
  const std::string b = slurp(dir / "run2" / "report.json");
  return {!a.empty() && a == b, fmt::format("{} bytes, {}", a.size(), a == b ? "identical" : "differ")};
}

// 8. The lr finder suggestion falls inside the bracket found by training
// fresh copies at fixed learning rates.
Outcome lr_finder_sanity() {
  Samples x, y;
  Rng rng(808);
  for (int i = 0; i < 512; ++i) {
    const double v = testing::uniform(rng, -1.0, 1.0);
    x.push_back(std::vector<double>{v});
    y.push_back(std::vector<double>{3.0 * v - 1.0});
  }
  const std::vector<std::size_t> sizes{1, 1};
  const std::vector<nn::Activation> acts{nn::Activation::Identity};
  const nn::Network base = nn::make_network(sizes, acts);

  nn::LrFinderConfig cfg;
  cfg.lr_min = 1e-5;
  cfg.lr_max = 1e3;
  cfg.steps = 100;
  cfg.batch_size = 64;
  nn::Network probe = base;
  nn::NetworkObjective obj(probe, x, y, nn::Loss::Mse);
  const double suggested = nn::lr_finder(obj, cfg).suggested_lr;

  // Full-batch loss after a fixed number of steps at each grid lr.
  const double initial = nn::batch_loss(base, x, y, nn::Loss::Mse);
  double first_decrease = 0.0, first_diverge = 0.0;
  const int grid = 81;
  for (int k = 0; k < grid; ++k) {
    const double lr = cfg.lr_min * std::pow(cfg.lr_max / cfg.lr_min, k / double(grid - 1));
    nn::Network net = base;
    nn::NadamState state(net.param_count(), nn::NadamParams{lr});
    auto params = nn::flatten(net);
    bool blew_up = false;
    for (int step = 0; step < 20; ++step) {
      const auto g = nn::backprop(net, x, y, nn::Loss::Mse);
      if (!std::isfinite(g.loss)) {
        blew_up = true;
        break;
      }
      state.apply(params, g.grad);
      nn::unflatten(net, params);
    }
    const double final_loss = nn::batch_loss(net, x, y, nn::Loss::Mse);
    if (first_decrease == 0.0 && final_loss <= 0.99 * initial) first_decrease = lr;
    if (first_diverge == 0.0 && (blew_up || !(final_loss <= initial))) first_diverge = lr;
  }
  const bool pass = first_decrease > 0.0 && first_diverge > 0.0 && suggested >= first_decrease &&
                    suggested <= first_diverge;
  return {pass, fmt::format("suggested {:.3g} in [{:.3g}, {:.3g}]", suggested, first_decrease,
                            first_diverge)};
}

// 9. NADAM against the hand-worked step and the beta1 = 0 reduction.
Outcome nadam_regression() {
  std::vector<double> theta{1.0};
  nn::NadamState state(1, nn::NadamParams{0.001, 0.9, 0.999, 1e-8});
  state.apply(theta, std::vector<double>{1.0});
  const double hand_err = std::abs(theta[0] - 0.998100000019);

  Rng rng(909);
  const nn::NadamParams hp{0.01, 0.0, 0.999, 1e-8};
  std::vector<double> a = testing::random_vector(rng, 6);
  std::vector<double> b = a;
  std::vector<double> v(6, 0.0);
  nn::NadamState rms(6, hp);
  double worst = 0.0;
  for (int t = 1; t <= 10; ++t) {
    const auto g = testing::random_vector(rng, 6);
    rms.apply(a, g);
    for (std::size_t i = 0; i < 6; ++i) {
      v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
      b[i] -= hp.lr * g[i] / (std::sqrt(v[i] / (1.0 - std::pow(hp.beta2, t))) + hp.eps);
      worst = std::max(worst, std::abs(a[i] - b[i]));
    }
  }
  return {hand_err <= 1e-12 && worst <= 1e-12,
          fmt::format("single step {:.12f} (err {:.1e}); RMSProp max diff {:.1e}", theta[0],
                      hand_err, worst)};
}

} // namespace

int main() {
  testing::ScratchDir dir("acceptance");
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"metric oracle equivalence", metric_oracle},
      {"KL correctness", kl_correctness},
      {"encoding bijectivity", encoding_bijectivity},
      {"architecture conformance", architecture},
      {"desk-scale detection", [&] { return desk_scale(dir); }},
      {"determinism", [&] { return determinism(dir); }},
      {"lr finder sanity", lr_finder_sanity},
      {"nadam regression", nadam_regression},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception &e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
