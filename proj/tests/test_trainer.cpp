#include <cmath>

#include "doctest.h"
#include "itd/trainer.hpp"
#include "support.hpp"

using namespace itd;
using namespace itd::nn;

namespace {

// y = 3x - 1 with a single linear unit: a convex toy problem.
struct LinearToy {
  Network net;
  Samples x, y;
  explicit LinearToy(std::size_t n = 256) {
    const std::vector<std::size_t> sizes{1, 1};
    const std::vector<Activation> acts{Activation::Identity};
    net = make_network(sizes, acts);
    Rng rng(3);
    for (std::size_t i = 0; i < n; ++i) {
      const double v = testing::uniform(rng, -1.0, 1.0);
      x.push_back(std::vector<double>{v});
      y.push_back(std::vector<double>{3.0 * v - 1.0});
    }
  }
};

} // namespace

TEST_CASE("train fits the linear toy problem") {
  LinearToy toy;
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 32;
  cfg.lr = 0.05;
  const auto hist = train(toy.net, toy.x, toy.y, Loss::Mse, cfg);
  CHECK(hist.epoch_loss.size() == 200);
  CHECK(hist.steps == 200 * 8);
  CHECK(hist.epoch_loss.back() < 1e-4);
  CHECK(toy.net.layers[0].weights[0] == doctest::Approx(3.0).epsilon(0.01));
  CHECK(toy.net.layers[0].bias[0] == doctest::Approx(-1.0).epsilon(0.01));
}

TEST_CASE("full-batch unshuffled training is reproducible") {
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.batch_size = 256;
  cfg.shuffle = false;
  cfg.lr = 0.01;
  LinearToy a, b;
  const auto ha = train(a.net, a.x, a.y, Loss::Mse, cfg);
  const auto hb = train(b.net, b.x, b.y, Loss::Mse, cfg);
  CHECK(ha.epoch_loss == hb.epoch_loss);
  CHECK(a.net == b.net);
}

TEST_CASE("the short last batch is kept") {
  LinearToy toy(100);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 30;
  CHECK(train(toy.net, toy.x, toy.y, Loss::Mse, cfg).steps == 12);
}

TEST_CASE("epoch callback sees every epoch") {
  LinearToy toy;
  TrainConfig cfg;
  cfg.epochs = 4;
  std::vector<std::size_t> seen;
  cfg.on_epoch = [&](std::size_t e, double) { seen.push_back(e); };
  train(toy.net, toy.x, toy.y, Loss::Mse, cfg);
  CHECK(seen == std::vector<std::size_t>{0, 1, 2, 3});
}

TEST_CASE("invalid configurations are rejected") {
  LinearToy toy;
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK_THROWS_AS(train(toy.net, toy.x, toy.y, Loss::Mse, cfg), ConfigError);
  cfg.epochs = 1;
  cfg.lr = -1;
  CHECK_THROWS_AS(train(toy.net, toy.x, toy.y, Loss::Mse, cfg), ConfigError);
}

TEST_CASE("divergence aborts with the epoch and step") {
  LinearToy toy;
  for (auto &y : toy.y.row(0)) y = 1e300;
  TrainConfig cfg;
  cfg.epochs = 5;
  try {
    train(toy.net, toy.x, toy.y, Loss::Mse, cfg);
    FAIL("expected NumericError");
  } catch (const NumericError &e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("lr finder leaves the model untouched and sweeps geometrically") {
  LinearToy toy;
  const Network before = toy.net;
  NetworkObjective obj(toy.net, toy.x, toy.y, Loss::Mse);
  LrFinderConfig cfg;
  cfg.lr_min = 1e-4;
  cfg.lr_max = 10.0;
  cfg.steps = 50;
  cfg.batch_size = 32;
  const auto r = lr_finder(obj, cfg);
  CHECK(toy.net == before);
  REQUIRE(r.curve.size() >= 2);
  CHECK(r.curve[0].lr == doctest::Approx(1e-4));
  const double ratio = r.curve[1].lr / r.curve[0].lr;
  for (std::size_t i = 1; i < r.curve.size(); ++i) {
    CHECK(r.curve[i].lr / r.curve[i - 1].lr == doctest::Approx(ratio));
  }
  CHECK(r.suggested_lr > 0.0);
}

TEST_CASE("a single-step sweep suggests lr_min / 10") {
  LinearToy toy;
  NetworkObjective obj(toy.net, toy.x, toy.y, Loss::Mse);
  LrFinderConfig cfg;
  cfg.lr_min = 1e-3;
  cfg.lr_max = 1.0;
  cfg.steps = 1;
  const auto r = lr_finder(obj, cfg);
  CHECK(r.curve.size() == 1);
  CHECK(r.suggested_lr == doctest::Approx(1e-4));
}

TEST_CASE("lr finder rejects bad ranges and unstable sweeps") {
  LinearToy toy;
  NetworkObjective obj(toy.net, toy.x, toy.y, Loss::Mse);
  LrFinderConfig cfg;
  cfg.lr_min = 1.0;
  cfg.lr_max = 0.1;
  CHECK_THROWS_AS(lr_finder(obj, cfg), ConfigError);

  for (auto &y : toy.y.row(0)) y = std::nan("");
  NetworkObjective bad(toy.net, toy.x, toy.y, Loss::Mse);
  LrFinderConfig all;
  all.batch_size = 1024;
  try {
    (void)lr_finder(bad, all);
    FAIL("expected NumericError");
  } catch (const NumericError &e) {
    CHECK(std::string(e.what()).find("no stable learning rate in range") != std::string::npos);
  }
}

TEST_CASE("one epoch with a batch covering the data is one step") {
  LinearToy toy(100);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 100;
  CHECK(train(toy.net, toy.x, toy.y, Loss::Mse, cfg).steps == 1);
  cfg.batch_size = 1000;
  CHECK(train(toy.net, toy.x, toy.y, Loss::Mse, cfg).steps == 1);
}

TEST_CASE("autoencoding one repeated vector drives the loss down tenfold") {
  const std::vector<std::size_t> sizes{12, 6, 12};
  const std::vector<Activation> acts{Activation::Tanh, Activation::Sigmoid};
  Network net = make_network(sizes, acts);
  glorot_init(net, 2);
  Samples x;
  const std::vector<double> v{1, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 0};
  for (int i = 0; i < 64; ++i) x.push_back(v);
  TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 16;
  cfg.lr = 1e-2;
  const auto hist = train(net, x, x, Loss::Bce, cfg);
  CHECK(hist.epoch_loss.back() < hist.epoch_loss.front() / 10.0);
}

TEST_CASE("a fixed seed reproduces the final weights bit for bit") {
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.batch_size = 16;
  cfg.seed = 99;
  LinearToy a, b;
  train(a.net, a.x, a.y, Loss::Mse, cfg);
  train(b.net, b.x, b.y, Loss::Mse, cfg);
  CHECK(a.net == b.net);
  cfg.seed = 100;
  LinearToy c;
  train(c.net, c.x, c.y, Loss::Mse, cfg);
  CHECK_FALSE(a.net == c.net);
}
