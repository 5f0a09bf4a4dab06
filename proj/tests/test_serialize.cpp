#include <fstream>
#include <sstream>

#include "doctest.h"
#include "itd/serialize.hpp"
#include "support.hpp"

using namespace itd;

TEST_CASE("network stream round-trip") {
  const auto net = ae::build_ae(38, 6, 3).net;
  std::stringstream buf;
  write_network(buf, net);
  CHECK(read_network(buf) == net);
  std::stringstream cut(buf.str().substr(0, 20));
  CHECK_THROWS_AS(read_network(cut), SchemaError);
}

TEST_CASE("autoencoder model round-trip keeps the threshold") {
  testing::ScratchDir dir("ser-ae");
  auto m = ae::build_ae(50, 0, 11);
  m.threshold = 0.125;
  m.trained = true;
  save_model(dir / "ae.model", m, {0x1234, 9});
  const ModelFile f = load_model(dir / "ae.model");
  CHECK(f.header.config_hash == 0x1234);
  CHECK(f.header.seed == 9);
  const auto &back = std::get<ae::AeModel>(f.model);
  CHECK(back.net == m.net);
  CHECK(back.threshold == m.threshold);
  CHECK(back.trained);
  CHECK(back.bottleneck == 50);
}

TEST_CASE("VAE model round-trip") {
  testing::ScratchDir dir("ser-vae");
  auto m = vae::build_vae(38, 3, 5);
  m.kl_weight = 0.5;
  m.trained = true;
  save_model(dir / "vae.model", m, {1, 2});
  const auto back = std::get<vae::VaeModel>(load_model(dir / "vae.model").model);
  CHECK(vae::flatten(back) == vae::flatten(m));
  CHECK(back.latent_dim == 3);
  CHECK(back.kl_weight == 0.5);
  CHECK_FALSE(back.threshold.has_value());
}

TEST_CASE("unreadable model files are rejected") {
  testing::ScratchDir dir("ser-bad");
  { std::ofstream(dir / "junk.model") << "definitely not a model"; }
  CHECK_THROWS_AS(load_model(dir / "junk.model"), SchemaError);
  CHECK_THROWS_AS(load_model(dir / "missing.model"), ConfigError);

  save_model(dir / "ok.model", ae::build_ae(38), {});
  std::ifstream in(dir / "ok.model", std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  { std::ofstream(dir / "short.model", std::ios::binary) << bytes.substr(0, bytes.size() / 2); }
  CHECK_THROWS_AS(load_model(dir / "short.model"), SchemaError);
}

TEST_CASE("loss history file lists one epoch per line") {
  testing::ScratchDir dir("ser-loss");
  write_loss_history(dir / "loss.csv", std::vector<double>{1.0, 0.5}, {0xff, 3});
  std::ifstream in(dir / "loss.csv");
  std::string first;
  std::getline(in, first);
  CHECK(first == ArtifactHeader{0xff, 3}.comment_line());
  std::string rest((std::istreambuf_iterator<char>(in)), {});
  CHECK(rest.find("epoch,loss") != std::string::npos);
  CHECK(std::count(rest.begin(), rest.end(), '\n') == 3);
}
