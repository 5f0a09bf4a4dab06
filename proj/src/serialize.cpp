#include "itd/serialize.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

namespace itd {

namespace {

constexpr std::array<char, 8> kMagic = {'I', 'T', 'D', 'M', 'O', 'D', 'E', 'L'};

template <typename T> void put_le(std::ostream &out, T value) {
  static_assert(std::is_unsigned_v<T>);
  unsigned char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char *>(bytes), sizeof(T));
}

template <typename T> T get_le(std::istream &in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char *>(bytes), sizeof(T))) {
    throw SchemaError("model file truncated");
  }
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) value |= static_cast<T>(bytes[i]) << (8 * i);
  return value;
}

void put_f64(std::ostream &out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::istream &in) { return std::bit_cast<double>(get_le<std::uint64_t>(in)); }

void write_layer(std::ostream &out, const nn::DenseLayer &l) {
  put_le(out, static_cast<std::uint32_t>(l.in));
  put_le(out, static_cast<std::uint32_t>(l.out));
  put_le(out, static_cast<std::uint8_t>(l.activation));
  for (double w : l.weights) put_f64(out, w);
  for (double b : l.bias) put_f64(out, b);
}

nn::DenseLayer read_layer(std::istream &in) {
  const auto n_in = get_le<std::uint32_t>(in);
  const auto n_out = get_le<std::uint32_t>(in);
  const auto act = get_le<std::uint8_t>(in);
  if (act > static_cast<std::uint8_t>(nn::Activation::Identity)) {
    throw SchemaError(fmt::format("model file: unknown activation tag {}", act));
  }
  nn::DenseLayer l(n_in, n_out, static_cast<nn::Activation>(act));
  for (double &w : l.weights) w = get_f64(in);
  for (double &b : l.bias) b = get_f64(in);
  return l;
}

void write_threshold(std::ostream &out, const std::optional<double> &t) {
  put_le(out, static_cast<std::uint8_t>(t.has_value()));
  put_f64(out, t.value_or(0.0));
}

std::optional<double> read_threshold(std::istream &in) {
  const bool present = get_le<std::uint8_t>(in) != 0;
  const double value = get_f64(in);
  return present ? std::optional<double>(value) : std::nullopt;
}

std::ofstream open_model(const std::filesystem::path &path, const ArtifactHeader &header,
                         ModelKind kind) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(kMagic.data(), kMagic.size());
  put_le(out, kModelFormatVersion);
  put_le(out, header.seed);
  put_le(out, header.config_hash);
  put_le(out, static_cast<std::uint8_t>(kind));
  return out;
}

} // namespace

void write_network(std::ostream &out, const nn::Network &net) {
  put_le(out, static_cast<std::uint32_t>(net.layers.size()));
  for (const auto &l : net.layers) write_layer(out, l);
}

nn::Network read_network(std::istream &in) {
  nn::Network net;
  const auto count = get_le<std::uint32_t>(in);
  for (std::uint32_t i = 0; i < count; ++i) net.layers.push_back(read_layer(in));
  try {
    net.validate();
  } catch (const ConfigError &e) {
    throw SchemaError(std::string("model file: ") + e.what());
  }
  return net;
}

void save_model(const std::filesystem::path &path, const ae::AeModel &model,
                const ArtifactHeader &header) {
  auto out = open_model(path, header, ModelKind::Autoencoder);
  put_le(out, static_cast<std::uint32_t>(model.input_dim));
  put_le(out, static_cast<std::uint32_t>(model.bottleneck));
  put_le(out, static_cast<std::uint8_t>(model.loss));
  write_threshold(out, model.threshold);
  write_network(out, model.net);
  if (!out) throw Error("write failed: " + path.string());
}

void save_model(const std::filesystem::path &path, const vae::VaeModel &model,
                const ArtifactHeader &header) {
  auto out = open_model(path, header, ModelKind::Variational);
  put_le(out, static_cast<std::uint32_t>(model.input_dim));
  put_le(out, static_cast<std::uint32_t>(model.latent_dim));
  put_f64(out, model.kl_weight);
  write_threshold(out, model.threshold);
  write_network(out, model.trunk);
  write_layer(out, model.mu_head);
  write_layer(out, model.logvar_head);
  write_network(out, model.decoder);
  if (!out) throw Error("write failed: " + path.string());
}

ModelFile load_model(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::array<char, 8> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) {
    throw SchemaError(path.string() + ": not an itd model file");
  }
  const auto version = get_le<std::uint32_t>(in);
  if (version != kModelFormatVersion) {
    throw SchemaError(fmt::format("{}: unsupported model format version {}", path.string(), version));
  }
  ModelFile file;
  file.header.seed = get_le<std::uint64_t>(in);
  file.header.config_hash = get_le<std::uint64_t>(in);
  const auto kind = get_le<std::uint8_t>(in);
  if (kind == static_cast<std::uint8_t>(ModelKind::Autoencoder)) {
    ae::AeModel m;
    m.input_dim = get_le<std::uint32_t>(in);
    m.bottleneck = get_le<std::uint32_t>(in);
    const auto loss = get_le<std::uint8_t>(in);
    if (loss > 1) throw SchemaError("model file: unknown loss tag");
    m.loss = static_cast<nn::Loss>(loss);
    m.threshold = read_threshold(in);
    m.net = read_network(in);
    if (m.net.input_dim() != m.input_dim || m.net.output_dim() != m.input_dim) {
      throw SchemaError("model file: autoencoder network does not match its header");
    }
    m.trained = true;
    file.model = std::move(m);
  } else if (kind == static_cast<std::uint8_t>(ModelKind::Variational)) {
    vae::VaeModel m;
    m.input_dim = get_le<std::uint32_t>(in);
    m.latent_dim = get_le<std::uint32_t>(in);
    m.kl_weight = get_f64(in);
    m.threshold = read_threshold(in);
    m.trunk = read_network(in);
    m.mu_head = read_layer(in);
    m.logvar_head = read_layer(in);
    m.decoder = read_network(in);
    if (m.trunk.input_dim() != m.input_dim || m.decoder.output_dim() != m.input_dim ||
        m.mu_head.out != m.latent_dim || m.logvar_head.out != m.latent_dim ||
        m.decoder.input_dim() != m.latent_dim) {
      throw SchemaError("model file: VAE networks do not match its header");
    }
    m.trained = true;
    file.model = std::move(m);
  } else {
    throw SchemaError(fmt::format("model file: unknown model kind {}", kind));
  }
  return file;
}

void write_loss_history(const std::filesystem::path &path, std::span<const double> history,
                        const ArtifactHeader &header) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << header.comment_line() << "\nepoch,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    out << fmt::format("{},{:.17g}\n", i + 1, history[i]);
  }
}

} // namespace itd
