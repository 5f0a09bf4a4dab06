#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <variant>

#include "itd/ae.hpp"
#include "itd/common.hpp"
#include "itd/nn.hpp"
#include "itd/vae.hpp"

namespace itd {

// Model file, all integers and reals little-endian:
//   "ITDMODEL" | u32 format version | u64 seed | u64 config hash | u8 kind
//   kind 1 (AE):  u32 input_dim | u32 bottleneck | u8 loss | threshold | network
//   kind 2 (VAE): u32 input_dim | u32 latent_dim | f64 kl_weight | threshold |
//                 network trunk | layer mu | layer logvar | network decoder
//   threshold: u8 present | f64 value
//   network:   u32 layer count | layer...
//   layer:     u32 in | u32 out | u8 activation | f64 W[out*in] row-major | f64 b[out]
inline constexpr std::uint32_t kModelFormatVersion = 1;

enum class ModelKind : std::uint8_t { Autoencoder = 1, Variational = 2 };

void write_network(std::ostream &out, const nn::Network &net);
nn::Network read_network(std::istream &in);

struct ModelFile {
  ArtifactHeader header;
  std::variant<ae::AeModel, vae::VaeModel> model;
};

void save_model(const std::filesystem::path &path, const ae::AeModel &model,
                const ArtifactHeader &header);
void save_model(const std::filesystem::path &path, const vae::VaeModel &model,
                const ArtifactHeader &header);
/// Throws SchemaError on a bad magic, version, or truncated file.
ModelFile load_model(const std::filesystem::path &path);

/// `epoch,loss` rows after a provenance comment line.
void write_loss_history(const std::filesystem::path &path, std::span<const double> history,
                        const ArtifactHeader &header);

} // namespace itd
