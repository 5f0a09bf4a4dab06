#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace itd {

inline constexpr std::string_view kToolVersion = "0.1.0";

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed record; carries the 1-based line number within its file.
class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string &what);
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// A file's header lacks a column the parser needs.
class SchemaError : public Error {
public:
  using Error::Error;
};

/// Invalid user-supplied setting (dimension, ratio, strategy, path...).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// NaN/Inf in a loss or parameter update.
class NumericError : public Error {
public:
  using Error::Error;
};

using Rng = std::mt19937_64;

/// SplitMix64 finalizer, used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// 64-bit FNV-1a hash, stable across platforms and runs.
std::uint64_t fnv1a(std::string_view text);

/// Provenance carried at the top of every text artifact.
struct ArtifactHeader {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;

  /// `# itd <version> config=<hex> seed=<n>`
  std::string comment_line() const;
};

} // namespace itd
