#pragma once

// Small helpers shared by the test binaries: seeded generators for property
// tests and a scratch directory that cleans up after itself.

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "itd/common.hpp"
#include "itd/samples.hpp"

namespace itd::testing {

inline double uniform(Rng &rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng &rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline std::vector<double> random_vector(Rng &rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (auto &x : v) x = uniform(rng, lo, hi);
  return v;
}

inline std::vector<std::uint8_t> random_bits(Rng &rng, std::size_t n, double p = 0.5) {
  std::bernoulli_distribution coin(p);
  std::vector<std::uint8_t> v(n);
  for (auto &b : v) b = coin(rng) ? 1 : 0;
  return v;
}

inline Samples random_samples(Rng &rng, std::size_t rows, std::size_t dim, double lo = -1.0,
                              double hi = 1.0) {
  Samples s(rows, dim);
  for (std::size_t i = 0; i < rows; ++i) {
    for (auto &x : s.row(i)) x = uniform(rng, lo, hi);
  }
  return s;
}

inline Samples random_binary_samples(Rng &rng, std::size_t rows, std::size_t dim) {
  Samples s(rows, dim);
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < rows; ++i) {
    for (auto &x : s.row(i)) x = coin(rng) ? 1.0 : 0.0;
  }
  return s;
}

class ScratchDir {
public:
  explicit ScratchDir(const std::string &tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("itd-" + tag + "-" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  ScratchDir(const ScratchDir &) = delete;
  ScratchDir &operator=(const ScratchDir &) = delete;
  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

} // namespace itd::testing
