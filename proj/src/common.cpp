#include "itd/common.hpp"

#include <fmt/format.h>

namespace itd {

ParseError::ParseError(std::size_t line, const std::string &what)
    : Error(fmt::format("line {}: {}", line, what)), line_(line) {}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string ArtifactHeader::comment_line() const {
  return fmt::format("# itd {} config={:016x} seed={}", kToolVersion,
                     config_hash, seed);
}

} // namespace itd
