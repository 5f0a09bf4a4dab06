#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "itd/common.hpp"
#include "itd/ingest.hpp"
#include "itd/samples.hpp"

namespace itd {

inline constexpr std::size_t kDayBits = 7;
inline constexpr std::size_t kHourBits = 24;
inline constexpr std::size_t kActivityBits = 7;
inline constexpr std::size_t kHourOffset = kDayBits;
inline constexpr std::size_t kActivityOffset = kDayBits + kHourBits;
inline constexpr std::size_t kNaturalDim = kDayBits + kHourBits + kActivityBits;
inline constexpr std::size_t kDefaultPadTo = 50;

/// Logon=1, Logoff=2, Connect=3, Disconnect=4, Email=5, File=6, Http=7.
int encode_activity(ActivityKind kind);
/// Inverse of encode_activity; throws std::out_of_range outside 1..7.
ActivityKind decode_activity(int code);

struct DayTime {
  int day = 0;  ///< 0 = Monday .. 6 = Sunday
  int time = 1; ///< clock hour + 1, so 00:xx -> 1 and 23:xx -> 24

  friend bool operator==(const DayTime &, const DayTime &) = default;
};

DayTime split_timestamp(Timestamp ts);

struct EncodedEvent {
  std::string user;
  int day = 0;
  int time = 1;
  int activity_code = 1;
  std::uint8_t insider = 0;

  friend bool operator==(const EncodedEvent &, const EncodedEvent &) = default;
};

/// Throws ConfigError when any field is outside its range.
void validate(const EncodedEvent &event);

EncodedEvent encode_event(const LogEvent &event);
std::vector<EncodedEvent> encode_events(std::span<const LogEvent> events);

/// insider = 1 iff the event's user is in `roster`.
std::vector<EncodedEvent> label_insiders(std::vector<EncodedEvent> events,
                                         const std::set<std::string> &roster);

struct FeatureOptions {
  /// Zero-pad the 38 natural bits up to this width; 38 disables padding.
  std::size_t pad_to = kDefaultPadTo;
  /// Put the insider label into the input at bit 38.
  bool label_as_feature = false;

  std::size_t dimension() const;
};

struct FeatureVector {
  std::vector<std::uint8_t> bits;
  std::uint8_t label = 0;

  friend bool operator==(const FeatureVector &, const FeatureVector &) = default;
  friend auto operator<=>(const FeatureVector &, const FeatureVector &) = default;
};

/// Bits: day at d, hour at 7+(t-1), activity at 31+(a-1). Throws ConfigError
/// if pad_to < 38 or the event is out of range.
FeatureVector one_hot(const EncodedEvent &event, std::size_t pad_to = kDefaultPadTo);
FeatureVector one_hot(const EncodedEvent &event, const FeatureOptions &options);
std::vector<FeatureVector> one_hot_all(std::span<const EncodedEvent> events,
                                       const FeatureOptions &options);

struct DecodedEvent {
  int day = 0;
  int time = 1;
  int activity_code = 1;

  friend bool operator==(const DecodedEvent &, const DecodedEvent &) = default;
};

/// Exact inverse of one_hot: nullopt unless each group has exactly one bit.
/// Bits past 38 are ignored.
std::optional<DecodedEvent> decode_one_hot(std::span<const std::uint8_t> bits);

/// Argmax within each group; maps a real-valued reconstruction to the closest
/// valid encoding.
DecodedEvent nearest_one_hot(std::span<const double> values);

struct DataSplit {
  std::vector<FeatureVector> train;
  std::vector<FeatureVector> test;
  double ratio = 0.75;
  std::uint64_t seed = 0;
};

/// Seeded shuffle, then the first round(ratio * n) vectors go to train.
/// Throws ConfigError on empty input or ratio outside (0, 1).
DataSplit train_test_split(std::vector<FeatureVector> vectors, double ratio,
                           std::uint64_t seed);

/// Network inputs (0.0/1.0) for a set of vectors.
Samples to_samples(std::span<const FeatureVector> vectors);
std::vector<std::uint8_t> labels_of(std::span<const FeatureVector> vectors);

// events.csv: `day,time,activity,user,insider`, preceded by one comment line.
void write_events_csv(std::ostream &out, std::span<const EncodedEvent> events,
                      const ArtifactHeader &header);
std::vector<EncodedEvent> read_events_csv(const std::filesystem::path &path);

// Binary vector file: u16 LE dimension, then per record `dim` bytes of 0/1
// followed by one label byte.
void write_vectors_bin(const std::filesystem::path &path, std::span<const FeatureVector> vectors,
                       std::size_t dim);
std::vector<FeatureVector> read_vectors_bin(const std::filesystem::path &path);

/// Inspection dump: `b0,...,b{d-1},label` with 0/1 cells.
void write_vectors_csv(std::ostream &out, std::span<const FeatureVector> vectors,
                       const ArtifactHeader &header);

} // namespace itd
