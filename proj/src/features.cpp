#include "itd/features.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "itd/csv.hpp"

namespace itd {

int encode_activity(ActivityKind kind) { return static_cast<int>(kind) + 1; }

ActivityKind decode_activity(int code) {
  if (code < 1 || code > 7) {
    throw std::out_of_range(fmt::format("activity code {} outside 1..7", code));
  }
  return static_cast<ActivityKind>(code - 1);
}

DayTime split_timestamp(Timestamp ts) {
  using namespace std::chrono;
  const auto date = floor<days>(ts);
  // iso_encoding: Monday=1 .. Sunday=7
  const int day = static_cast<int>(weekday{date}.iso_encoding()) - 1;
  const int hour = static_cast<int>(duration_cast<hours>(ts - date).count());
  return {day, hour + 1};
}

void validate(const EncodedEvent &event) {
  if (event.day < 0 || event.day > 6 || event.time < 1 || event.time > 24 ||
      event.activity_code < 1 || event.activity_code > 7 || event.insider > 1) {
    throw ConfigError(fmt::format("encoded event out of range (day={}, time={}, activity={}, insider={})",
                                  event.day, event.time, event.activity_code, event.insider));
  }
}

EncodedEvent encode_event(const LogEvent &event) {
  const DayTime dt = split_timestamp(event.timestamp);
  return {event.user, dt.day, dt.time, encode_activity(event.activity), 0};
}

std::vector<EncodedEvent> encode_events(std::span<const LogEvent> events) {
  std::vector<EncodedEvent> out(events.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < events.size(); ++i) out[i] = encode_event(events[i]);
  return out;
}

std::vector<EncodedEvent> label_insiders(std::vector<EncodedEvent> events,
                                         const std::set<std::string> &roster) {
  for (auto &event : events) event.insider = roster.contains(event.user) ? 1 : 0;
  return events;
}

std::size_t FeatureOptions::dimension() const {
  return std::max(pad_to, kNaturalDim + (label_as_feature ? 1 : 0));
}

FeatureVector one_hot(const EncodedEvent &event, std::size_t pad_to) {
  if (pad_to < kNaturalDim) {
    throw ConfigError(fmt::format("feature dimension {} below the {} encoded bits", pad_to, kNaturalDim));
  }
  validate(event);
  FeatureVector v;
  v.bits.assign(pad_to, 0);
  v.bits[static_cast<std::size_t>(event.day)] = 1;
  v.bits[kHourOffset + static_cast<std::size_t>(event.time - 1)] = 1;
  v.bits[kActivityOffset + static_cast<std::size_t>(event.activity_code - 1)] = 1;
  v.label = event.insider;
  return v;
}

FeatureVector one_hot(const EncodedEvent &event, const FeatureOptions &options) {
  FeatureVector v = one_hot(event, std::max(options.pad_to, kNaturalDim));
  if (options.label_as_feature) {
    if (v.bits.size() == kNaturalDim) v.bits.push_back(0);
    v.bits[kNaturalDim] = event.insider;
  }
  return v;
}

std::vector<FeatureVector> one_hot_all(std::span<const EncodedEvent> events,
                                       const FeatureOptions &options) {
  std::vector<FeatureVector> out(events.size());
  for (std::size_t i = 0; i < events.size(); ++i) out[i] = one_hot(events[i], options);
  return out;
}

std::optional<DecodedEvent> decode_one_hot(std::span<const std::uint8_t> bits) {
  if (bits.size() < kNaturalDim) return std::nullopt;
  auto single = [&](std::size_t offset, std::size_t width) -> std::optional<int> {
    std::optional<int> found;
    for (std::size_t i = 0; i < width; ++i) {
      if (bits[offset + i] == 0) continue;
      if (bits[offset + i] != 1 || found) return std::nullopt;
      found = static_cast<int>(i);
    }
    return found;
  };
  const auto day = single(0, kDayBits);
  const auto hour = single(kHourOffset, kHourBits);
  const auto act = single(kActivityOffset, kActivityBits);
  if (!day || !hour || !act) return std::nullopt;
  return DecodedEvent{*day, *hour + 1, *act + 1};
}

DecodedEvent nearest_one_hot(std::span<const double> values) {
  if (values.size() < kNaturalDim) {
    throw ConfigError("nearest_one_hot: vector shorter than the encoded bits");
  }
  auto argmax = [&](std::size_t offset, std::size_t width) {
    const auto first = values.begin() + static_cast<std::ptrdiff_t>(offset);
    return static_cast<int>(std::max_element(first, first + static_cast<std::ptrdiff_t>(width)) - first);
  };
  return {argmax(0, kDayBits), argmax(kHourOffset, kHourBits) + 1,
          argmax(kActivityOffset, kActivityBits) + 1};
}

DataSplit train_test_split(std::vector<FeatureVector> vectors, double ratio, std::uint64_t seed) {
  if (vectors.empty()) throw ConfigError("train_test_split: no vectors");
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ConfigError(fmt::format("train_test_split: ratio {} outside (0, 1)", ratio));
  }
  Rng rng(seed);
  std::shuffle(vectors.begin(), vectors.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(vectors.size())));
  DataSplit split;
  split.ratio = ratio;
  split.seed = seed;
  split.test.assign(std::make_move_iterator(vectors.begin() + static_cast<std::ptrdiff_t>(n_train)),
                    std::make_move_iterator(vectors.end()));
  vectors.resize(n_train);
  split.train = std::move(vectors);
  return split;
}

Samples to_samples(std::span<const FeatureVector> vectors) {
  if (vectors.empty()) return {};
  Samples out(vectors.size(), vectors.front().bits.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].bits.size() != out.dim()) {
      throw ConfigError("to_samples: vectors of differing dimension");
    }
    auto row = out.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = vectors[i].bits[j];
  }
  return out;
}

std::vector<std::uint8_t> labels_of(std::span<const FeatureVector> vectors) {
  std::vector<std::uint8_t> labels(vectors.size());
  std::transform(vectors.begin(), vectors.end(), labels.begin(),
                 [](const FeatureVector &v) { return v.label; });
  return labels;
}

void write_events_csv(std::ostream &out, std::span<const EncodedEvent> events,
                      const ArtifactHeader &header) {
  out << header.comment_line() << '\n' << "day,time,activity,user,insider\n";
  for (const auto &e : events) {
    out << e.day << ',' << e.time << ',' << e.activity_code << ',' << csv::escape(e.user) << ','
        << static_cast<int>(e.insider) << '\n';
  }
}

std::vector<EncodedEvent> read_events_csv(const std::filesystem::path &path) {
  const csv::Table table = csv::read_file(path);
  const csv::Row expected = {"day", "time", "activity", "user", "insider"};
  if (table.header != expected) {
    throw SchemaError(path.string() + ": expected header day,time,activity,user,insider");
  }
  std::vector<EncodedEvent> events;
  events.reserve(table.rows.size());
  for (const auto &row : table.rows) {
    if (row.cells.size() != expected.size()) {
      throw ParseError(row.line, fmt::format("{}: expected 5 cells", path.string()));
    }
    EncodedEvent e;
    try {
      e.day = std::stoi(row.cells[0]);
      e.time = std::stoi(row.cells[1]);
      e.activity_code = std::stoi(row.cells[2]);
      e.user = row.cells[3];
      e.insider = static_cast<std::uint8_t>(std::stoi(row.cells[4]));
      validate(e);
    } catch (const std::exception &ex) {
      throw ParseError(row.line, fmt::format("{}: {}", path.string(), ex.what()));
    }
    events.push_back(std::move(e));
  }
  return events;
}

void write_vectors_bin(const std::filesystem::path &path, std::span<const FeatureVector> vectors,
                       std::size_t dim) {
  if (dim > 0xFFFF) throw ConfigError("vector dimension does not fit the u16 header");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  const unsigned char header[2] = {static_cast<unsigned char>(dim & 0xFF),
                                   static_cast<unsigned char>(dim >> 8)};
  out.write(reinterpret_cast<const char *>(header), 2);
  for (const auto &v : vectors) {
    if (v.bits.size() != dim) throw ConfigError("write_vectors_bin: dimension mismatch");
    out.write(reinterpret_cast<const char *>(v.bits.data()), static_cast<std::streamsize>(dim));
    out.put(static_cast<char>(v.label));
  }
  if (!out) throw Error("write failed: " + path.string());
}

std::vector<FeatureVector> read_vectors_bin(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  unsigned char header[2];
  if (!in.read(reinterpret_cast<char *>(header), 2)) {
    throw SchemaError(path.string() + ": missing dimension header");
  }
  const std::size_t dim = header[0] | (static_cast<std::size_t>(header[1]) << 8);
  std::vector<char> record(dim + 1);
  std::vector<FeatureVector> vectors;
  while (in.read(record.data(), static_cast<std::streamsize>(record.size()))) {
    FeatureVector v;
    v.bits.assign(record.begin(), record.begin() + static_cast<std::ptrdiff_t>(dim));
    v.label = static_cast<std::uint8_t>(record[dim]);
    for (auto b : v.bits) {
      if (b > 1) throw SchemaError(path.string() + ": non-binary feature byte");
    }
    if (v.label > 1) throw SchemaError(path.string() + ": non-binary label byte");
    vectors.push_back(std::move(v));
  }
  if (in.gcount() != 0) throw SchemaError(path.string() + ": truncated record");
  return vectors;
}

void write_vectors_csv(std::ostream &out, std::span<const FeatureVector> vectors,
                       const ArtifactHeader &header) {
  out << header.comment_line() << '\n';
  const std::size_t dim = vectors.empty() ? 0 : vectors.front().bits.size();
  for (std::size_t j = 0; j < dim; ++j) out << 'b' << j << ',';
  out << "label\n";
  for (const auto &v : vectors) {
    for (auto b : v.bits) out << static_cast<int>(b) << ',';
    out << static_cast<int>(v.label) << '\n';
  }
}

} // namespace itd
