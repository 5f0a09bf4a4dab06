#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "itd/features.hpp"
#include "support.hpp"

using namespace itd;

TEST_CASE("activity codes run from Logon = 1 to Http = 7") {
  CHECK(encode_activity(ActivityKind::Logon) == 1);
  CHECK(encode_activity(ActivityKind::Logoff) == 2);
  CHECK(encode_activity(ActivityKind::Connect) == 3);
  CHECK(encode_activity(ActivityKind::Disconnect) == 4);
  CHECK(encode_activity(ActivityKind::Email) == 5);
  CHECK(encode_activity(ActivityKind::File) == 6);
  CHECK(encode_activity(ActivityKind::Http) == 7);
  for (auto kind : kAllActivities) CHECK(decode_activity(encode_activity(kind)) == kind);
  CHECK_THROWS_AS(decode_activity(0), std::out_of_range);
  CHECK_THROWS_AS(decode_activity(8), std::out_of_range);
}

TEST_CASE("split_timestamp gives a Monday-based day and hour plus one") {
  // 2010-01-04 was a Monday.
  CHECK(split_timestamp(make_timestamp(2010, 1, 4, 0, 5)) == DayTime{0, 1});
  CHECK(split_timestamp(make_timestamp(2010, 1, 10, 23, 59)) == DayTime{6, 24});
  CHECK(split_timestamp(make_timestamp(2010, 1, 2, 6, 49)) == DayTime{5, 7});
}

TEST_CASE("one_hot has three set bits at the documented offsets") {
  const EncodedEvent e{"U", 2, 9, 5, 0};
  const auto v = one_hot(e);
  REQUIRE(v.bits.size() == kDefaultPadTo);
  CHECK(std::accumulate(v.bits.begin(), v.bits.end(), 0) == 3);
  CHECK(v.bits[2] == 1);
  CHECK(v.bits[kHourOffset + 8] == 1);
  CHECK(v.bits[kActivityOffset + 4] == 1);
  for (std::size_t i = kNaturalDim; i < v.bits.size(); ++i) CHECK(v.bits[i] == 0);
}

TEST_CASE("one_hot round-trips every (day, time, activity) combination") {
  std::size_t count = 0;
  std::set<std::vector<std::uint8_t>> seen;
  for (int day = 0; day < 7; ++day) {
    for (int time = 1; time <= 24; ++time) {
      for (int act = 1; act <= 7; ++act) {
        const EncodedEvent e{"U", day, time, act, 0};
        const auto v = one_hot(e, kNaturalDim);
        const auto back = decode_one_hot(v.bits);
        REQUIRE(back);
        CHECK(*back == DecodedEvent{day, time, act});
        seen.insert(v.bits);
        ++count;
      }
    }
  }
  CHECK(count == 1176);
  CHECK(seen.size() == 1176);
}

TEST_CASE("decode_one_hot rejects vectors that are not one-hot per group") {
  std::vector<std::uint8_t> bits(kNaturalDim, 0);
  CHECK_FALSE(decode_one_hot(bits));
  bits[0] = bits[1] = 1;
  bits[kHourOffset] = 1;
  bits[kActivityOffset] = 1;
  CHECK_FALSE(decode_one_hot(bits));
}

TEST_CASE("nearest_one_hot takes the argmax of each group") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const EncodedEvent e{"U", testing::uniform_int(rng, 0, 6), testing::uniform_int(rng, 1, 24),
                         testing::uniform_int(rng, 1, 7), 0};
    const auto v = one_hot(e, kNaturalDim);
    std::vector<double> noisy(v.bits.begin(), v.bits.end());
    for (auto &x : noisy) x = 0.6 * x + testing::uniform(rng, 0.0, 0.39);
    CHECK(nearest_one_hot(noisy) == DecodedEvent{e.day, e.time, e.activity_code});
  }
}

TEST_CASE("padding and label options set the dimension") {
  FeatureOptions opts;
  CHECK(opts.dimension() == 50);
  opts.pad_to = kNaturalDim;
  CHECK(opts.dimension() == 38);
  opts.label_as_feature = true;
  CHECK(opts.dimension() == 39);
  const auto v = one_hot(EncodedEvent{"U", 0, 1, 1, 1}, opts);
  CHECK(v.bits.size() == 39);
  CHECK(v.bits[38] == 1);
  CHECK(v.label == 1);
  CHECK_THROWS_AS(one_hot(EncodedEvent{"U", 0, 1, 1, 0}, 20), ConfigError);
}

TEST_CASE("validate rejects out-of-range fields") {
  CHECK_NOTHROW(validate(EncodedEvent{"U", 6, 24, 7, 1}));
  CHECK_THROWS_AS(validate(EncodedEvent{"U", 7, 1, 1, 0}), ConfigError);
  CHECK_THROWS_AS(validate(EncodedEvent{"U", 0, 0, 1, 0}), ConfigError);
  CHECK_THROWS_AS(validate(EncodedEvent{"U", 0, 1, 8, 0}), ConfigError);
  CHECK_THROWS_AS(validate(EncodedEvent{"U", 0, 1, 1, 2}), ConfigError);
}

TEST_CASE("label_insiders marks exactly the roster's events") {
  std::vector<EncodedEvent> events{{"A", 0, 1, 1, 0}, {"B", 0, 1, 1, 0}, {"A", 1, 2, 3, 0}};
  const auto labeled = label_insiders(events, {"A"});
  CHECK(labeled[0].insider == 1);
  CHECK(labeled[1].insider == 0);
  CHECK(labeled[2].insider == 1);
  for (const auto &e : label_insiders(events, {})) CHECK(e.insider == 0);
}

TEST_CASE("train_test_split sizes, coverage and determinism") {
  Rng rng(9);
  std::vector<FeatureVector> vectors;
  for (int i = 0; i < 1001; ++i) {
    vectors.push_back(one_hot(EncodedEvent{"U", testing::uniform_int(rng, 0, 6),
                                           testing::uniform_int(rng, 1, 24),
                                           testing::uniform_int(rng, 1, 7),
                                           static_cast<std::uint8_t>(i % 2)}));
  }
  const auto a = train_test_split(vectors, 0.75, 42);
  const auto b = train_test_split(vectors, 0.75, 42);
  CHECK(a.train.size() == 751);
  CHECK(a.test.size() == 250);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  std::vector<FeatureVector> joined = a.train;
  joined.insert(joined.end(), a.test.begin(), a.test.end());
  auto sorted_in = vectors;
  std::sort(sorted_in.begin(), sorted_in.end());
  std::sort(joined.begin(), joined.end());
  CHECK(joined == sorted_in);
  const auto c = train_test_split(vectors, 0.75, 43);
  CHECK(c.train != a.train);
  CHECK_THROWS_AS(train_test_split({}, 0.75, 1), ConfigError);
  CHECK_THROWS_AS(train_test_split(vectors, 1.0, 1), ConfigError);
  CHECK_THROWS_AS(train_test_split(vectors, 0.0, 1), ConfigError);
}

TEST_CASE("vector and event files round-trip") {
  testing::ScratchDir dir("features");
  Rng rng(13);
  std::vector<EncodedEvent> events;
  for (int i = 0; i < 300; ++i) {
    events.push_back({"user" + std::to_string(i % 7), testing::uniform_int(rng, 0, 6),
                      testing::uniform_int(rng, 1, 24), testing::uniform_int(rng, 1, 7),
                      static_cast<std::uint8_t>(i % 5 == 0)});
  }
  {
    std::ofstream out(dir / "events.csv");
    write_events_csv(out, events, {0xabc, 3});
  }
  CHECK(read_events_csv(dir / "events.csv") == events);

  const auto vectors = one_hot_all(events, FeatureOptions{});
  write_vectors_bin(dir / "v.bin", vectors, 50);
  CHECK(read_vectors_bin(dir / "v.bin") == vectors);
  CHECK(std::filesystem::file_size(dir / "v.bin") == 2 + vectors.size() * 51);

  std::ostringstream text;
  write_vectors_csv(text, vectors, {1, 2});
  CHECK(text.str().rfind("# itd ", 0) == 0);

  const auto samples = to_samples(vectors);
  CHECK(samples.size() == vectors.size());
  CHECK(samples.dim() == 50);
  CHECK(labels_of(vectors)[0] == 1);
}

TEST_CASE("truncated vector files are rejected") {
  testing::ScratchDir dir("trunc");
  const std::vector<FeatureVector> vectors{one_hot(EncodedEvent{"U", 0, 1, 1, 0})};
  write_vectors_bin(dir / "v.bin", vectors, 50);
  std::filesystem::resize_file(dir / "v.bin", 30);
  CHECK_THROWS_AS(read_vectors_bin(dir / "v.bin"), SchemaError);
}
