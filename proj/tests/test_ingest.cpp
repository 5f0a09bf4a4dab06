#include <algorithm>
#include <fstream>
#include <numeric>

#include "doctest.h"
#include "itd/ingest.hpp"
#include "itd/synthgen.hpp"
#include "support.hpp"

using namespace itd;

namespace {

const csv::Row kLogonHeader{"id", "date", "user", "pc", "activity"};

LogEvent event_at(Timestamp ts, std::string user, ActivityKind kind) {
  LogEvent e;
  e.id = user + "-" + std::to_string(ts.time_since_epoch().count());
  e.user = std::move(user);
  e.timestamp = ts;
  e.activity = kind;
  return e;
}

} // namespace

TEST_CASE("timestamps parse in the CERT format") {
  const auto ts = parse_timestamp("01/02/2010 06:49:00");
  REQUIRE(ts);
  CHECK(*ts == make_timestamp(2010, 1, 2, 6, 49));
  CHECK(format_timestamp(*ts) == "01/02/2010 06:49:00");
  CHECK_FALSE(parse_timestamp("02/30/2010 00:00:00"));
  CHECK_FALSE(parse_timestamp("13/01/2010 00:00:00"));
  CHECK_FALSE(parse_timestamp("01/02/2010 24:00:00"));
  CHECK_FALSE(parse_timestamp("not a date"));
  CHECK(parse_timestamp("2010-01-02T06:49:00", "%Y-%m-%dT%H:%M:%S") == ts);
}

TEST_CASE("format and parse round-trip over random instants") {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const Timestamp ts = make_timestamp(2010, 1, 1) +
                         std::chrono::seconds{testing::uniform_int(rng, 0, 500 * 86400)};
    CHECK(parse_timestamp(format_timestamp(ts)) == ts);
  }
}

TEST_CASE("parse_record maps a logon row to an event") {
  const auto e = parse_record(LogFileKind::Logon, kLogonHeader,
                              {"{X1D9-S0ES98JV-5357PWMI}", "01/02/2010 06:49:00", "NGF0157",
                               "PC-6056", "Logon"});
  REQUIRE(e);
  CHECK(e->user == "NGF0157");
  CHECK(e->activity == ActivityKind::Logon);
  CHECK(e->timestamp == make_timestamp(2010, 1, 2, 6, 49));
  CHECK(e->pc == "PC-6056");
}

TEST_CASE("activity values are matched case-insensitively per file kind") {
  const csv::Row header{"id", "date", "user", "pc", "activity"};
  CHECK(parse_record(LogFileKind::Device, header, {"1", "01/02/2010 06:49:00", "U", "P", "connect"})
            ->activity == ActivityKind::Connect);
  CHECK_THROWS_AS(parse_record(LogFileKind::Device, header,
                               {"1", "01/02/2010 06:49:00", "U", "P", "Logon"}),
                  ParseError);
}

TEST_CASE("file kinds without an activity column imply their activity") {
  const csv::Row http{"id", "date", "user", "pc", "url"};
  CHECK(parse_record(LogFileKind::Http, http, {"1", "01/02/2010 06:49:00", "U", "P", "http://x"})
            ->activity == ActivityKind::Http);
  const csv::Row file{"id", "date", "user", "pc", "filename"};
  CHECK(parse_record(LogFileKind::File, file, {"1", "01/02/2010 06:49:00", "U", "P", "a.doc"})
            ->activity == ActivityKind::File);
  const csv::Row email{"id", "date", "user", "pc", "to", "cc", "bcc", "from", "size", "attachments"};
  CHECK(parse_record(LogFileKind::Email, email,
                     {"1", "01/02/2010 06:49:00", "U", "P", "a@x", "", "", "U@x", "10", "0"})
            ->activity == ActivityKind::Email);
}

TEST_CASE("bad records raise ParseError with the line number") {
  const auto schema = RecordSchema::from_header(LogFileKind::Logon, kLogonHeader);
  try {
    (void)parse_record(schema, {"1", "garbage", "U", "P", "Logon"}, 42);
    FAIL("expected ParseError");
  } catch (const ParseError &e) {
    CHECK(e.line() == 42);
  }
  CHECK_THROWS_AS(parse_record(schema, {"1", "01/02/2010 06:49:00", "U", "P"}, 3), ParseError);
  CHECK_THROWS_AS(parse_record(schema, {"1", "01/02/2010 06:49:00", "U", "P", "Jump"}, 3),
                  ParseError);
  CHECK_THROWS_AS(parse_record(schema, {"1", "01/02/2012 06:49:00", "U", "P", "Logon"}, 3),
                  ParseError);
}

TEST_CASE("a header missing a required column is a schema error naming it") {
  try {
    (void)RecordSchema::from_header(LogFileKind::Logon, {"id", "date", "pc", "activity"});
    FAIL("expected SchemaError");
  } catch (const SchemaError &e) {
    CHECK(std::string(e.what()).find("user") != std::string::npos);
  }
}

TEST_CASE("psychometric and ldap rows yield no event") {
  const csv::Row header{"employee_name", "user_id", "O", "C", "E", "A", "N"};
  CHECK_FALSE(parse_record(LogFileKind::Psychometric, header, {"A B", "ABC0001", "1", "2", "3", "4", "5"}));
  const auto schema = RecordSchema::from_header(LogFileKind::Psychometric, header);
  CHECK(record_user(schema, {"A B", "ABC0001", "1", "2", "3", "4", "5"}) == "ABC0001");
}

TEST_CASE("sample_file keeps the file-order prefix") {
  std::vector<int> rows(7000);
  std::iota(rows.begin(), rows.end(), 0);
  const auto kept = sample_file(rows, 5000);
  REQUIRE(kept.size() == 5000);
  CHECK(kept.front() == 0);
  CHECK(kept.back() == 4999);
  CHECK(sample_file(std::vector<int>{1, 2, 3}, 5000).size() == 3);
}

TEST_CASE("merge_events of five streams equals a brute-force stable sort") {
  Rng rng(3);
  std::vector<std::vector<LogEvent>> streams(5);
  std::vector<LogEvent> all;
  const Timestamp base = make_timestamp(2010, 3, 1);
  for (std::size_t s = 0; s < streams.size(); ++s) {
    for (int i = 0; i < 5000; ++i) {
      const auto ts = base + std::chrono::seconds{testing::uniform_int(rng, 0, 86400 * 20)};
      const std::string user = "U" + std::to_string(testing::uniform_int(rng, 0, 30));
      streams[s].push_back(event_at(ts, user, kAllActivities[static_cast<std::size_t>(
                                                  testing::uniform_int(rng, 0, 6))]));
    }
    std::stable_sort(streams[s].begin(), streams[s].end(), event_order_less);
    all.insert(all.end(), streams[s].begin(), streams[s].end());
  }
  std::stable_sort(all.begin(), all.end(), event_order_less);
  const auto merged = merge_events(streams);
  REQUIRE(merged.size() == 25000);
  CHECK(std::is_sorted(merged.begin(), merged.end(), event_order_less));
  CHECK(merged == all);
}

TEST_CASE("merge_events sorts unsorted inputs first") {
  const Timestamp t0 = make_timestamp(2010, 1, 5);
  std::vector<std::vector<LogEvent>> streams{
      {event_at(t0 + std::chrono::hours{2}, "A", ActivityKind::Http),
       event_at(t0, "A", ActivityKind::Logon)},
      {event_at(t0 + std::chrono::hours{1}, "B", ActivityKind::Email)}};
  const auto merged = merge_events(streams);
  REQUIRE(merged.size() == 3);
  CHECK(merged[0].activity == ActivityKind::Logon);
  CHECK(merged[1].user == "B");
}

TEST_CASE("generated corpora ingest with zero parse errors") {
  testing::ScratchDir dir("ingest");
  synth::SynthConfig cfg;
  cfg.users = 12;
  cfg.insiders = 3;
  cfg.days = 10;
  const auto data = synth::gen_dataset(cfg);
  synth::write_dataset(data, dir.path(), {1, 1});
  IngestOptions opts;
  opts.sample = 0;
  const auto corpus = ingest_directory(dir.path(), opts);
  CHECK(corpus.events.size() == data.events.size());
  CHECK(std::is_sorted(corpus.events.begin(), corpus.events.end(), event_order_less));
  for (const auto &r : corpus.reports) CHECK(r.errors.empty());
  CHECK(corpus.directory_users.size() == cfg.users);

  opts.sample = 5;
  const auto sampled = ingest_directory(dir.path(), opts);
  CHECK(sampled.events.size() == 25);
}

TEST_CASE("lenient ingest collects bad rows, strict ingest throws") {
  testing::ScratchDir dir("lenient");
  synth::SynthConfig cfg;
  cfg.users = 4;
  cfg.insiders = 0;
  cfg.days = 3;
  synth::write_dataset(synth::gen_dataset(cfg), dir.path(), {1, 1});
  {
    std::ofstream out(dir / "logon.csv", std::ios::app);
    out << "bad,13/45/2010 00:00:00,U,P,Logon\n";
  }
  IngestOptions opts;
  opts.sample = 0;
  CHECK_THROWS_AS(ingest_directory(dir.path(), opts), ParseError);
  opts.strict = false;
  const auto corpus = ingest_directory(dir.path(), opts);
  std::size_t errors = 0;
  for (const auto &r : corpus.reports) errors += r.errors.size();
  CHECK(errors == 1);
}

TEST_CASE("missing directory or file is a configuration error") {
  CHECK_THROWS_AS(ingest_directory("/nonexistent/itd/dir"), ConfigError);
  testing::ScratchDir dir("missing");
  CHECK_THROWS_AS(ingest_directory(dir.path()), ConfigError);
}
