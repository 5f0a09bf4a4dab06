#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "itd/csv.hpp"

namespace itd {

using Timestamp = std::chrono::sys_seconds;

/// The seven CERT r4.2 log files.
enum class LogFileKind : std::uint8_t {
  Logon,
  Device,
  Http,
  Email,
  File,
  Psychometric,
  Ldap,
};

inline constexpr std::array<LogFileKind, 7> kAllLogFiles = {
    LogFileKind::Logon, LogFileKind::Device,       LogFileKind::Http,
    LogFileKind::Email, LogFileKind::File,         LogFileKind::Psychometric,
    LogFileKind::Ldap};

/// Files whose rows become events.
inline constexpr std::array<LogFileKind, 5> kActivityLogFiles = {
    LogFileKind::Logon, LogFileKind::Device, LogFileKind::Http,
    LogFileKind::Email, LogFileKind::File};

std::string_view file_name(LogFileKind kind);

/// Declaration order matches the integer codes 1..7 used by the features.
enum class ActivityKind : std::uint8_t {
  Logon,
  Logoff,
  Connect,
  Disconnect,
  Email,
  File,
  Http,
};

inline constexpr std::array<ActivityKind, 7> kAllActivities = {
    ActivityKind::Logon, ActivityKind::Logoff, ActivityKind::Connect,
    ActivityKind::Disconnect, ActivityKind::Email, ActivityKind::File,
    ActivityKind::Http};

std::string_view activity_name(ActivityKind kind);

/// True when `activity` may appear in a file of kind `source`.
bool activity_permitted(LogFileKind source, ActivityKind activity);

struct LogEvent {
  std::string id;
  std::string user;
  Timestamp timestamp{};
  ActivityKind activity = ActivityKind::Logon;
  LogFileKind source = LogFileKind::Logon;
  std::optional<std::string> pc;

  friend bool operator==(const LogEvent &, const LogEvent &) = default;
};

inline constexpr std::string_view kDefaultTimeFormat = "%m/%d/%Y %H:%M:%S";

/// Parses `text` against a strptime-like format supporting %m %d %Y %H %M %S
/// and literal characters. Returns nullopt on any mismatch or invalid date.
std::optional<Timestamp> parse_timestamp(std::string_view text,
                                         std::string_view format = kDefaultTimeFormat);
std::string format_timestamp(Timestamp ts,
                             std::string_view format = kDefaultTimeFormat);

Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour = 0,
                         int minute = 0, int second = 0);

struct IngestOptions {
  std::string time_format{kDefaultTimeFormat};
  Timestamp window_begin = make_timestamp(2010, 1, 1);
  Timestamp window_end = make_timestamp(2011, 5, 31, 23, 59, 59);
  /// Rows kept per activity file; 0 keeps everything.
  std::size_t sample = 5000;
  /// Throw on the first bad record instead of skipping and collecting it.
  bool strict = true;
};

/// Column positions for one file, resolved from its header row.
class RecordSchema {
public:
  /// Throws SchemaError naming the first missing required column.
  static RecordSchema from_header(LogFileKind kind, const csv::Row &header);

  LogFileKind kind() const noexcept { return kind_; }
  std::size_t width() const noexcept { return width_; }

private:
  friend std::optional<LogEvent> parse_record(const RecordSchema &,
                                              const csv::Row &, std::size_t,
                                              const IngestOptions &);
  friend std::optional<std::string> record_user(const RecordSchema &,
                                                const csv::Row &);

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  LogFileKind kind_ = LogFileKind::Logon;
  std::size_t width_ = 0;
  std::size_t id_ = npos;
  std::size_t date_ = npos;
  std::size_t user_ = npos;
  std::size_t pc_ = npos;
  std::size_t activity_ = npos;
};

/// One event, or nullopt for Psychometric/Ldap rows which carry no activity.
/// Throws ParseError (with `line`) for a bad date, unknown activity value,
/// out-of-window timestamp, or wrong cell count.
std::optional<LogEvent> parse_record(const RecordSchema &schema,
                                     const csv::Row &row, std::size_t line,
                                     const IngestOptions &options = {});

std::optional<LogEvent> parse_record(LogFileKind kind, const csv::Row &header,
                                     const csv::Row &row,
                                     const IngestOptions &options = {});

/// User id of a Psychometric/Ldap row (`user_id` column), else nullopt.
std::optional<std::string> record_user(const RecordSchema &schema,
                                       const csv::Row &row);

/// File-order prefix of at most n rows.
template <typename RowT>
std::vector<RowT> sample_file(std::vector<RowT> rows, std::size_t n) {
  if (rows.size() > n) rows.resize(n);
  return rows;
}

/// Orders by (timestamp, user, activity code).
bool event_order_less(const LogEvent &a, const LogEvent &b);

/// k-way merge into one sorted stream. Unsorted inputs are stable-sorted
/// first. Equal keys keep stream order, then in-stream order.
std::vector<LogEvent> merge_events(std::vector<std::vector<LogEvent>> streams);

struct FileReport {
  LogFileKind kind = LogFileKind::Logon;
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  std::vector<std::string> errors;
};

struct Corpus {
  std::vector<LogEvent> events;
  /// Users listed in ldap.csv / psychometric.csv, when those files exist.
  std::vector<std::string> directory_users;
  std::vector<FileReport> reports;
};

/// Parses one file's table (already read) into a time-sorted event list.
std::vector<LogEvent> parse_table(LogFileKind kind, const csv::Table &table,
                                  const IngestOptions &options,
                                  FileReport &report);

/// Reads the CERT file set under `dir`, one file per worker, and merges it.
/// The five activity files are required; psychometric.csv and ldap.csv are
/// optional and only contribute `directory_users`.
Corpus ingest_directory(const std::filesystem::path &dir,
                        const IngestOptions &options = {});

} // namespace itd
