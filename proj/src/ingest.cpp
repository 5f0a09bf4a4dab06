#include "itd/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <exception>
#include <queue>

#include <fmt/format.h>

#include "itd/common.hpp"

namespace itd {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char &c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool read_digits(std::string_view text, std::size_t &pos, std::size_t max_digits,
                 int &value) {
  const std::size_t begin = pos;
  while (pos < text.size() && pos - begin < max_digits &&
         std::isdigit(static_cast<unsigned char>(text[pos]))) {
    ++pos;
  }
  if (pos == begin) return false;
  std::from_chars(text.data() + begin, text.data() + pos, value);
  return true;
}

std::vector<std::string_view> required_columns(LogFileKind kind) {
  switch (kind) {
  case LogFileKind::Logon:
  case LogFileKind::Device:
    return {"id", "date", "user", "pc", "activity"};
  case LogFileKind::Http:
    return {"id", "date", "user", "pc", "url"};
  case LogFileKind::Email:
    return {"id", "date", "user", "pc", "to", "from"};
  case LogFileKind::File:
    return {"id", "date", "user", "pc", "filename"};
  case LogFileKind::Psychometric:
  case LogFileKind::Ldap:
    return {"user_id"};
  }
  return {};
}

} // namespace

std::string_view file_name(LogFileKind kind) {
  switch (kind) {
  case LogFileKind::Logon: return "logon.csv";
  case LogFileKind::Device: return "device.csv";
  case LogFileKind::Http: return "http.csv";
  case LogFileKind::Email: return "email.csv";
  case LogFileKind::File: return "file.csv";
  case LogFileKind::Psychometric: return "psychometric.csv";
  case LogFileKind::Ldap: return "ldap.csv";
  }
  return "";
}

std::string_view activity_name(ActivityKind kind) {
  switch (kind) {
  case ActivityKind::Logon: return "Logon";
  case ActivityKind::Logoff: return "Logoff";
  case ActivityKind::Connect: return "Connect";
  case ActivityKind::Disconnect: return "Disconnect";
  case ActivityKind::Email: return "Email";
  case ActivityKind::File: return "File";
  case ActivityKind::Http: return "Http";
  }
  return "";
}

bool activity_permitted(LogFileKind source, ActivityKind activity) {
  switch (source) {
  case LogFileKind::Logon:
    return activity == ActivityKind::Logon || activity == ActivityKind::Logoff;
  case LogFileKind::Device:
    return activity == ActivityKind::Connect || activity == ActivityKind::Disconnect;
  case LogFileKind::Http: return activity == ActivityKind::Http;
  case LogFileKind::Email: return activity == ActivityKind::Email;
  case LogFileKind::File: return activity == ActivityKind::File;
  case LogFileKind::Psychometric:
  case LogFileKind::Ldap: return false;
  }
  return false;
}

Timestamp make_timestamp(int year, unsigned month, unsigned day, int hour,
                         int minute, int second) {
  using namespace std::chrono;
  const sys_days date = year_month_day{std::chrono::year{year}, std::chrono::month{month},
                                       std::chrono::day{day}};
  return date + hours{hour} + minutes{minute} + seconds{second};
}

std::optional<Timestamp> parse_timestamp(std::string_view text, std::string_view format) {
  text = trim(text);
  int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
  bool has_year = false, has_month = false, has_day = false;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < format.size(); ++f) {
    if (format[f] == '%' && f + 1 < format.size()) {
      const char spec = format[++f];
      int *target = nullptr;
      std::size_t width = 2;
      switch (spec) {
      case 'Y': target = &year; width = 4; has_year = true; break;
      case 'm': target = &month; has_month = true; break;
      case 'd': target = &day; has_day = true; break;
      case 'H': target = &hour; break;
      case 'M': target = &minute; break;
      case 'S': target = &second; break;
      default: return std::nullopt;
      }
      if (!read_digits(text, pos, width, *target)) return std::nullopt;
    } else {
      if (pos >= text.size() || text[pos] != format[f]) return std::nullopt;
      ++pos;
    }
  }
  if (pos != text.size() || !has_year || !has_month || !has_day) return std::nullopt;
  if (hour > 23 || minute > 59 || second > 59) return std::nullopt;
  const std::chrono::year_month_day ymd{std::chrono::year{year},
                                        std::chrono::month{static_cast<unsigned>(month)},
                                        std::chrono::day{static_cast<unsigned>(day)}};
  if (!ymd.ok()) return std::nullopt;
  return make_timestamp(year, static_cast<unsigned>(month), static_cast<unsigned>(day),
                        hour, minute, second);
}

std::string format_timestamp(Timestamp ts, std::string_view format) {
  using namespace std::chrono;
  const auto date = floor<days>(ts);
  const year_month_day ymd{date};
  const hh_mm_ss clock{ts - date};
  std::string out;
  for (std::size_t f = 0; f < format.size(); ++f) {
    if (format[f] == '%' && f + 1 < format.size()) {
      switch (format[++f]) {
      case 'Y': out += fmt::format("{:04d}", static_cast<int>(ymd.year())); break;
      case 'm': out += fmt::format("{:02d}", static_cast<unsigned>(ymd.month())); break;
      case 'd': out += fmt::format("{:02d}", static_cast<unsigned>(ymd.day())); break;
      case 'H': out += fmt::format("{:02d}", clock.hours().count()); break;
      case 'M': out += fmt::format("{:02d}", clock.minutes().count()); break;
      case 'S': out += fmt::format("{:02d}", clock.seconds().count()); break;
      default: out.push_back('%'); out.push_back(format[f]);
      }
    } else {
      out.push_back(format[f]);
    }
  }
  return out;
}

RecordSchema RecordSchema::from_header(LogFileKind kind, const csv::Row &header) {
  RecordSchema schema;
  schema.kind_ = kind;
  schema.width_ = header.size();
  auto find = [&](std::string_view name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (lower(trim(header[i])) == name) return i;
    }
    return npos;
  };
  for (std::string_view name : required_columns(kind)) {
    if (find(name) == npos) {
      throw SchemaError(fmt::format("{}: missing required column '{}'", file_name(kind), name));
    }
  }
  if (kind == LogFileKind::Psychometric || kind == LogFileKind::Ldap) {
    schema.user_ = find("user_id");
    return schema;
  }
  schema.id_ = find("id");
  schema.date_ = find("date");
  schema.user_ = find("user");
  schema.pc_ = find("pc");
  schema.activity_ = find("activity");
  return schema;
}

std::optional<LogEvent> parse_record(const RecordSchema &schema, const csv::Row &row,
                                     std::size_t line, const IngestOptions &options) {
  if (row.size() != schema.width_) {
    throw ParseError(line, fmt::format("{}: expected {} cells, got {}", file_name(schema.kind_),
                                       schema.width_, row.size()));
  }
  if (schema.kind_ == LogFileKind::Psychometric || schema.kind_ == LogFileKind::Ldap) {
    return std::nullopt;
  }

  LogEvent event;
  event.id = row[schema.id_];
  event.user = std::string(trim(row[schema.user_]));
  event.source = schema.kind_;
  if (!row[schema.pc_].empty()) event.pc = row[schema.pc_];

  const auto ts = parse_timestamp(row[schema.date_], options.time_format);
  if (!ts) {
    throw ParseError(line, fmt::format("malformed date '{}'", row[schema.date_]));
  }
  if (*ts < options.window_begin || *ts > options.window_end) {
    throw ParseError(line, fmt::format("date '{}' outside corpus window", row[schema.date_]));
  }
  event.timestamp = *ts;

  auto from_cell = [&](ActivityKind first, ActivityKind second) {
    const std::string cell = lower(trim(row[schema.activity_]));
    if (cell == lower(activity_name(first))) return first;
    if (cell == lower(activity_name(second))) return second;
    throw ParseError(line, fmt::format("unknown activity '{}'", row[schema.activity_]));
  };
  switch (schema.kind_) {
  case LogFileKind::Logon:
    event.activity = from_cell(ActivityKind::Logon, ActivityKind::Logoff);
    break;
  case LogFileKind::Device:
    event.activity = from_cell(ActivityKind::Connect, ActivityKind::Disconnect);
    break;
  case LogFileKind::Http: event.activity = ActivityKind::Http; break;
  case LogFileKind::Email: event.activity = ActivityKind::Email; break;
  case LogFileKind::File: event.activity = ActivityKind::File; break;
  default: break;
  }
  return event;
}

std::optional<LogEvent> parse_record(LogFileKind kind, const csv::Row &header,
                                     const csv::Row &row, const IngestOptions &options) {
  return parse_record(RecordSchema::from_header(kind, header), row, 1, options);
}

std::optional<std::string> record_user(const RecordSchema &schema, const csv::Row &row) {
  if (schema.user_ == RecordSchema::npos || schema.user_ >= row.size()) return std::nullopt;
  return std::string(trim(row[schema.user_]));
}

bool event_order_less(const LogEvent &a, const LogEvent &b) {
  if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
  if (a.user != b.user) return a.user < b.user;
  return static_cast<int>(a.activity) < static_cast<int>(b.activity);
}

std::vector<LogEvent> merge_events(std::vector<std::vector<LogEvent>> streams) {
  std::size_t total = 0;
  for (auto &stream : streams) {
    if (!std::is_sorted(stream.begin(), stream.end(), event_order_less)) {
      std::stable_sort(stream.begin(), stream.end(), event_order_less);
    }
    total += stream.size();
  }

  struct Cursor {
    std::size_t stream;
    std::size_t pos;
  };
  // Min-heap on the event key; ties resolve by stream index so equal keys
  // come out in input order.
  auto greater = [&](const Cursor &a, const Cursor &b) {
    const LogEvent &ea = streams[a.stream][a.pos];
    const LogEvent &eb = streams[b.stream][b.pos];
    if (event_order_less(ea, eb)) return false;
    if (event_order_less(eb, ea)) return true;
    return a.stream > b.stream;
  };
  std::priority_queue<Cursor, std::vector<Cursor>, decltype(greater)> heap(greater);
  for (std::size_t s = 0; s < streams.size(); ++s) {
    if (!streams[s].empty()) heap.push({s, 0});
  }

  std::vector<LogEvent> merged;
  merged.reserve(total);
  while (!heap.empty()) {
    Cursor top = heap.top();
    heap.pop();
    merged.push_back(std::move(streams[top.stream][top.pos]));
    if (++top.pos < streams[top.stream].size()) heap.push(top);
  }
  return merged;
}

std::vector<LogEvent> parse_table(LogFileKind kind, const csv::Table &table,
                                  const IngestOptions &options, FileReport &report) {
  report.kind = kind;
  const RecordSchema schema = RecordSchema::from_header(kind, table.header);
  const bool is_activity = kind != LogFileKind::Psychometric && kind != LogFileKind::Ldap;
  const auto rows = is_activity && options.sample > 0 ? sample_file(table.rows, options.sample)
                                                      : table.rows;
  report.rows_read = table.rows.size();

  std::vector<LogEvent> events;
  events.reserve(rows.size());
  for (const auto &row : rows) {
    try {
      if (auto event = parse_record(schema, row.cells, row.line, options)) {
        events.push_back(std::move(*event));
      }
      ++report.rows_kept;
    } catch (const ParseError &e) {
      if (options.strict) throw;
      report.errors.push_back(fmt::format("{}: {}", file_name(kind), e.what()));
    }
  }
  std::stable_sort(events.begin(), events.end(), event_order_less);
  return events;
}

Corpus ingest_directory(const std::filesystem::path &dir, const IngestOptions &options) {
  if (!std::filesystem::is_directory(dir)) {
    throw ConfigError("input directory not found: " + dir.string());
  }
  for (LogFileKind kind : kActivityLogFiles) {
    if (!std::filesystem::exists(dir / file_name(kind))) {
      throw ConfigError("missing log file: " + (dir / file_name(kind)).string());
    }
  }

  constexpr std::size_t n = kAllLogFiles.size();
  std::vector<std::vector<LogEvent>> streams(n);
  std::vector<std::vector<std::string>> users(n);
  std::vector<FileReport> reports(n);
  std::vector<std::exception_ptr> failures(n);
  std::vector<bool> present(n, false);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    const LogFileKind kind = kAllLogFiles[i];
    const auto path = dir / file_name(kind);
    if (!std::filesystem::exists(path)) continue;
    present[i] = true;
    try {
      const csv::Table table = csv::read_file(path);
      if (kind == LogFileKind::Psychometric || kind == LogFileKind::Ldap) {
        const RecordSchema schema = RecordSchema::from_header(kind, table.header);
        reports[i].kind = kind;
        reports[i].rows_read = table.rows.size();
        for (const auto &row : table.rows) {
          if (auto user = record_user(schema, row.cells)) users[i].push_back(*user);
        }
        reports[i].rows_kept = users[i].size();
      } else {
        streams[i] = parse_table(kind, table, options, reports[i]);
      }
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto &failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }

  Corpus corpus;
  for (std::size_t i = 0; i < n; ++i) {
    if (present[i]) corpus.reports.push_back(std::move(reports[i]));
    corpus.directory_users.insert(corpus.directory_users.end(), users[i].begin(), users[i].end());
  }
  std::sort(corpus.directory_users.begin(), corpus.directory_users.end());
  corpus.directory_users.erase(
      std::unique(corpus.directory_users.begin(), corpus.directory_users.end()),
      corpus.directory_users.end());
  corpus.events = merge_events(std::move(streams));
  return corpus;
}

} // namespace itd
