#include "itd/synthgen.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>

#include <fmt/format.h>

#include "itd/csv.hpp"

namespace itd::synth {

namespace {

constexpr int kMinutesPerDay = 24 * 60;
constexpr int kJitter = 30;

int uniform_int(Rng &rng, int lo, int hi) {
  if (hi < lo) return lo;
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double uniform_real(Rng &rng, double lo, double hi) {
  if (hi <= lo) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

std::size_t poisson(Rng &rng, double mean) {
  if (mean <= 0.0) return 0;
  return static_cast<std::size_t>(std::poisson_distribution<long>(mean)(rng));
}

int weekday_of(Timestamp day_start) {
  using namespace std::chrono;
  return static_cast<int>(weekday{floor<days>(day_start)}.iso_encoding()) - 1;
}

LogFileKind source_of(ActivityKind a) {
  switch (a) {
  case ActivityKind::Logon:
  case ActivityKind::Logoff: return LogFileKind::Logon;
  case ActivityKind::Connect:
  case ActivityKind::Disconnect: return LogFileKind::Device;
  case ActivityKind::Email: return LogFileKind::Email;
  case ActivityKind::File: return LogFileKind::File;
  case ActivityKind::Http: return LogFileKind::Http;
  }
  return LogFileKind::Logon;
}

class EventFactory {
public:
  EventFactory(std::string prefix, const UserProfile &user, Timestamp start)
      : prefix_(std::move(prefix)), user_(user), start_(start) {}

  LogEvent make(int day, int minute, int second, ActivityKind activity,
                const std::string &pc) {
    LogEvent e;
    e.id = fmt::format("{}-{}-{:06d}", prefix_, user_.id, ++counter_);
    e.user = user_.id;
    e.timestamp = start_ + std::chrono::days{day} + std::chrono::minutes{minute} +
                  std::chrono::seconds{second};
    e.activity = activity;
    e.source = source_of(activity);
    e.pc = pc;
    return e;
  }

private:
  std::string prefix_;
  const UserProfile &user_;
  Timestamp start_;
  std::size_t counter_ = 0;
};

} // namespace

void UserProfile::validate() const {
  if (work_start < 1 || work_end > 24 || work_start >= work_end) {
    throw ConfigError(fmt::format("profile {}: work hours ({}, {}) need 1 <= start < end <= 24", id,
                                  work_start, work_end));
  }
  if (shift_drift < 0) throw ConfigError(fmt::format("profile {}: negative shift drift", id));
  if (std::any_of(rates.begin(), rates.end(), [](double r) { return r < 0.0; }) ||
      overtime_rate < 0.0) {
    throw ConfigError(fmt::format("profile {}: negative activity rate", id));
  }
}

std::string_view scenario_name(ScenarioKind kind) {
  switch (kind) {
  case ScenarioKind::AfterHoursExfil: return "after_hours_exfil";
  case ScenarioKind::JobSeekerTheft: return "job_seeker_theft";
  case ScenarioKind::AdminKeylogger: return "admin_keylogger";
  }
  return "";
}

ScenarioKind parse_scenario(std::string_view name) {
  for (ScenarioKind k : kAllScenarios) {
    if (scenario_name(k) == name) return k;
  }
  throw ConfigError(fmt::format("unknown scenario '{}'", name));
}

std::vector<LogEvent> gen_normal_user(const UserProfile &profile, int days, std::uint64_t seed,
                                      Timestamp start) {
  profile.validate();
  if (days < 1) throw ConfigError("gen_normal_user: days must be >= 1");
  Rng rng(seed);
  EventFactory factory("N", profile, start);
  std::vector<LogEvent> events;

  // Logon and logoff are centred inside the first and last work hours, so
  // the jitter keeps them within the profile's hour codes.
  for (int day = 0; day < days; ++day) {
    const int wd = weekday_of(start + std::chrono::days{day});
    if (!(profile.workdays & (1u << wd))) continue;

    int drift = 0;
    if (profile.shift_drift > 0) {
      const int lo = std::max(-profile.shift_drift, 1 - profile.work_start);
      const int hi = std::min(profile.shift_drift, 24 - profile.work_end);
      drift = uniform_int(rng, lo, hi);
    }
    const int begin = (profile.work_start + drift - 1) * 60 + kJitter;
    const int finish = (profile.work_end + drift) * 60 - kJitter;

    // Jitter is drawn inside the day rather than clamped, so shifts that
    // touch midnight do not pile events onto the first or last minute.
    const int logon = begin + uniform_int(rng, -kJitter, kJitter - 1);
    const int logoff = std::max(finish + uniform_int(rng, -kJitter, kJitter - 1), logon + 2);
    std::vector<LogEvent> day_events;
    day_events.push_back(factory.make(day, logon, 0, ActivityKind::Logon, profile.pc));

    for (ActivityKind kind : {ActivityKind::Http, ActivityKind::Email, ActivityKind::File}) {
      const std::size_t count = poisson(rng, profile.rate(kind));
      for (std::size_t k = 0; k < count; ++k) {
        const int minute = uniform_int(rng, logon + 1, logoff - 1);
        day_events.push_back(factory.make(day, minute, uniform_int(rng, 0, 59), kind, profile.pc));
      }
    }
    const std::size_t pairs = logoff - logon >= 3 ? poisson(rng, profile.rate(ActivityKind::Connect)) : 0;
    for (std::size_t k = 0; k < pairs; ++k) {
      const int connect = uniform_int(rng, logon + 1, logoff - 2);
      const int disconnect = uniform_int(rng, connect + 1, std::min(connect + 60, logoff - 1));
      day_events.push_back(factory.make(day, connect, uniform_int(rng, 0, 59),
                                        ActivityKind::Connect, profile.pc));
      day_events.push_back(factory.make(day, disconnect, uniform_int(rng, 0, 59),
                                        ActivityKind::Disconnect, profile.pc));
    }
    // Evening work from home, after the logoff jitter band.
    const std::size_t late = poisson(rng, profile.overtime_rate);
    const int late_begin = finish + 61;
    const int late_end = std::min(finish + 240, kMinutesPerDay - 1);
    for (std::size_t k = 0; k < late && late_begin <= late_end; ++k) {
      const ActivityKind kind = uniform_int(rng, 0, 1) ? ActivityKind::Http : ActivityKind::Email;
      day_events.push_back(factory.make(day, uniform_int(rng, late_begin, late_end),
                                        uniform_int(rng, 0, 59), kind, profile.pc));
    }
    day_events.push_back(factory.make(day, logoff, 0, ActivityKind::Logoff, profile.pc));

    std::stable_sort(day_events.begin(), day_events.end(), event_order_less);
    events.insert(events.end(), std::make_move_iterator(day_events.begin()),
                  std::make_move_iterator(day_events.end()));
  }
  return events;
}

namespace {

struct Step {
  ActivityKind activity;
  std::string detail;
  std::string pc;
};

/// Gap in minutes before each step after the first.
std::vector<int> step_gaps(Rng &rng, std::size_t n) {
  std::vector<int> gaps(n, 0);
  for (std::size_t i = 1; i < n; ++i) gaps[i] = uniform_int(rng, 1, 2);
  return gaps;
}

/// First minute of a window that keeps every step inside the night band and
/// away from the user's work hours (including the jitter margin).
int place_session(Rng &rng, const UserProfile &user, const ScenarioParams &params, int length) {
  auto allowed = [&](int minute) {
    const int code = minute / 60 + 1;
    const int work_lo = (user.work_start - 1) * 60 - kJitter;
    const int work_hi = user.work_end * 60 - 1 + kJitter;
    return code >= params.night_first && code <= params.night_last &&
           (minute < work_lo || minute > work_hi);
  };
  std::vector<int> starts;
  for (int m = 0; m + length < kMinutesPerDay; ++m) {
    bool ok = true;
    for (int k = 0; k <= length && ok; ++k) ok = allowed(m + k);
    if (ok) starts.push_back(m);
  }
  if (starts.empty()) {
    throw ConfigError(fmt::format("scenario for {}: no off-hours window of {} minutes", user.id, length));
  }
  return starts[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(starts.size()) - 1))];
}

} // namespace

GeneratedEvents inject_scenario(ScenarioKind kind, const UserProfile &user, DayRange timeline,
                                std::uint64_t seed, const ScenarioParams &params, Timestamp start) {
  user.validate();
  if (timeline.last < timeline.first || timeline.first < 0) {
    throw ConfigError("inject_scenario: empty timeline");
  }
  Rng rng(seed);
  EventFactory factory("M", user, start);
  GeneratedEvents out;
  const std::string supervisor_pc = user.pc + "-SUP";

  auto session = [&](int day, std::vector<Step> steps) {
    steps.insert(steps.begin(), Step{ActivityKind::Logon, "", steps.front().pc});
    steps.push_back(Step{ActivityKind::Logoff, "", steps.back().pc});
    const auto gaps = step_gaps(rng, steps.size());
    const int length = std::accumulate(gaps.begin(), gaps.end(), 0);
    int minute = place_session(rng, user, params, length);
    for (std::size_t i = 0; i < steps.size(); ++i) {
      minute += gaps[i];
      LogEvent e = factory.make(day, minute, 0, steps[i].activity, steps[i].pc);
      out.malicious_ids.insert(e.id);
      if (!steps[i].detail.empty()) out.details[e.id] = steps[i].detail;
      out.events.push_back(std::move(e));
    }
  };
  auto repeat = [](std::vector<Step> &steps, std::size_t n, const Step &step) {
    for (std::size_t i = 0; i < n; ++i) steps.push_back(step);
  };
  auto pick_day = [&](int lo, int hi) { return uniform_int(rng, lo, hi); };

  switch (kind) {
  case ScenarioKind::AfterHoursExfil: {
    std::vector<Step> steps;
    steps.push_back({ActivityKind::Connect, "", user.pc});
    for (std::size_t i = 0; i < params.exfil_files; ++i) {
      steps.push_back({ActivityKind::File, fmt::format("R:\\confidential\\{:03d}.doc", i), user.pc});
    }
    repeat(steps, params.exfil_uploads, {ActivityKind::Http, "http://wikileaks.org/upload", user.pc});
    steps.push_back({ActivityKind::Disconnect, "", user.pc});
    session(pick_day(timeline.first, timeline.last), std::move(steps));
    break;
  }
  case ScenarioKind::JobSeekerTheft: {
    const int theft_day = timeline.last;
    const int browse_hi = std::max(timeline.first, timeline.last - 1);
    std::vector<int> job_days;
    for (std::size_t i = 0; i < std::max<std::size_t>(params.job_days, 1); ++i) {
      job_days.push_back(pick_day(timeline.first, browse_hi));
    }
    std::sort(job_days.begin(), job_days.end());
    job_days.erase(std::unique(job_days.begin(), job_days.end()), job_days.end());
    for (int day : job_days) {
      std::vector<Step> steps;
      for (std::size_t i = 0; i < params.job_visits; ++i) {
        steps.push_back({ActivityKind::Http, fmt::format("http://jobhuntersdb.com/apply/{}", i), user.pc});
      }
      if (day == theft_day) continue; // browsing folds into the theft session below
      if (!steps.empty()) session(day, std::move(steps));
    }
    std::vector<Step> theft;
    if (job_days.back() == theft_day) {
      repeat(theft, params.job_visits, {ActivityKind::Http, "http://jobhuntersdb.com/apply", user.pc});
    }
    theft.push_back({ActivityKind::Connect, "", user.pc});
    for (std::size_t i = 0; i < params.theft_files; ++i) {
      theft.push_back({ActivityKind::File, fmt::format("R:\\projects\\design_{:03d}.pdf", i), user.pc});
    }
    theft.push_back({ActivityKind::Disconnect, "", user.pc});
    session(theft_day, std::move(theft));
    break;
  }
  case ScenarioKind::AdminKeylogger: {
    const int plant_day = timeline.first == timeline.last
                              ? timeline.first
                              : pick_day(timeline.first, timeline.last - 1);
    const int email_day = timeline.first == timeline.last ? timeline.first
                                                          : pick_day(plant_day + 1, timeline.last);
    std::vector<Step> plant;
    plant.push_back({ActivityKind::Http, "http://keylogger-download.com/setup.exe", user.pc});
    plant.push_back({ActivityKind::Connect, "", user.pc});
    repeat(plant, std::max<std::size_t>(params.keylogger_files, 1),
           {ActivityKind::File, "keylogger.exe", user.pc});
    plant.push_back({ActivityKind::Disconnect, "", user.pc});
    std::vector<Step> blast;
    repeat(blast, params.email_burst, {ActivityKind::Email, "all-staff@dtaa.com", supervisor_pc});
    if (plant_day == email_day) {
      plant.push_back({ActivityKind::Logoff, "", user.pc});
      plant.push_back({ActivityKind::Logon, "", supervisor_pc});
      plant.insert(plant.end(), blast.begin(), blast.end());
      session(plant_day, std::move(plant));
    } else {
      session(plant_day, std::move(plant));
      if (!blast.empty()) session(email_day, std::move(blast));
    }
    break;
  }
  }
  std::stable_sort(out.events.begin(), out.events.end(), event_order_less);
  return out;
}

std::string SynthConfig::canonical() const {
  std::ostringstream s;
  s << "users=" << users << "\ninsiders=" << insiders << "\ndays=" << days << "\nseed=" << seed
    << "\nstart=" << format_timestamp(start) << "\nbenign_start=" << benign_start[0] << ','
    << benign_start[1] << "\nbenign_end=" << benign_end[0] << ',' << benign_end[1]
    << "\nbenign_overtime=" << benign_overtime << "\ninsider_start=" << insider_start[0] << ','
    << insider_start[1] << "\ninsider_end=" << insider_end[0] << ',' << insider_end[1]
    << "\ninsider_early=" << insider_early_start[0] << ',' << insider_early_start[1] << ','
    << insider_early_end[0] << ',' << insider_early_end[1] << ',' << insider_early_fraction
    << "\ninsider_rate_scale=" << insider_rate_scale << "\ninsider_workdays=" << insider_workdays << "\ninsider_shift_drift=" << insider_shift_drift << "\nhttp_rate=" << http_rate[0] << ',' << http_rate[1] << "\nemail_rate=" << email_rate[0]
    << ',' << email_rate[1] << "\nfile_rate=" << file_rate[0] << ',' << file_rate[1]
    << "\ndevice_rate=" << device_rate[0] << ',' << device_rate[1]
    << "\nexfil_files=" << scenario.exfil_files << "\nexfil_uploads=" << scenario.exfil_uploads
    << "\njob_days=" << scenario.job_days << "\njob_visits=" << scenario.job_visits
    << "\ntheft_files=" << scenario.theft_files << "\nkeylogger_files=" << scenario.keylogger_files
    << "\nemail_burst=" << scenario.email_burst << "\nnight=" << scenario.night_first << ','
    << scenario.night_last << '\n';
  return s.str();
}

Dataset gen_dataset(const SynthConfig &cfg) {
  if (cfg.insiders > cfg.users) throw ConfigError("gen_dataset: more insiders than users");
  if (cfg.days < 1) throw ConfigError("gen_dataset: days must be >= 1");

  Rng rng(cfg.seed);
  Dataset data;
  std::set<std::string> taken;
  for (std::size_t i = 0; i < cfg.users; ++i) {
    UserProfile p;
    do {
      std::string id;
      for (int k = 0; k < 3; ++k) id.push_back(static_cast<char>('A' + uniform_int(rng, 0, 25)));
      p.id = fmt::format("{}{:04d}", id, uniform_int(rng, 0, 9999));
    } while (!taken.insert(p.id).second);
    p.pc = fmt::format("PC-{:04d}", i);
    p.work_start = uniform_int(rng, cfg.benign_start[0], cfg.benign_start[1]);
    p.work_end = uniform_int(rng, cfg.benign_end[0], cfg.benign_end[1]);
    p.rate(ActivityKind::Http) = uniform_real(rng, cfg.http_rate[0], cfg.http_rate[1]);
    p.rate(ActivityKind::Email) = uniform_real(rng, cfg.email_rate[0], cfg.email_rate[1]);
    p.rate(ActivityKind::File) = uniform_real(rng, cfg.file_rate[0], cfg.file_rate[1]);
    p.rate(ActivityKind::Connect) = uniform_real(rng, cfg.device_rate[0], cfg.device_rate[1]);
    p.overtime_rate = cfg.benign_overtime;
    data.profiles.push_back(std::move(p));
  }

  std::vector<std::size_t> order(cfg.users);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::optional<ScenarioKind>> scenario_of(cfg.users);
  for (std::size_t k = 0; k < cfg.insiders; ++k) {
    const std::size_t u = order[k];
    const ScenarioKind kind = kAllScenarios[k % kAllScenarios.size()];
    UserProfile &p = data.profiles[u];
    const bool early = uniform_real(rng, 0.0, 1.0) < cfg.insider_early_fraction;
    const auto &start = early ? cfg.insider_early_start : cfg.insider_start;
    const auto &end = early ? cfg.insider_early_end : cfg.insider_end;
    p.work_start = uniform_int(rng, start[0], start[1]);
    p.work_end = uniform_int(rng, std::max(end[0], p.work_start + 1), std::max(end[1], p.work_start + 1));
    std::array<int, 7> week{0, 1, 2, 3, 4, 5, 6};
    std::shuffle(week.begin(), week.end(), rng);
    p.workdays = 0;
    for (int k = 0; k < std::clamp(cfg.insider_workdays, 1, 7); ++k) p.workdays |= 1u << week[k];
    for (double &r : p.rates) r *= cfg.insider_rate_scale;
    p.shift_drift = cfg.insider_shift_drift;
    p.overtime_rate = 0.0;
    if (kind == ScenarioKind::AdminKeylogger) p.role = "ITAdmin";
    scenario_of[u] = kind;
    data.truth.roster.insert(p.id);
    data.truth.scenarios[p.id] = kind;
  }

  std::vector<std::vector<LogEvent>> streams(cfg.users);
  std::vector<GeneratedEvents> injected(cfg.users);
  std::vector<std::exception_ptr> failures(cfg.users);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t u = 0; u < cfg.users; ++u) {
    try {
      streams[u] = gen_normal_user(data.profiles[u], cfg.days, mix_seed(cfg.seed, 2 * u), cfg.start);
      if (scenario_of[u]) {
        injected[u] = inject_scenario(*scenario_of[u], data.profiles[u], {0, cfg.days - 1},
                                      mix_seed(cfg.seed, 2 * u + 1), cfg.scenario, cfg.start);
        auto &s = streams[u];
        const auto &extra = injected[u].events;
        const auto mid = static_cast<std::ptrdiff_t>(s.size());
        s.insert(s.end(), extra.begin(), extra.end());
        std::inplace_merge(s.begin(), s.begin() + mid, s.end(), event_order_less);
      }
    } catch (...) {
      failures[u] = std::current_exception();
    }
  }
  for (const auto &f : failures) {
    if (f) std::rethrow_exception(f);
  }
  for (auto &g : injected) {
    data.truth.malicious_ids.insert(g.malicious_ids.begin(), g.malicious_ids.end());
    data.details.insert(g.details.begin(), g.details.end());
  }
  data.events = merge_events(std::move(streams));
  return data;
}

namespace {

constexpr std::array<std::string_view, 8> kBenignSites = {
    "http://www.google.com/search", "http://en.wikipedia.org/wiki", "http://www.cnn.com/news",
    "http://www.weather.com/today", "http://www.amazon.com/books", "http://intranet.dtaa.com/hr",
    "http://www.bbc.co.uk/news", "http://www.github.com/explore"};

std::string address(const std::string &user) { return user + "@dtaa.com"; }

} // namespace

void write_dataset(const Dataset &data, const std::filesystem::path &dir,
                   const ArtifactHeader &header) {
  std::filesystem::create_directories(dir);
  auto open = [&](std::string_view name, std::string_view columns) {
    auto out = std::make_unique<std::ofstream>(dir / name);
    if (!*out) throw ConfigError("cannot write " + (dir / name).string());
    *out << header.comment_line() << '\n' << columns << '\n';
    return out;
  };
  auto logon = open("logon.csv", "id,date,user,pc,activity");
  auto device = open("device.csv", "id,date,user,pc,activity");
  auto http = open("http.csv", "id,date,user,pc,url");
  auto email = open("email.csv", "id,date,user,pc,to,cc,bcc,from,size,attachments");
  auto file = open("file.csv", "id,date,user,pc,filename");

  std::vector<std::string> colleagues;
  for (const auto &p : data.profiles) colleagues.push_back(p.id);

  for (const auto &e : data.events) {
    const std::uint64_t h = fnv1a(e.id);
    const auto detail = data.details.find(e.id);
    const bool has_detail = detail != data.details.end();
    const std::string base = fmt::format("{},{},{},{}", e.id, format_timestamp(e.timestamp), e.user,
                                         e.pc.value_or(""));
    switch (e.activity) {
    case ActivityKind::Logon:
    case ActivityKind::Logoff:
      *logon << base << ',' << activity_name(e.activity) << '\n';
      break;
    case ActivityKind::Connect:
    case ActivityKind::Disconnect:
      *device << base << ',' << activity_name(e.activity) << '\n';
      break;
    case ActivityKind::Http:
      *http << base << ','
            << csv::escape(has_detail ? detail->second
                                      : fmt::format("{}/{}", kBenignSites[h % kBenignSites.size()], h % 997))
            << '\n';
      break;
    case ActivityKind::Email: {
      const std::string to = has_detail ? detail->second
                                        : address(colleagues[h % colleagues.size()]);
      *email << base << ',' << csv::escape(to) << ",,," << address(e.user) << ','
             << 1000 + h % 50000 << ',' << (h >> 20) % 3 << '\n';
      break;
    }
    case ActivityKind::File:
      *file << base << ','
            << csv::escape(has_detail ? detail->second : fmt::format("doc_{:05d}.docx", h % 100000))
            << '\n';
      break;
    }
  }

  auto psych = open("psychometric.csv", "employee_name,user_id,O,C,E,A,N");
  auto ldap = open("ldap.csv", "employee_name,user_id,email,role,supervisor");
  for (std::size_t i = 0; i < data.profiles.size(); ++i) {
    const auto &p = data.profiles[i];
    *psych << "Employee " << p.id << ',' << p.id << ",30,30,30,30,30\n";
    const auto &boss = data.profiles[i == 0 ? 0 : (i - 1) / 5].id;
    *ldap << "Employee " << p.id << ',' << p.id << ',' << address(p.id) << ',' << p.role << ','
          << boss << '\n';
  }

  auto truth = open("ground_truth.csv", "user,scenario");
  for (const auto &[user, kind] : data.truth.scenarios) *truth << user << ',' << scenario_name(kind) << '\n';
  auto malicious = open("malicious_events.csv", "id");
  for (const auto &id : data.truth.malicious_ids) *malicious << id << '\n';
}

GroundTruth read_ground_truth(const std::filesystem::path &path) {
  const csv::Table table = csv::read_file(path);
  if (table.header.size() < 2 || table.header[0] != "user" || table.header[1] != "scenario") {
    throw SchemaError(path.string() + ": expected header user,scenario");
  }
  GroundTruth truth;
  for (const auto &row : table.rows) {
    if (row.cells.size() < 2) throw ParseError(row.line, path.string() + ": expected user,scenario");
    truth.roster.insert(row.cells[0]);
    truth.scenarios[row.cells[0]] = parse_scenario(row.cells[1]);
  }
  return truth;
}

} // namespace itd::synth
