#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "itd/common.hpp"
#include "itd/ingest.hpp"

namespace itd::synth {

/// Work hours use the feature hour codes: code h covers clock hour h-1, so
/// (9, 17) spans 08:00 through 16:59.
struct UserProfile {
  std::string id;
  std::string role = "Employee";
  std::string pc;
  int work_start = 9;
  int work_end = 17;
  /// Expected events per working day, indexed by ActivityKind. Logon/Logoff
  /// are one pair per day regardless; Connect counts Connect/Disconnect
  /// pairs; the Disconnect entry is unused.
  std::array<double, 7> rates{};
  /// Bit i set = works on weekday i (0 = Monday).
  std::uint8_t workdays = 0b0011111;
  /// Expected evening Http/Email events per working day, placed after the
  /// logoff jitter band.
  double overtime_rate = 0.0;
  /// Each working day the whole shift moves by a uniform whole number of
  /// hours in [-shift_drift, shift_drift], clipped to stay inside the day.
  int shift_drift = 0;

  double rate(ActivityKind kind) const { return rates[static_cast<std::size_t>(kind)]; }
  double &rate(ActivityKind kind) { return rates[static_cast<std::size_t>(kind)]; }
  /// Throws ConfigError unless 1 <= start < end <= 24 and rates >= 0.
  void validate() const;
};

enum class ScenarioKind : std::uint8_t { AfterHoursExfil, JobSeekerTheft, AdminKeylogger };

inline constexpr std::array<ScenarioKind, 3> kAllScenarios = {
    ScenarioKind::AfterHoursExfil, ScenarioKind::JobSeekerTheft, ScenarioKind::AdminKeylogger};

std::string_view scenario_name(ScenarioKind kind);
ScenarioKind parse_scenario(std::string_view name);

struct ScenarioParams {
  std::size_t exfil_files = 10;
  std::size_t exfil_uploads = 2;
  std::size_t job_days = 5;
  std::size_t job_visits = 6;
  std::size_t theft_files = 15;
  std::size_t keylogger_files = 1;
  std::size_t email_burst = 20;
  /// Scenario sessions start inside this band of hour codes (night).
  int night_first = 1;
  int night_last = 6;
};

/// Inclusive day offsets from the corpus start.
struct DayRange {
  int first = 0;
  int last = 0;
};

inline Timestamp default_start() { return make_timestamp(2010, 1, 1); }

/// Benign daily rhythm: Logon near work start and Logoff near work end
/// (+-30 min), Poisson-count Http/Email/File inside the session, and
/// Connect/Disconnect pairs. Deterministic in `seed`.
std::vector<LogEvent> gen_normal_user(const UserProfile &profile, int days, std::uint64_t seed,
                                      Timestamp start = default_start());

struct GeneratedEvents {
  std::vector<LogEvent> events;
  std::set<std::string> malicious_ids;
  /// url / filename / recipient for scenario events, keyed by event id.
  std::map<std::string, std::string> details;
};

/// Emits one scenario's characteristic sequence inside `timeline`. Every
/// session is bracketed by Logon/Logoff and placed in the night band,
/// outside the user's work hours and their jitter margin.
GeneratedEvents inject_scenario(ScenarioKind kind, const UserProfile &user, DayRange timeline,
                                std::uint64_t seed, const ScenarioParams &params = {},
                                Timestamp start = default_start());

struct GroundTruth {
  std::set<std::string> roster;
  std::map<std::string, ScenarioKind> scenarios;
  std::set<std::string> malicious_ids;
};

struct SynthConfig {
  std::size_t users = 100;
  std::size_t insiders = 10;
  int days = 60;
  std::uint64_t seed = 1;
  Timestamp start = default_start();

  // Benign staff: weekday office hours.
  std::array<int, 2> benign_start{8, 10};
  std::array<int, 2> benign_end{16, 18};
  double benign_overtime = 0.0;
  // Insiders work an off-hours shift, every day of the week: a late one, or
  // with probability insider_early_fraction an early one.
  std::array<int, 2> insider_start{21, 23};
  std::array<int, 2> insider_end{24, 24};
  std::array<int, 2> insider_early_start{2, 3};
  std::array<int, 2> insider_early_end{4, 4};
  double insider_early_fraction = 0.5;
  /// Insider daily rates are the sampled benign rates times this factor, so
  /// their shift stays sparse next to the office-hours bulk.
  double insider_rate_scale = 0.3;
  /// Insiders work this many randomly chosen days of the week (weekends included).
  int insider_workdays = 3;
  /// Day-to-day drift of insider shifts, in hours.
  int insider_shift_drift = 2;
  // Uniform ranges of daily rates.
  std::array<double, 2> http_rate{3.0, 8.0};
  std::array<double, 2> email_rate{2.0, 5.0};
  std::array<double, 2> file_rate{0.5, 2.0};
  std::array<double, 2> device_rate{0.5, 1.5};

  ScenarioParams scenario{};

  /// Canonical key=value text, used for the provenance hash.
  std::string canonical() const;
};

struct Dataset {
  std::vector<UserProfile> profiles;
  std::vector<LogEvent> events; ///< merged, sorted
  GroundTruth truth;
  std::map<std::string, std::string> details;
};

/// n_users profiles; n_insiders of them (chosen by seed) get one scenario
/// each, assigned round-robin over the three kinds. Users are generated on
/// parallel workers and merged in user order.
Dataset gen_dataset(const SynthConfig &cfg);

/// Writes the seven CERT-style CSVs plus ground_truth.csv (`user,scenario`)
/// and malicious_events.csv (`id`).
void write_dataset(const Dataset &data, const std::filesystem::path &dir,
                   const ArtifactHeader &header);

GroundTruth read_ground_truth(const std::filesystem::path &path);

} // namespace itd::synth
