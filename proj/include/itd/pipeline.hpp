#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "itd/ae.hpp"
#include "itd/eval.hpp"
#include "itd/features.hpp"
#include "itd/ingest.hpp"
#include "itd/synthgen.hpp"
#include "itd/trainer.hpp"
#include "itd/vae.hpp"

namespace itd::pipeline {

/// A failure inside a named stage. `usage` marks configuration/path errors
/// (exit code 2) as opposed to runtime or numeric failures (exit code 1).
class StageError : public Error {
public:
  StageError(std::string stage, const std::string &what, bool usage);
  const std::string &stage() const noexcept { return stage_; }
  bool usage() const noexcept { return usage_; }

private:
  std::string stage_;
  bool usage_;
};

/// Runs `fn`, rethrowing any failure as a StageError tagged with `stage`.
template <typename F> auto run_stage(const std::string &stage, F &&fn) -> decltype(fn());

struct ModelOptions {
  nn::TrainConfig train;
  std::optional<double> lr; ///< nullopt = pick with the lr finder
  nn::LrFinderConfig lrfind;
  /// Fraction of the training split held out for threshold calibration.
  double calib_fraction = 0.2;
  bool benign_only = false;
  ae::ThresholdStrategy threshold{};
};

struct RunConfig {
  std::filesystem::path data_dir; ///< CERT file set; filled by synth when `synth` is set
  std::filesystem::path out_dir = "run";
  std::filesystem::path roster;   ///< defaults to <data_dir>/ground_truth.csv when present
  std::uint64_t seed = 1;

  bool synth = false;
  synth::SynthConfig synth_cfg{};

  IngestOptions ingest{};
  FeatureOptions features{};
  double split_ratio = 0.75;

  ModelOptions ae{};
  std::size_t bottleneck = 0;
  ModelOptions vae{};
  std::size_t latent = 2;
  double kl_weight = 1.0;
  std::size_t vae_score_samples = 16;

  RunConfig();
  /// Canonical key=value text; its FNV-1a hash goes into every artifact.
  std::string canonical() const;
  ArtifactHeader header() const;
};

std::set<std::string> load_roster(const std::filesystem::path &path);

/// Ingest + label. Warns (to `warnings`) about roster users missing from
/// the directory files.
std::vector<EncodedEvent> ingest_and_label(const std::filesystem::path &data_dir,
                                           const std::set<std::string> &roster,
                                           const IngestOptions &options,
                                           std::vector<std::string> *warnings = nullptr);

/// Training rows for fitting plus the held-out slice used for calibration.
struct CalibrationSplit {
  Samples fit;
  Samples calib;
  std::vector<std::uint8_t> calib_labels;
};

/// The last round(fraction * n) training vectors form the calibration slice;
/// the rest (label-0 only when benign_only) are for fitting.
CalibrationSplit split_for_calibration(std::span<const FeatureVector> train, double fraction,
                                       bool benign_only);

std::vector<ae::ScoredLabel> pair_scores(std::span<const double> scores,
                                         std::span<const std::uint8_t> labels);

struct FitReport {
  double lr = 0.0;
  std::optional<nn::LrFinderResult> lrfind;
};

ae::AeModel fit_ae(std::span<const FeatureVector> train, const ModelOptions &opt,
                   std::size_t bottleneck, std::uint64_t seed, FitReport *report = nullptr);
vae::VaeModel fit_vae(std::span<const FeatureVector> train, const ModelOptions &opt,
                      std::size_t latent, double kl_weight, std::size_t score_samples,
                      std::uint64_t seed, FitReport *report = nullptr);

eval::EvalReport evaluate(std::string model, std::span<const double> scores,
                          std::span<const std::uint8_t> labels, double threshold);

// scores.csv: provenance comment, `# model=<name>`, optional
// `# threshold=<value>`, then `index,score,label`.
struct ScoreFile {
  std::string model;
  std::optional<double> threshold;
  std::vector<ae::ScoredLabel> rows;
};
void write_scores(const std::filesystem::path &path, const ScoreFile &scores,
                  const ArtifactHeader &header);
ScoreFile read_scores(const std::filesystem::path &path);

struct PipelineResult {
  std::vector<eval::EvalReport> reports;
  std::vector<std::string> log;
};

/// synth (optional) -> ingest -> featurize -> lrfind -> train-ae / train-vae
/// -> score -> eval, writing every intermediate artifact to cfg.out_dir.
PipelineResult run_pipeline(const RunConfig &cfg);

// Implementation of run_stage.
template <typename F> auto run_stage(const std::string &stage, F &&fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError &) {
    throw;
  } catch (const ConfigError &e) {
    throw StageError(stage, e.what(), true);
  } catch (const std::exception &e) {
    throw StageError(stage, e.what(), false);
  }
}

} // namespace itd::pipeline
