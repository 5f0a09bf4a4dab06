#include "itd/pipeline.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "itd/csv.hpp"
#include "itd/serialize.hpp"

namespace itd::pipeline {

StageError::StageError(std::string stage, const std::string &what, bool usage)
    : Error(fmt::format("{}: {}", stage, what)), stage_(std::move(stage)), usage_(usage) {}

RunConfig::RunConfig() {
  ae.train = ae::default_train_config();
  vae.train = vae::default_train_config();
}

std::string RunConfig::canonical() const {
  std::ostringstream s;
  auto model = [&](std::string_view name, const ModelOptions &m) {
    s << name << ".epochs=" << m.train.epochs << '\n'
      << name << ".batch=" << m.train.batch_size << '\n'
      << name << ".lr=" << (m.lr ? fmt::format("{:.17g}", *m.lr) : std::string("auto")) << '\n'
      << name << ".lrfind=" << m.lrfind.lr_min << ',' << m.lrfind.lr_max << ',' << m.lrfind.steps
      << ',' << m.lrfind.smoothing << ',' << m.lrfind.divergence_factor << ','
      << m.lrfind.skip_start << '\n'
      << name << ".calib_fraction=" << m.calib_fraction << '\n'
      << name << ".benign_only=" << m.benign_only << '\n'
      << name << ".threshold=" << m.threshold.to_string() << '\n';
  };
  s << "seed=" << seed << '\n';
  if (synth) {
    s << "synth=1\n" << synth_cfg.canonical();
  } else {
    s << "data_dir=" << data_dir.string() << '\n';
  }
  s << "roster=" << roster.string() << '\n'
    << "time_format=" << ingest.time_format << '\n'
    << "sample=" << ingest.sample << '\n'
    << "pad_to=" << features.pad_to << '\n'
    << "label_as_feature=" << features.label_as_feature << '\n'
    << "split_ratio=" << split_ratio << '\n'
    << "bottleneck=" << bottleneck << '\n'
    << "latent=" << latent << '\n'
    << "kl_weight=" << kl_weight << '\n'
    << "vae_score_samples=" << vae_score_samples << '\n';
  model("ae", ae);
  model("vae", vae);
  return s.str();
}

ArtifactHeader RunConfig::header() const { return {fnv1a(canonical()), seed}; }

std::set<std::string> load_roster(const std::filesystem::path &path) {
  return synth::read_ground_truth(path).roster;
}

std::vector<EncodedEvent> ingest_and_label(const std::filesystem::path &data_dir,
                                           const std::set<std::string> &roster,
                                           const IngestOptions &options,
                                           std::vector<std::string> *warnings) {
  const Corpus corpus = ingest_directory(data_dir, options);
  if (warnings) {
    for (const auto &r : corpus.reports) {
      for (const auto &e : r.errors) warnings->push_back(e);
    }
    if (!corpus.directory_users.empty()) {
      for (const auto &user : roster) {
        if (!std::binary_search(corpus.directory_users.begin(), corpus.directory_users.end(), user)) {
          warnings->push_back(fmt::format("insider {} is not listed in ldap/psychometric files", user));
        }
      }
    }
  }
  return label_insiders(encode_events(corpus.events), roster);
}

CalibrationSplit split_for_calibration(std::span<const FeatureVector> train, double fraction,
                                       bool benign_only) {
  if (train.empty()) throw ConfigError("no training vectors");
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw ConfigError(fmt::format("calibration fraction {} outside [0, 1)", fraction));
  }
  const auto n_calib = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(train.size())));
  const std::size_t n_fit = train.size() - n_calib;
  std::vector<FeatureVector> fit;
  for (std::size_t i = 0; i < n_fit; ++i) {
    if (!benign_only || train[i].label == 0) fit.push_back(train[i]);
  }
  if (fit.empty()) throw ConfigError("no vectors left to fit on");
  // A zero fraction calibrates on the full training split.
  const auto calib = n_calib == 0 ? train : train.subspan(n_fit);
  CalibrationSplit out;
  out.fit = to_samples(fit);
  out.calib = to_samples(calib);
  out.calib_labels = labels_of(calib);
  return out;
}

std::vector<ae::ScoredLabel> pair_scores(std::span<const double> scores,
                                         std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw ConfigError("scores/labels length mismatch");
  std::vector<ae::ScoredLabel> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = {scores[i], labels[i]};
  return out;
}

namespace {

double pick_lr(const nn::Trainable &objective, const ModelOptions &opt, std::uint64_t seed,
               FitReport *report) {
  if (opt.lr) return *opt.lr;
  nn::LrFinderConfig cfg = opt.lrfind;
  cfg.batch_size = opt.train.batch_size;
  cfg.seed = mix_seed(seed, 7);
  cfg.nadam = opt.train.nadam;
  auto result = nn::lr_finder(objective, cfg);
  const double lr = result.suggested_lr;
  if (report) report->lrfind = std::move(result);
  return lr;
}

} // namespace

ae::AeModel fit_ae(std::span<const FeatureVector> train, const ModelOptions &opt,
                   std::size_t bottleneck, std::uint64_t seed, FitReport *report) {
  const CalibrationSplit split = split_for_calibration(train, opt.calib_fraction, opt.benign_only);
  ae::AeModel model = ae::build_ae(split.fit.dim(), bottleneck, mix_seed(seed, 1));
  nn::TrainConfig cfg = opt.train;
  cfg.seed = mix_seed(seed, 2);
  {
    nn::NetworkObjective objective(model.net, split.fit, split.fit, model.loss);
    cfg.lr = pick_lr(objective, opt, seed, report);
  }
  if (report) report->lr = cfg.lr;
  ae::train_ae(model, split.fit, cfg);
  const auto scores = ae::score_all(model, split.calib);
  model.threshold = ae::calibrate_threshold(pair_scores(scores, split.calib_labels), opt.threshold);
  return model;
}

vae::VaeModel fit_vae(std::span<const FeatureVector> train, const ModelOptions &opt,
                      std::size_t latent, double kl_weight, std::size_t score_samples,
                      std::uint64_t seed, FitReport *report) {
  const CalibrationSplit split = split_for_calibration(train, opt.calib_fraction, opt.benign_only);
  vae::VaeModel model = vae::build_vae(split.fit.dim(), latent, mix_seed(seed, 3));
  model.kl_weight = kl_weight;
  nn::TrainConfig cfg = opt.train;
  cfg.seed = mix_seed(seed, 4);
  {
    vae::VaeObjective objective(model, split.fit);
    cfg.lr = pick_lr(objective, opt, seed, report);
  }
  if (report) report->lr = cfg.lr;
  vae::train_vae(model, split.fit, cfg);
  const auto scores = vae::score_all(model, split.calib, score_samples, mix_seed(seed, 5));
  model.threshold = ae::calibrate_threshold(pair_scores(scores, split.calib_labels), opt.threshold);
  return model;
}

eval::EvalReport evaluate(std::string model, std::span<const double> scores,
                          std::span<const std::uint8_t> labels, double threshold) {
  std::vector<std::uint8_t> preds(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) preds[i] = ae::classify(scores[i], threshold);
  return eval::make_report(std::move(model), eval::confusion(preds, labels));
}

void write_scores(const std::filesystem::path &path, const ScoreFile &scores,
                  const ArtifactHeader &header) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << header.comment_line() << '\n' << "# model=" << scores.model << '\n';
  if (scores.threshold) out << fmt::format("# threshold={:.17g}\n", *scores.threshold);
  out << "index,score,label\n";
  for (std::size_t i = 0; i < scores.rows.size(); ++i) {
    out << fmt::format("{},{:.17g},{}\n", i, scores.rows[i].score, scores.rows[i].label);
  }
}

ScoreFile read_scores(const std::filesystem::path &path) {
  const csv::Table table = csv::read_file(path);
  if (table.header != csv::Row{"index", "score", "label"}) {
    throw SchemaError(path.string() + ": expected header index,score,label");
  }
  ScoreFile file;
  for (const auto &c : table.comments) {
    if (c.rfind("# model=", 0) == 0) file.model = c.substr(8);
    if (c.rfind("# threshold=", 0) == 0) file.threshold = std::stod(c.substr(12));
  }
  for (const auto &row : table.rows) {
    if (row.cells.size() != 3) throw ParseError(row.line, path.string() + ": expected 3 cells");
    try {
      const int label = std::stoi(row.cells[2]);
      if (label != 0 && label != 1) throw std::invalid_argument("label must be 0 or 1");
      file.rows.push_back({std::stod(row.cells[1]), static_cast<std::uint8_t>(label)});
    } catch (const std::exception &e) {
      throw ParseError(row.line, fmt::format("{}: {}", path.string(), e.what()));
    }
  }
  return file;
}

namespace {

void write_text(const std::filesystem::path &path, const std::string &text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void write_lrfind(const std::filesystem::path &path, const nn::LrFinderResult &r,
                  const ArtifactHeader &header) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << header.comment_line() << '\n'
      << fmt::format("# suggested_lr={:.17g}\n", r.suggested_lr) << "lr,loss,smoothed_loss\n";
  for (const auto &p : r.curve) out << fmt::format("{:.17g},{:.17g},{:.17g}\n", p.lr, p.loss, p.smoothed_loss);
}

} // namespace

PipelineResult run_pipeline(const RunConfig &cfg) {
  const ArtifactHeader header = cfg.header();
  const auto &out = cfg.out_dir;
  PipelineResult result;
  auto note = [&](std::string line) { result.log.push_back(std::move(line)); };

  std::filesystem::path data_dir = cfg.data_dir;
  if (cfg.synth) {
    data_dir = out / "data";
    run_stage("synth", [&] {
      std::filesystem::create_directories(out);
      const auto data = synth::gen_dataset(cfg.synth_cfg);
      synth::write_dataset(data, data_dir, header);
      note(fmt::format("synth: {} events, {} insiders", data.events.size(), data.truth.roster.size()));
    });
  }

  const auto events = run_stage("ingest", [&] {
    if (data_dir.empty() || !std::filesystem::is_directory(data_dir)) {
      throw ConfigError("input directory not found: " + data_dir.string());
    }
    std::filesystem::create_directories(out);
    std::filesystem::path roster_path = cfg.roster;
    if (roster_path.empty() && std::filesystem::exists(data_dir / "ground_truth.csv")) {
      roster_path = data_dir / "ground_truth.csv";
    }
    const auto roster = roster_path.empty() ? std::set<std::string>{} : load_roster(roster_path);
    std::vector<std::string> warnings;
    auto labeled = ingest_and_label(data_dir, roster, cfg.ingest, &warnings);
    for (auto &w : warnings) note("ingest warning: " + w);
    std::ofstream csv_out(out / "events.csv");
    write_events_csv(csv_out, labeled, header);
    note(fmt::format("ingest: {} events", labeled.size()));
    return labeled;
  });

  const auto split = run_stage("featurize", [&] {
    auto s = train_test_split(one_hot_all(events, cfg.features), cfg.split_ratio, cfg.seed);
    const std::size_t dim = cfg.features.dimension();
    write_vectors_bin(out / "train.bin", s.train, dim);
    write_vectors_bin(out / "test.bin", s.test, dim);
    note(fmt::format("featurize: {} train / {} test, dim {}", s.train.size(), s.test.size(), dim));
    return s;
  });

  const Samples test = to_samples(split.test);
  const auto test_labels = labels_of(split.test);

  const auto ae_model = run_stage("train-ae", [&] {
    FitReport fit;
    auto m = fit_ae(split.train, cfg.ae, cfg.bottleneck, mix_seed(cfg.seed, 11), &fit);
    if (fit.lrfind) write_lrfind(out / "ae_lrfind.csv", *fit.lrfind, header);
    save_model(out / "ae.model", m, header);
    write_loss_history(out / "ae_loss.csv", m.loss_history, header);
    note(fmt::format("train-ae: lr {:.3g}, final loss {:.6f}, threshold {:.6f}", fit.lr,
                     m.loss_history.back(), *m.threshold));
    return m;
  });

  const auto vae_model = run_stage("train-vae", [&] {
    FitReport fit;
    auto m = fit_vae(split.train, cfg.vae, cfg.latent, cfg.kl_weight, cfg.vae_score_samples,
                     mix_seed(cfg.seed, 12), &fit);
    if (fit.lrfind) write_lrfind(out / "vae_lrfind.csv", *fit.lrfind, header);
    save_model(out / "vae.model", m, header);
    write_loss_history(out / "vae_loss.csv", m.loss_history, header);
    note(fmt::format("train-vae: lr {:.3g}, final loss {:.6f}, threshold {:.6f}", fit.lr,
                     m.loss_history.back(), *m.threshold));
    return m;
  });

  const auto [ae_scores, vae_scores] = run_stage("score", [&] {
    auto a = ae::score_all(ae_model, test);
    auto v = vae::score_all(vae_model, test, cfg.vae_score_samples, mix_seed(cfg.seed, 13));
    write_scores(out / "ae_scores.csv", {"AE", ae_model.threshold, pair_scores(a, test_labels)}, header);
    write_scores(out / "vae_scores.csv", {"VAE", vae_model.threshold, pair_scores(v, test_labels)},
                 header);
    return std::pair{std::move(a), std::move(v)};
  });

  run_stage("eval", [&] {
    result.reports.push_back(evaluate("Autoencoder (AE)", ae_scores, test_labels, *ae_model.threshold));
    result.reports.push_back(
        evaluate("Variational Autoencoder (VAE)", vae_scores, test_labels, *vae_model.threshold));
    write_text(out / "report.txt", header.comment_line() + "\n" + eval::render_report(result.reports));
    write_text(out / "report.json", eval::reports_json(result.reports, header));
  });
  return result;
}

} // namespace itd::pipeline
