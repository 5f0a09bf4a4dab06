// itd: command-line front end for the insider-threat detection toolkit.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "itd/pipeline.hpp"
#include "itd/serialize.hpp"

namespace fs = std::filesystem;
using namespace itd;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Flat `key=value` file. Blank lines and `#` comments are skipped; keys use
// the long flag names of the subcommand they apply to.
std::vector<std::pair<std::string, std::string>> read_config(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t n = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++n;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(fmt::format("{}:{}: expected key=value", path.string(), n));
    }
    std::string key = trim(line.substr(0, eq));
    for (auto &c : key) {
      if (c == '_' || c == '.') c = '-';
    }
    out.emplace_back(key, trim(line.substr(eq + 1)));
  }
  return out;
}

std::optional<double> parse_lr(const std::string &text) {
  if (text == "auto") return std::nullopt;
  try {
    std::size_t used = 0;
    const double lr = std::stod(text, &used);
    if (used != text.size() || !(lr > 0.0)) throw std::invalid_argument(text);
    return lr;
  } catch (const std::exception &) {
    throw ConfigError("--lr must be 'auto' or a positive number, got '" + text + "'");
  }
}

void require_file(const fs::path &path, std::string_view what) {
  if (!fs::exists(path)) throw ConfigError(fmt::format("{} not found: {}", what, path.string()));
}

std::ofstream open_out(const fs::path &path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

ArtifactHeader header_for(const std::string &canonical, std::uint64_t seed) {
  return {fnv1a(canonical), seed};
}

std::function<void(std::size_t, double)> epoch_logger(std::string name, std::size_t epochs) {
  return [name = std::move(name), epochs](std::size_t e, double loss) {
    std::cerr << fmt::format("{} epoch {}/{} loss {:.6f}\n", name, e + 1, epochs, loss);
  };
}

std::string model_display_name(const ModelFile &file) {
  return std::holds_alternative<ae::AeModel>(file.model) ? "Autoencoder (AE)"
                                                         : "Variational Autoencoder (VAE)";
}

// Options shared by train-ae and train-vae.
struct TrainArgs {
  fs::path train, out, loss_out, lrfind_out;
  std::size_t epochs = 0, batch = 0;
  std::string lr = "auto";
  std::string threshold = "maxf1";
  double calib_fraction = 0.2;
  bool benign_only = false;
  std::uint64_t seed = 1;

  void add(CLI::App *sub) {
    sub->add_option("--train", train, "training vectors (.bin)")->required();
    sub->add_option("--out", out, "model file")->required();
    sub->add_option("--epochs", epochs)->capture_default_str();
    sub->add_option("--batch", batch)->capture_default_str();
    sub->add_option("--lr", lr, "auto or a fixed rate")->capture_default_str();
    sub->add_option("--threshold", threshold, "maxf1 or quantile:Q")->capture_default_str();
    sub->add_option("--calib-fraction", calib_fraction)->capture_default_str();
    sub->add_flag("--benign-only", benign_only, "fit on label-0 rows only");
    sub->add_option("--loss-out", loss_out, "per-epoch loss CSV");
    sub->add_option("--lrfind-out", lrfind_out, "lr finder curve CSV (with --lr auto)");
    sub->add_option("--seed", seed)->capture_default_str();
  }

  pipeline::ModelOptions options(const std::string &name) const {
    pipeline::ModelOptions m;
    m.train.epochs = epochs;
    m.train.batch_size = batch;
    m.lr = parse_lr(lr);
    m.lrfind.lr_min = 1e-6;
    m.threshold = ae::ThresholdStrategy::parse(threshold);
    m.calib_fraction = calib_fraction;
    m.benign_only = benign_only;
    m.train.on_epoch = epoch_logger(name, epochs);
    return m;
  }

  std::string canonical() const {
    return fmt::format("train={}\nepochs={}\nbatch={}\nlr={}\nthreshold={}\ncalib={}\nbenign={}\n",
                       train.string(), epochs, batch, lr, threshold, calib_fraction, benign_only);
  }
};

void write_lrfind(const fs::path &path, const nn::LrFinderResult &r, const ArtifactHeader &h) {
  auto out = open_out(path);
  out << h.comment_line() << '\n'
      << fmt::format("# suggested_lr={:.17g}\n", r.suggested_lr) << "lr,loss,smoothed_loss\n";
  for (const auto &p : r.curve) {
    out << fmt::format("{:.17g},{:.17g},{:.17g}\n", p.lr, p.loss, p.smoothed_loss);
  }
}

void report_fit(const std::string &name, const pipeline::FitReport &fit, double threshold,
                const TrainArgs &args, const ArtifactHeader &h) {
  if (fit.lrfind) {
    std::cerr << fmt::format("{}: lr finder suggests {:.3g}\n", name, fit.lr);
    if (!args.lrfind_out.empty()) write_lrfind(args.lrfind_out, *fit.lrfind, h);
  }
  std::cout << fmt::format("{}: lr {:.6g}, threshold {:.9g}\n", name, fit.lr, threshold);
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Insider-threat detection with autoencoders", "itd"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;
  app.add_option("--config", config_path, "flat key=value config; flags override it");

  // synth
  synth::SynthConfig synth_cfg;
  fs::path synth_out;
  auto *synth_cmd = app.add_subcommand("synth", "generate a synthetic CERT-style corpus");
  synth_cmd->add_option("--users", synth_cfg.users)->capture_default_str();
  synth_cmd->add_option("--insiders", synth_cfg.insiders)->capture_default_str();
  synth_cmd->add_option("--days", synth_cfg.days)->capture_default_str();
  synth_cmd->add_option("--seed", synth_cfg.seed)->capture_default_str();
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--insider-rate-scale", synth_cfg.insider_rate_scale)->capture_default_str();
  synth_cmd->add_option("--insider-workdays", synth_cfg.insider_workdays)->capture_default_str();
  synth_cmd->add_option("--benign-overtime", synth_cfg.benign_overtime)->capture_default_str();

  // ingest
  fs::path ingest_data, ingest_roster, ingest_out = "events.csv";
  IngestOptions ingest_opts;
  bool ingest_lenient = false;
  auto *ingest_cmd = app.add_subcommand("ingest", "parse CERT logs into labelled events");
  ingest_cmd->add_option("--data", ingest_data, "directory of CERT CSV files")->required();
  ingest_cmd->add_option("--roster", ingest_roster, "insider list (user column)");
  ingest_cmd->add_option("--sample", ingest_opts.sample, "rows per file, 0 = all")
      ->capture_default_str();
  ingest_cmd->add_option("--time-format", ingest_opts.time_format)->capture_default_str();
  ingest_cmd->add_flag("--lenient", ingest_lenient, "skip bad records instead of failing");
  ingest_cmd->add_option("--out", ingest_out)->capture_default_str();

  // featurize
  fs::path feat_events, feat_dir = ".";
  double feat_ratio = 0.75;
  std::uint64_t feat_seed = 1;
  FeatureOptions feat_opts;
  bool feat_no_pad = false, feat_csv = false;
  auto *feat_cmd = app.add_subcommand("featurize", "one-hot encode events and split train/test");
  feat_cmd->add_option("--events", feat_events)->required();
  feat_cmd->add_option("--out-dir", feat_dir)->capture_default_str();
  feat_cmd->add_option("--ratio", feat_ratio, "train fraction")->capture_default_str();
  feat_cmd->add_option("--seed", feat_seed)->capture_default_str();
  feat_cmd->add_option("--pad-to", feat_opts.pad_to)->capture_default_str();
  feat_cmd->add_flag("--no-pad", feat_no_pad, "use the natural 38 bits");
  feat_cmd->add_flag("--label-as-feature", feat_opts.label_as_feature);
  feat_cmd->add_flag("--csv", feat_csv, "also write train.csv and test.csv");

  // lrfind
  fs::path lr_train, lr_out;
  std::string lr_model = "ae";
  nn::LrFinderConfig lr_cfg;
  lr_cfg.lr_min = 1e-6;
  std::size_t lr_latent = 2;
  auto *lr_cmd = app.add_subcommand("lrfind", "learning-rate range test");
  lr_cmd->add_option("--train", lr_train)->required();
  lr_cmd->add_option("--model", lr_model, "ae or vae")
      ->check(CLI::IsMember({"ae", "vae"}))
      ->capture_default_str();
  lr_cmd->add_option("--lr-min", lr_cfg.lr_min)->capture_default_str();
  lr_cmd->add_option("--lr-max", lr_cfg.lr_max)->capture_default_str();
  lr_cmd->add_option("--steps", lr_cfg.steps)->capture_default_str();
  lr_cmd->add_option("--batch", lr_cfg.batch_size)->capture_default_str();
  lr_cmd->add_option("--latent", lr_latent)->capture_default_str();
  lr_cmd->add_option("--seed", lr_cfg.seed)->capture_default_str();
  lr_cmd->add_option("--out", lr_out, "curve CSV");

  // train-ae / train-vae
  TrainArgs ae_args, vae_args;
  ae_args.epochs = ae::default_train_config().epochs;
  ae_args.batch = ae::default_train_config().batch_size;
  vae_args.epochs = vae::default_train_config().epochs;
  vae_args.batch = vae::default_train_config().batch_size;
  std::size_t ae_bottleneck = 0;
  auto *ae_cmd = app.add_subcommand("train-ae", "train the autoencoder and calibrate a threshold");
  ae_args.add(ae_cmd);
  ae_cmd->add_option("--bottleneck", ae_bottleneck, "code width, 0 = input width")
      ->capture_default_str();
  std::size_t vae_latent = 2, vae_samples = 16;
  double vae_kl = 1.0;
  auto *vae_cmd = app.add_subcommand("train-vae", "train the VAE and calibrate a threshold");
  vae_args.add(vae_cmd);
  vae_cmd->add_option("--latent", vae_latent)->capture_default_str();
  vae_cmd->add_option("--kl-weight", vae_kl)->capture_default_str();
  vae_cmd->add_option("--samples", vae_samples, "latent draws per score, 0 = mean")
      ->capture_default_str();

  // score
  fs::path score_model, score_data, score_out;
  std::size_t score_samples = 16;
  std::uint64_t score_seed = 1;
  auto *score_cmd = app.add_subcommand("score", "anomaly scores for a vector file");
  score_cmd->add_option("--model", score_model)->required();
  score_cmd->add_option("--data", score_data)->required();
  score_cmd->add_option("--out", score_out)->required();
  score_cmd->add_option("--samples", score_samples, "VAE latent draws, 0 = mean")
      ->capture_default_str();
  score_cmd->add_option("--seed", score_seed)->capture_default_str();

  // generate
  fs::path gen_model, gen_out;
  std::size_t gen_n = 100;
  std::uint64_t gen_seed = 1;
  auto *gen_cmd = app.add_subcommand("generate", "sample events from a trained VAE");
  gen_cmd->add_option("--model", gen_model)->required();
  gen_cmd->add_option("-n", gen_n)->capture_default_str();
  gen_cmd->add_option("--out", gen_out)->required();
  gen_cmd->add_option("--seed", gen_seed)->capture_default_str();

  // eval
  std::vector<fs::path> eval_scores;
  std::string eval_threshold = "auto";
  fs::path eval_out, eval_json;
  auto *eval_cmd = app.add_subcommand("eval", "confusion metrics for score files");
  eval_cmd->add_option("--scores", eval_scores, "one or more score files")
      ->required()
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  eval_cmd->add_option("--threshold", eval_threshold, "T or auto (stored threshold)")
      ->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "text table");
  eval_cmd->add_option("--json", eval_json, "JSON report");

  // pipeline
  pipeline::RunConfig run;
  std::string run_ae_lr = "auto", run_vae_lr = "auto", run_threshold = "maxf1";
  bool run_lenient = false, run_no_pad = false;
  run.synth_cfg.seed = 0;
  auto *run_cmd = app.add_subcommand("pipeline", "synth/ingest through eval in one run");
  run_cmd->add_option("--data", run.data_dir, "CERT directory (unless --synth)");
  run_cmd->add_flag("--synth", run.synth, "generate the corpus into <out>/data");
  run_cmd->add_option("--users", run.synth_cfg.users)->capture_default_str();
  run_cmd->add_option("--insiders", run.synth_cfg.insiders)->capture_default_str();
  run_cmd->add_option("--days", run.synth_cfg.days)->capture_default_str();
  run_cmd->add_option("--synth-seed", run.synth_cfg.seed, "defaults to --seed");
  run_cmd->add_option("--insider-rate-scale", run.synth_cfg.insider_rate_scale)->capture_default_str();
  run_cmd->add_option("--insider-workdays", run.synth_cfg.insider_workdays)->capture_default_str();
  run_cmd->add_option("--benign-overtime", run.synth_cfg.benign_overtime)->capture_default_str();
  run_cmd->add_option("--out", run.out_dir)->capture_default_str();
  run_cmd->add_option("--roster", run.roster);
  run_cmd->add_option("--seed", run.seed)->capture_default_str();
  run_cmd->add_option("--sample", run.ingest.sample)->capture_default_str();
  run_cmd->add_option("--time-format", run.ingest.time_format)->capture_default_str();
  run_cmd->add_flag("--lenient", run_lenient);
  run_cmd->add_option("--ratio", run.split_ratio)->capture_default_str();
  run_cmd->add_option("--pad-to", run.features.pad_to)->capture_default_str();
  run_cmd->add_flag("--no-pad", run_no_pad);
  run_cmd->add_flag("--label-as-feature", run.features.label_as_feature);
  run_cmd->add_option("--ae-epochs", run.ae.train.epochs)->capture_default_str();
  run_cmd->add_option("--ae-batch", run.ae.train.batch_size)->capture_default_str();
  run_cmd->add_option("--ae-lr", run_ae_lr)->capture_default_str();
  run_cmd->add_option("--bottleneck", run.bottleneck)->capture_default_str();
  run_cmd->add_option("--vae-epochs", run.vae.train.epochs)->capture_default_str();
  run_cmd->add_option("--vae-batch", run.vae.train.batch_size)->capture_default_str();
  run_cmd->add_option("--vae-lr", run_vae_lr)->capture_default_str();
  run_cmd->add_option("--latent", run.latent)->capture_default_str();
  run_cmd->add_option("--kl-weight", run.kl_weight)->capture_default_str();
  run_cmd->add_option("--samples", run.vae_score_samples)->capture_default_str();
  run_cmd->add_option("--threshold", run_threshold, "maxf1 or quantile:Q")->capture_default_str();
  run_cmd->add_option("--calib-fraction", run.ae.calib_fraction)->capture_default_str();
  run_cmd->add_flag("--benign-only", run.ae.benign_only);

  // Splice config entries in ahead of the user's own flags so flags win.
  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size()) {
        path = args[i + 1];
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i) + 2);
      } else if (args[i].rfind("--config=", 0) == 0) {
        path = args[i].substr(9);
        args.erase(args.begin() + static_cast<std::ptrdiff_t>(i));
      } else {
        continue;
      }
      config_path = path;
      break;
    }
    if (!config_path.empty()) {
      const auto entries = read_config(config_path);
      auto pos = std::find_if(args.begin(), args.end(), [&](const std::string &a) {
        return app.get_subcommand_ptr(a) != nullptr;
      });
      if (pos != args.end()) {
        CLI::App *sub = app.get_subcommand(*pos);
        std::vector<std::string> injected;
        for (const auto &[key, value] : entries) {
          const std::string flag = (key.size() == 1 ? "-" : "--") + key;
          if (sub->get_option_no_throw(flag) != nullptr) injected.push_back(flag + "=" + value);
        }
        args.insert(pos + 1, injected.begin(), injected.end());
      }
    }
  } catch (const Error &e) {
    std::cerr << "itd: config: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CLI::Error &e) {
    std::cerr << "itd: config: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*synth_cmd) {
      pipeline::run_stage("synth", [&] {
        const auto header = header_for(synth_cfg.canonical(), synth_cfg.seed);
        const auto data = synth::gen_dataset(synth_cfg);
        synth::write_dataset(data, synth_out, header);
        std::cout << fmt::format("wrote {} events for {} users ({} insiders) to {}\n",
                                 data.events.size(), data.profiles.size(),
                                 data.truth.roster.size(), synth_out.string());
      });
    } else if (*ingest_cmd) {
      pipeline::run_stage("ingest", [&] {
        if (!fs::is_directory(ingest_data)) {
          throw ConfigError("input directory not found: " + ingest_data.string());
        }
        ingest_opts.strict = !ingest_lenient;
        if (ingest_roster.empty() && fs::exists(ingest_data / "ground_truth.csv")) {
          ingest_roster = ingest_data / "ground_truth.csv";
        }
        if (!ingest_roster.empty()) require_file(ingest_roster, "roster");
        const auto roster = ingest_roster.empty() ? std::set<std::string>{}
                                                  : pipeline::load_roster(ingest_roster);
        std::vector<std::string> warnings;
        const auto events = pipeline::ingest_and_label(ingest_data, roster, ingest_opts, &warnings);
        for (const auto &w : warnings) std::cerr << "warning: " << w << '\n';
        const auto canonical =
            fmt::format("data={}\nroster={}\nsample={}\ntime_format={}\nlenient={}\n",
                        ingest_data.string(), ingest_roster.string(), ingest_opts.sample,
                        ingest_opts.time_format, ingest_lenient);
        auto out = open_out(ingest_out);
        write_events_csv(out, events, header_for(canonical, 0));
        std::cout << fmt::format("wrote {} events to {}\n", events.size(), ingest_out.string());
      });
    } else if (*feat_cmd) {
      pipeline::run_stage("featurize", [&] {
        require_file(feat_events, "events file");
        if (feat_no_pad) feat_opts.pad_to = kNaturalDim;
        const auto events = read_events_csv(feat_events);
        auto split = train_test_split(one_hot_all(events, feat_opts), feat_ratio, feat_seed);
        const std::size_t dim = feat_opts.dimension();
        fs::create_directories(feat_dir);
        write_vectors_bin(feat_dir / "train.bin", split.train, dim);
        write_vectors_bin(feat_dir / "test.bin", split.test, dim);
        if (feat_csv) {
          const auto header = header_for(
              fmt::format("events={}\nratio={}\npad_to={}\nlabel={}\n", feat_events.string(),
                          feat_ratio, feat_opts.pad_to, feat_opts.label_as_feature),
              feat_seed);
          auto tr = open_out(feat_dir / "train.csv");
          write_vectors_csv(tr, split.train, header);
          auto te = open_out(feat_dir / "test.csv");
          write_vectors_csv(te, split.test, header);
        }
        std::cout << fmt::format("{} train / {} test vectors of width {} in {}\n",
                                 split.train.size(), split.test.size(), dim, feat_dir.string());
      });
    } else if (*lr_cmd) {
      pipeline::run_stage("lrfind", [&] {
        require_file(lr_train, "training file");
        const Samples train = to_samples(read_vectors_bin(lr_train));
        nn::LrFinderResult result;
        if (lr_model == "ae") {
          auto model = ae::build_ae(train.dim(), 0, mix_seed(lr_cfg.seed, 1));
          nn::NetworkObjective objective(model.net, train, train, model.loss);
          result = nn::lr_finder(objective, lr_cfg);
        } else {
          auto model = vae::build_vae(train.dim(), lr_latent, mix_seed(lr_cfg.seed, 3));
          vae::VaeObjective objective(model, train);
          result = nn::lr_finder(objective, lr_cfg);
        }
        if (!lr_out.empty()) {
          const auto canonical =
              fmt::format("train={}\nmodel={}\nlr={},{}\nsteps={}\nbatch={}\n", lr_train.string(),
                          lr_model, lr_cfg.lr_min, lr_cfg.lr_max, lr_cfg.steps, lr_cfg.batch_size);
          write_lrfind(lr_out, result, header_for(canonical, lr_cfg.seed));
        }
        std::cout << fmt::format("suggested lr {:.6g} ({} points{})\n", result.suggested_lr,
                                 result.curve.size(), result.diverged ? ", diverged" : "");
      });
    } else if (*ae_cmd) {
      pipeline::run_stage("train-ae", [&] {
        require_file(ae_args.train, "training file");
        const auto train = read_vectors_bin(ae_args.train);
        const auto header = header_for(
            ae_args.canonical() + fmt::format("bottleneck={}\n", ae_bottleneck), ae_args.seed);
        pipeline::FitReport fit;
        const auto model = pipeline::fit_ae(train, ae_args.options("ae"), ae_bottleneck,
                                            ae_args.seed, &fit);
        save_model(ae_args.out, model, header);
        if (!ae_args.loss_out.empty()) write_loss_history(ae_args.loss_out, model.loss_history, header);
        report_fit("ae", fit, *model.threshold, ae_args, header);
      });
    } else if (*vae_cmd) {
      pipeline::run_stage("train-vae", [&] {
        require_file(vae_args.train, "training file");
        const auto train = read_vectors_bin(vae_args.train);
        const auto header = header_for(
            vae_args.canonical() +
                fmt::format("latent={}\nkl={}\nsamples={}\n", vae_latent, vae_kl, vae_samples),
            vae_args.seed);
        pipeline::FitReport fit;
        const auto model = pipeline::fit_vae(train, vae_args.options("vae"), vae_latent, vae_kl,
                                             vae_samples, vae_args.seed, &fit);
        save_model(vae_args.out, model, header);
        if (!vae_args.loss_out.empty()) {
          write_loss_history(vae_args.loss_out, model.loss_history, header);
        }
        report_fit("vae", fit, *model.threshold, vae_args, header);
      });
    } else if (*score_cmd) {
      pipeline::run_stage("score", [&] {
        require_file(score_model, "model file");
        require_file(score_data, "data file");
        const auto file = load_model(score_model);
        const auto vectors = read_vectors_bin(score_data);
        const Samples data = to_samples(vectors);
        pipeline::ScoreFile out;
        out.model = model_display_name(file);
        std::vector<double> scores;
        if (const auto *m = std::get_if<ae::AeModel>(&file.model)) {
          scores = ae::score_all(*m, data);
          out.threshold = m->threshold;
        } else {
          const auto &v = std::get<vae::VaeModel>(file.model);
          scores = vae::score_all(v, data, score_samples, score_seed);
          out.threshold = v.threshold;
        }
        out.rows = pipeline::pair_scores(scores, labels_of(vectors));
        const auto canonical = fmt::format("model_hash={:016x}\ndata={}\nsamples={}\n",
                                           file.header.config_hash, score_data.string(),
                                           score_samples);
        pipeline::write_scores(score_out, out, header_for(canonical, score_seed));
        std::cout << fmt::format("scored {} rows into {}\n", out.rows.size(), score_out.string());
      });
    } else if (*gen_cmd) {
      pipeline::run_stage("generate", [&] {
        require_file(gen_model, "model file");
        const auto file = load_model(gen_model);
        const auto *m = std::get_if<vae::VaeModel>(&file.model);
        if (!m) throw ConfigError(gen_model.string() + " is not a VAE model");
        auto out = open_out(gen_out);
        const auto header = header_for(
            fmt::format("model_hash={:016x}\nn={}\n", file.header.config_hash, gen_n), gen_seed);
        out << header.comment_line() << "\nindex,day,time,activity\n";
        for (std::size_t i = 0; i < gen_n; ++i) {
          const auto probs = vae::generate(*m, std::nullopt, mix_seed(gen_seed, i));
          const auto e = nearest_one_hot(probs);
          out << fmt::format("{},{},{},{}\n", i, e.day, e.time, e.activity_code);
        }
        std::cout << fmt::format("wrote {} samples to {}\n", gen_n, gen_out.string());
      });
    } else if (*eval_cmd) {
      pipeline::run_stage("eval", [&] {
        std::vector<eval::EvalReport> reports;
        std::uint64_t combined = 0;
        for (const auto &path : eval_scores) {
          require_file(path, "scores file");
          const auto file = pipeline::read_scores(path);
          double threshold = 0.0;
          if (eval_threshold == "auto") {
            if (!file.threshold) {
              throw ConfigError(path.string() + " stores no threshold; pass --threshold T");
            }
            threshold = *file.threshold;
          } else {
            try {
              threshold = std::stod(eval_threshold);
            } catch (const std::exception &) {
              throw ConfigError("--threshold must be a number or 'auto'");
            }
          }
          std::vector<double> s;
          std::vector<std::uint8_t> l;
          for (const auto &r : file.rows) {
            s.push_back(r.score);
            l.push_back(r.label);
          }
          reports.push_back(pipeline::evaluate(file.model.empty() ? path.stem().string() : file.model,
                                               s, l, threshold));
          combined ^= fnv1a(fmt::format("{}|{:.17g}|{}", path.string(), threshold, s.size())) +
                      0x9e3779b97f4a7c15ULL + (combined << 6) + (combined >> 2);
        }
        const ArtifactHeader header{combined, 0};
        const std::string table = eval::render_report(reports);
        std::cout << table;
        if (!eval_out.empty()) open_out(eval_out) << header.comment_line() << '\n' << table;
        if (!eval_json.empty()) {
          open_out(eval_json) << (reports.size() == 1 ? eval::report_json(reports[0], header)
                                                      : eval::reports_json(reports, header));
        }
      });
    } else if (*run_cmd) {
      run.ae.lr = parse_lr(run_ae_lr);
      run.vae.lr = parse_lr(run_vae_lr);
      run.ae.threshold = ae::ThresholdStrategy::parse(run_threshold);
      run.vae.threshold = run.ae.threshold;
      run.vae.calib_fraction = run.ae.calib_fraction;
      run.vae.benign_only = run.ae.benign_only;
      run.ingest.strict = !run_lenient;
      if (run_no_pad) run.features.pad_to = kNaturalDim;
      if (run.synth) {
        run.synth_cfg.seed = run.synth_cfg.seed == 0 ? run.seed : run.synth_cfg.seed;
      } else if (run.data_dir.empty()) {
        throw ConfigError("pipeline needs --data DIR or --synth");
      }
      run.ae.train.on_epoch = epoch_logger("ae", run.ae.train.epochs);
      run.vae.train.on_epoch = epoch_logger("vae", run.vae.train.epochs);
      const auto result = pipeline::run_pipeline(run);
      for (const auto &line : result.log) std::cerr << line << '\n';
      std::cout << eval::render_report(result.reports);
    }
  } catch (const pipeline::StageError &e) {
    std::cerr << "itd: stage " << e.what() << '\n';
    return e.usage() ? kExitUsage : kExitRuntime;
  } catch (const ConfigError &e) {
    std::cerr << "itd: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception &e) {
    std::cerr << "itd: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
