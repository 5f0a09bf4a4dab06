#include "itd/eval.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include "json.hpp"

namespace itd::eval {

Confusion confusion(std::span<const std::uint8_t> preds, std::span<const std::uint8_t> labels) {
  if (preds.empty()) throw ConfigError("confusion: no predictions");
  if (preds.size() != labels.size()) {
    throw ConfigError(fmt::format("confusion: {} predictions for {} labels", preds.size(),
                                  labels.size()));
  }
  Confusion c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] != 0;
    const bool l = labels[i] != 0;
    if (p && l) ++c.tp;
    else if (p) ++c.fp;
    else if (l) ++c.fn;
    else ++c.tn;
  }
  return c;
}

namespace {

Metric ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

} // namespace

Metric accuracy(const Confusion &c) { return ratio(c.tp + c.tn, c.total()); }
Metric precision(const Confusion &c) { return ratio(c.tp, c.tp + c.fp); }
Metric recall(const Confusion &c) { return ratio(c.tp, c.tp + c.fn); }

Metric f1(double p, double r) {
  if (!(p + r > 0.0)) return std::nullopt;
  return 2.0 * p * r / (p + r);
}

Metric f1(const Metric &p, const Metric &r) {
  if (!p || !r) return std::nullopt;
  return f1(*p, *r);
}

EvalReport make_report(std::string model, const Confusion &c) {
  EvalReport r;
  r.model = std::move(model);
  r.confusion = c;
  r.accuracy = accuracy(c);
  r.precision = precision(c);
  r.recall = recall(c);
  r.f1 = f1(r.precision, r.recall);
  return r;
}

std::string percent(const Metric &m) {
  if (!m) return "n/a";
  return fmt::format("{}%", static_cast<long long>(std::floor(*m * 100.0 + 0.5)));
}

std::string render_report(std::span<const EvalReport> reports) {
  std::size_t width = 5;
  for (const auto &r : reports) width = std::max(width, r.model.size());
  std::string out = fmt::format("{:<{}} Precision Recall Accuracy F1-Score\n", "Model", width);
  for (const auto &r : reports) {
    out += fmt::format("{:<{}} {} {} {} {}\n", r.model, width, percent(r.precision),
                       percent(r.recall), percent(r.accuracy), percent(r.f1));
  }
  return out;
}

namespace {

nlohmann::ordered_json to_json(const EvalReport &r) {
  auto metric = [](const Metric &m) -> nlohmann::ordered_json {
    if (!m) return nullptr;
    return *m;
  };
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["tp"] = r.confusion.tp;
  j["fp"] = r.confusion.fp;
  j["tn"] = r.confusion.tn;
  j["fn"] = r.confusion.fn;
  j["accuracy"] = metric(r.accuracy);
  j["precision"] = metric(r.precision);
  j["recall"] = metric(r.recall);
  j["f1"] = metric(r.f1);
  return j;
}

void add_provenance(nlohmann::ordered_json &j, const ArtifactHeader &header) {
  j["tool_version"] = std::string(kToolVersion);
  j["config_hash"] = fmt::format("{:016x}", header.config_hash);
  j["seed"] = header.seed;
}

} // namespace

std::string report_json(const EvalReport &report, const ArtifactHeader &header) {
  auto j = to_json(report);
  add_provenance(j, header);
  return j.dump(2) + "\n";
}

std::string reports_json(std::span<const EvalReport> reports, const ArtifactHeader &header) {
  nlohmann::ordered_json j;
  add_provenance(j, header);
  j["reports"] = nlohmann::ordered_json::array();
  for (const auto &r : reports) j["reports"].push_back(to_json(r));
  return j.dump(2) + "\n";
}

} // namespace itd::eval
