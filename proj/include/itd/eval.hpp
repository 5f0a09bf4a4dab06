#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "itd/common.hpp"

namespace itd::eval {

/// Positive = malicious.
struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const Confusion &, const Confusion &) = default;
};

/// Throws ConfigError for empty or unequal-length inputs.
Confusion confusion(std::span<const std::uint8_t> preds, std::span<const std::uint8_t> labels);

/// A metric whose denominator is zero is undefined (nullopt, printed "n/a").
using Metric = std::optional<double>;

Metric accuracy(const Confusion &c);  ///< (TP + TN) / total
Metric precision(const Confusion &c); ///< TP / (TP + FP)
Metric recall(const Confusion &c);    ///< TP / (TP + FN)
/// Harmonic mean 2PR / (P + R); undefined when P + R = 0.
Metric f1(double p, double r);
Metric f1(const Metric &p, const Metric &r);

struct EvalReport {
  std::string model;
  Confusion confusion;
  Metric accuracy;
  Metric precision;
  Metric recall;
  Metric f1;
};

EvalReport make_report(std::string model, const Confusion &c);

/// "92%" style, rounded half-up; "n/a" when undefined.
std::string percent(const Metric &m);

/// Header row then one row per report: `<model> <P> <R> <A> <F1>`.
std::string render_report(std::span<const EvalReport> reports);

/// {model, tp, fp, tn, fn, accuracy, precision, recall, f1} with null for
/// undefined metrics, plus tool_version / config_hash / seed provenance.
std::string report_json(const EvalReport &report, const ArtifactHeader &header);
std::string reports_json(std::span<const EvalReport> reports, const ArtifactHeader &header);

} // namespace itd::eval
