#include "itd/nadam.hpp"

#include <cmath>

#include <fmt/format.h>

#include "itd/common.hpp"

namespace itd::nn {

NadamState::NadamState(std::size_t params, NadamParams hp)
    : hp_(hp), m_(params, 0.0), v_(params, 0.0) {}

void NadamState::apply(std::span<double> params, std::span<const double> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ConfigError(fmt::format("nadam: expected {} parameters, got {} params / {} grads",
                                  m_.size(), params.size(), grads.size()));
  }
  const std::uint64_t t = t_ + 1;
  const double b1 = hp_.beta1;
  const double b2 = hp_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));

  std::vector<double> next(params.size());
  std::vector<double> m(params.size());
  std::vector<double> v(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    m[i] = b1 * m_[i] + (1.0 - b1) * g;
    v[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    const double numerator = b1 * m_hat + (1.0 - b1) * g / c1;
    next[i] = params[i] - hp_.lr * numerator / (std::sqrt(v_hat) + hp_.eps);
    if (!std::isfinite(next[i])) {
      throw NumericError(fmt::format("nadam: non-finite update for parameter {} at step {}", i, t));
    }
  }
  std::copy(next.begin(), next.end(), params.begin());
  m_.swap(m);
  v_.swap(v);
  t_ = t;
}

void nadam_step(std::span<double> params, std::span<const double> grads, NadamState &state) {
  state.apply(params, grads);
}

} // namespace itd::nn
