#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace itd::nn {

struct NadamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam moments plus the Nesterov look-ahead on the first moment.
class NadamState {
public:
  explicit NadamState(std::size_t params, NadamParams hp = {});

  const NadamParams &params() const noexcept { return hp_; }
  void set_lr(double lr) noexcept { hp_.lr = lr; }
  std::uint64_t step() const noexcept { return t_; }
  const std::vector<double> &m() const noexcept { return m_; }
  const std::vector<double> &v() const noexcept { return v_; }

  /// One update in place:
  ///   m = b1 m + (1-b1) g,  v = b2 v + (1-b2) g^2,  t += 1
  ///   m_hat = m / (1-b1^t),  v_hat = v / (1-b2^t)
  ///   theta -= lr * (b1 m_hat + (1-b1) g / (1-b1^t)) / (sqrt(v_hat) + eps)
  /// Throws NumericError (leaving params and state untouched) if any updated
  /// parameter would be non-finite.
  void apply(std::span<double> params, std::span<const double> grads);

private:
  NadamParams hp_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::uint64_t t_ = 0;
};

void nadam_step(std::span<double> params, std::span<const double> grads, NadamState &state);

} // namespace itd::nn
