#include <cmath>

#include <fmt/format.h>

#include "itd/nn.hpp"

namespace itd::nn::reference {

BatchResult backprop(const Network &net, const Samples &inputs, const Samples &targets, Loss loss) {
  if (inputs.empty() || inputs.size() != targets.size()) {
    throw ConfigError("reference::backprop: bad batch");
  }
  const double scale = 1.0 / static_cast<double>(inputs.size());
  BatchResult result;
  result.grad.assign(net.param_count(), 0.0);
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Trace trace = forward(net, inputs.row(i));
    const double value = example_loss(loss, trace.output(), targets.row(i));
    if (!std::isfinite(value)) {
      throw NumericError(fmt::format("non-finite loss at batch example {}", i));
    }
    result.loss += value * scale;
    std::vector<double> delta(net.output_dim());
    output_delta(loss, net.layers.back(), trace.pre.back(), trace.output(), targets.row(i), scale,
                 delta);
    backward(net, trace, std::move(delta), result.grad);
  }
  return result;
}

} // namespace itd::nn::reference
