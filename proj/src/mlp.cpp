#include "pded/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "pded/rng.hpp"

namespace pded {

MlpSurrogate::MlpSurrogate(int hidden_layers, int hidden_width) {
  if (hidden_layers < 1 || hidden_width < 1)
    throw std::invalid_argument("MlpSurrogate: need at least one hidden layer/neuron");
  widths.push_back(2);
  for (int l = 0; l < hidden_layers; ++l) widths.push_back(hidden_width);
  widths.push_back(1);

  std::size_t total = 0;
  for (int l = 0; l + 1 < static_cast<int>(widths.size()); ++l) {
    layer_offsets.push_back(total);
    total += static_cast<std::size_t>(widths[l]) * widths[l + 1] + widths[l + 1];
  }
  params.assign(total, 0.0);
}

void MlpSurrogate::init_xavier(std::uint64_t seed) {
  Rng rng(seed);
  for (int l = 0; l < layer_count(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    double* w = weights(l);
    for (int i = 0; i < fan_in * fan_out; ++i) w[i] = rng.uniform(-limit, limit);
    double* b = biases(l);
    for (int i = 0; i < fan_out; ++i) b[i] = 0.0;
  }
}

void MlpSurrogate::validate() const {
  if (widths.size() < 3 || widths.front() != 2 || widths.back() != 1)
    throw std::invalid_argument("MlpSurrogate: widths must be {2, H..., 1}");
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    if (widths[l] <= 0) throw std::invalid_argument("MlpSurrogate: non-positive width");
    total += static_cast<std::size_t>(widths[l]) * widths[l + 1] + widths[l + 1];
  }
  if (total != params.size())
    throw std::invalid_argument("MlpSurrogate: parameter vector inconsistent with widths");
  for (const double p : params)
    if (!std::isfinite(p)) throw std::invalid_argument("MlpSurrogate: non-finite parameter");
}

void adam_step(AdamState& state, std::vector<double>& params,
               const std::vector<double>& grad) {
  if (params.size() != grad.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step: shape mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

}  // namespace pded
