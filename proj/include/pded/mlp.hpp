#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pded {

// Fully-connected tanh network mapping (x, t) -> u. Parameters live in one
// flat vector so the optimizer and the gradient kernels can treat them as a
// single array; layout per layer is W (out x in, row-major) followed by b.
struct MlpSurrogate {
  std::vector<int> widths;       // {2, H, ..., H, 1}
  std::vector<double> params;
  std::vector<std::size_t> layer_offsets;  // offset of layer l's W block

  MlpSurrogate() = default;
  MlpSurrogate(int hidden_layers, int hidden_width);

  int layer_count() const { return static_cast<int>(widths.size()) - 1; }
  std::size_t param_count() const { return params.size(); }
  double* weights(int layer) { return params.data() + layer_offsets[layer]; }
  const double* weights(int layer) const { return params.data() + layer_offsets[layer]; }
  double* biases(int layer) {
    return params.data() + layer_offsets[layer] +
           static_cast<std::size_t>(widths[layer]) * widths[layer + 1];
  }
  const double* biases(int layer) const {
    return const_cast<MlpSurrogate*>(this)->biases(layer);
  }

  // Xavier-uniform weights (biases zero), deterministic in the seed.
  void init_xavier(std::uint64_t seed);

  void validate() const;  // throws std::invalid_argument on malformed shapes
};

struct AdamState {
  std::vector<double> m, v;
  long step = 0;
  double lr = 2e-3;
  double beta1 = 0.99;
  double beta2 = 0.99;
  double eps = 1e-8;

  explicit AdamState(std::size_t n_params, double lr_ = 2e-3,
                     double beta1_ = 0.99, double beta2_ = 0.99)
      : m(n_params, 0.0), v(n_params, 0.0), lr(lr_), beta1(beta1_), beta2(beta2_) {}
};

// One bias-corrected Adam update, in place.
void adam_step(AdamState& state, std::vector<double>& params,
               const std::vector<double>& grad);

}  // namespace pded
