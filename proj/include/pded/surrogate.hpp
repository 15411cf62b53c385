#pragma once

#include <array>
#include <vector>

#include "pded/kernels.hpp"
#include "pded/mlp.hpp"

namespace pded {

// Network output with its derivatives at one sample point: value, spatial
// derivatives d[k-1] = d^k u/dx^k for k = 1..order, and the time derivative.
// All entries are exact (forward Taylor propagation), not finite differences.
struct Jet {
  double u = 0.0;
  std::array<double, kernels::kMaxOrder> dx{};
  double ut = 0.0;
  int order = 0;

  double deriv(int k) const { return k == 0 ? u : dx[k - 1]; }
};

double forward(const MlpSurrogate& net, double x, double t);

void forward_batch(const MlpSurrogate& net, const std::vector<double>& x,
                   const std::vector<double>& t, std::vector<double>& u);

Jet forward_jet(const MlpSurrogate& net, double x, double t, int order);

// Batch jets in SoA form; rows are Taylor coefficients (see JetSoA), so the
// k-th derivative of point i is comp(k)[i] * k!.
void forward_jet_batch(const MlpSurrogate& net, const std::vector<double>& x,
                       const std::vector<double>& t, int order,
                       kernels::JetSoA& out);

Jet jet_from_soa(const kernels::JetSoA& soa, int i);

// Parameter gradient of a scalar loss expressed through per-point jet
// adjoints: adj.comp(k)[i] = dLoss/d(a_k of point i) with a_k the Taylor
// coefficient (not the derivative), adj.tangent()[i] = dLoss/d(u_t of i).
// Accumulates into grad (resized and zeroed if empty).
void backprop_jets(const MlpSurrogate& net, const std::vector<double>& x,
                   const std::vector<double>& t, const kernels::JetSoA& adj,
                   std::vector<double>& grad);

// Same for a values-only loss (no derivatives involved).
void backprop_values(const MlpSurrogate& net, const std::vector<double>& x,
                     const std::vector<double>& t,
                     const std::vector<double>& u_adj, std::vector<double>& grad);

}  // namespace pded
