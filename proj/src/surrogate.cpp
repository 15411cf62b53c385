#include "pded/surrogate.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace pded {

namespace {
void require_finite(double x, double t) {
  if (!std::isfinite(x) || !std::isfinite(t))
    throw std::invalid_argument("surrogate: non-finite input (x=" +
                                std::to_string(x) + ", t=" + std::to_string(t) + ")");
}
void require_order(int order) {
  if (order < 1 || order > kernels::kMaxOrder)
    throw std::invalid_argument("surrogate: derivative order " +
                                std::to_string(order) + " outside [1, " +
                                std::to_string(kernels::kMaxOrder) + "]");
}
}  // namespace

double forward(const MlpSurrogate& net, double x, double t) {
  require_finite(x, t);
  double u = 0.0;
  kernels::active_kernels().forward_values(net, &x, &t, 1, &u);
  return u;
}

void forward_batch(const MlpSurrogate& net, const std::vector<double>& x,
                   const std::vector<double>& t, std::vector<double>& u) {
  if (x.size() != t.size()) throw std::invalid_argument("forward_batch: x/t size mismatch");
  u.resize(x.size());
  kernels::active_kernels().forward_values(net, x.data(), t.data(),
                                           static_cast<int>(x.size()), u.data());
}

Jet forward_jet(const MlpSurrogate& net, double x, double t, int order) {
  require_finite(x, t);
  require_order(order);
  kernels::JetSoA soa;
  soa.resize(1, order);
  kernels::active_kernels().forward_jets(net, &x, &t, 1, soa);
  return jet_from_soa(soa, 0);
}

void forward_jet_batch(const MlpSurrogate& net, const std::vector<double>& x,
                       const std::vector<double>& t, int order,
                       kernels::JetSoA& out) {
  if (x.size() != t.size())
    throw std::invalid_argument("forward_jet_batch: x/t size mismatch");
  require_order(order);
  out.resize(static_cast<int>(x.size()), order);
  kernels::active_kernels().forward_jets(net, x.data(), t.data(),
                                         static_cast<int>(x.size()), out);
}

Jet jet_from_soa(const kernels::JetSoA& soa, int i) {
  Jet jet;
  jet.order = soa.order;
  jet.u = soa.comp(0)[i];
  double fact = 1.0;
  for (int k = 1; k <= soa.order; ++k) {
    fact *= k;
    jet.dx[k - 1] = soa.comp(k)[i] * fact;
  }
  jet.ut = soa.tangent()[i];
  return jet;
}

void backprop_jets(const MlpSurrogate& net, const std::vector<double>& x,
                   const std::vector<double>& t, const kernels::JetSoA& adj,
                   std::vector<double>& grad) {
  if (x.size() != t.size() || static_cast<int>(x.size()) != adj.n)
    throw std::invalid_argument("backprop_jets: adjoint/batch shape mismatch");
  if (grad.empty()) grad.assign(net.param_count(), 0.0);
  if (grad.size() != net.param_count())
    throw std::invalid_argument("backprop_jets: gradient size mismatch");
  kernels::active_kernels().backward_jets(net, x.data(), t.data(),
                                          static_cast<int>(x.size()), adj,
                                          grad.data());
}

void backprop_values(const MlpSurrogate& net, const std::vector<double>& x,
                     const std::vector<double>& t,
                     const std::vector<double>& u_adj, std::vector<double>& grad) {
  if (x.size() != t.size() || x.size() != u_adj.size())
    throw std::invalid_argument("backprop_values: adjoint/batch shape mismatch");
  if (grad.empty()) grad.assign(net.param_count(), 0.0);
  if (grad.size() != net.param_count())
    throw std::invalid_argument("backprop_values: gradient size mismatch");
  kernels::active_kernels().backward_values(net, x.data(), t.data(),
                                            static_cast<int>(x.size()),
                                            u_adj.data(), grad.data());
}

}  // namespace pded
