#pragma once

#include <string>
#include <vector>

#include "pded/mlp.hpp"

namespace pded::kernels {

inline constexpr int kMaxOrder = 5;
inline constexpr int kMaxWidth = 256;

// Batch of jets in structure-of-arrays layout, component-major:
// rows 0..K hold the Taylor coefficients a_k of u in x (a_0 is the value),
// row K+1 holds the time tangent u_t. Derivatives are k! * a_k.
struct JetSoA {
  int n = 0;
  int order = 0;
  std::vector<double> buf;

  void resize(int n_, int order_) {
    n = n_;
    order = order_;
    buf.assign(static_cast<std::size_t>(order + 2) * n, 0.0);
  }
  double* comp(int c) { return buf.data() + static_cast<std::size_t>(c) * n; }
  const double* comp(int c) const { return buf.data() + static_cast<std::size_t>(c) * n; }
  double* tangent() { return comp(order + 1); }
  const double* tangent() const { return comp(order + 1); }
};

// Batch kernels over the sample dimension. Backward passes recompute the
// forward state per point (scratch stays L1-sized) and accumulate the
// parameter gradient; grad must be zero-initialized by the caller if a fresh
// gradient is wanted.
struct KernelTable {
  const char* name;
  void (*forward_values)(const MlpSurrogate&, const double* x, const double* t,
                         int n, double* u);
  void (*forward_jets)(const MlpSurrogate&, const double* x, const double* t,
                       int n, JetSoA& out);
  void (*backward_values)(const MlpSurrogate&, const double* x, const double* t,
                          int n, const double* u_adj, double* grad);
  void (*backward_jets)(const MlpSurrogate&, const double* x, const double* t,
                        int n, const JetSoA& adj, double* grad);
};

// Reference implementation; always available.
const KernelTable& scalar_kernels();

// AVX2+FMA implementation, or nullptr when the build or the CPU lacks it.
const KernelTable* avx2_kernels();

// Runtime selection: AVX2 when supported, else scalar. The PDED_KERNEL
// environment variable ("scalar" | "avx2") overrides.
const KernelTable& active_kernels();

}  // namespace pded::kernels
