#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pded/kernels.hpp"
#include "pded/taylor.hpp"

// Scalar reference kernels. One sample point at a time; per-layer state lives
// in stack-sized arrays indexed by neuron. The SIMD variants must match these
// results to tight tolerance (see the kernel equivalence tests).

namespace pded::kernels {
namespace {

void check_shapes(const MlpSurrogate& net, int n) {
  if (n < 0) throw std::invalid_argument("kernel: negative batch size");
  for (const int w : net.widths)
    if (w > kMaxWidth) throw std::invalid_argument("kernel: layer width exceeds kMaxWidth");
}

void forward_values_scalar(const MlpSurrogate& net, const double* x,
                           const double* t, int n, double* u) {
  check_shapes(net, n);
  const int n_layers = net.layer_count();
  std::array<double, kMaxWidth> h, z;
  for (int i = 0; i < n; ++i) {
    h[0] = x[i];
    h[1] = t[i];
    int in_w = 2;
    for (int l = 0; l < n_layers; ++l) {
      const int out_w = net.widths[l + 1];
      const double* W = net.weights(l);
      const double* b = net.biases(l);
      for (int o = 0; o < out_w; ++o) {
        double acc = b[o];
        const double* row = W + static_cast<std::size_t>(o) * in_w;
        for (int j = 0; j < in_w; ++j) acc += row[j] * h[j];
        z[o] = (l + 1 < n_layers) ? std::tanh(acc) : acc;
      }
      for (int o = 0; o < out_w; ++o) h[o] = z[o];
      in_w = out_w;
    }
    u[i] = h[0];
  }
}

void backward_values_scalar(const MlpSurrogate& net, const double* x,
                            const double* t, int n, const double* u_adj,
                            double* grad) {
  check_shapes(net, n);
  const int n_layers = net.layer_count();
  // acts[l] holds the inputs of layer l (post-activation of layer l-1).
  std::vector<std::array<double, kMaxWidth>> acts(n_layers + 1);
  std::array<double, kMaxWidth> adj, adj_next;
  for (int i = 0; i < n; ++i) {
    acts[0][0] = x[i];
    acts[0][1] = t[i];
    int in_w = 2;
    for (int l = 0; l < n_layers; ++l) {
      const int out_w = net.widths[l + 1];
      const double* W = net.weights(l);
      const double* b = net.biases(l);
      for (int o = 0; o < out_w; ++o) {
        double acc = b[o];
        const double* row = W + static_cast<std::size_t>(o) * in_w;
        for (int j = 0; j < in_w; ++j) acc += row[j] * acts[l][j];
        acts[l + 1][o] = (l + 1 < n_layers) ? std::tanh(acc) : acc;
      }
      in_w = out_w;
    }

    adj[0] = u_adj[i];
    for (int l = n_layers - 1; l >= 0; --l) {
      const int out_w = net.widths[l + 1];
      const int in_w_l = net.widths[l];
      double* Wg = grad + net.layer_offsets[l];
      double* bg = Wg + static_cast<std::size_t>(in_w_l) * out_w;
      const double* W = net.weights(l);
      for (int j = 0; j < in_w_l; ++j) adj_next[j] = 0.0;
      for (int o = 0; o < out_w; ++o) {
        double zb = adj[o];
        if (l + 1 < n_layers) {
          const double y = acts[l + 1][o];
          zb *= 1.0 - y * y;
        }
        bg[o] += zb;
        const double* row = W + static_cast<std::size_t>(o) * in_w_l;
        double* grow = Wg + static_cast<std::size_t>(o) * in_w_l;
        for (int j = 0; j < in_w_l; ++j) {
          grow[j] += zb * acts[l][j];
          adj_next[j] += zb * row[j];
        }
      }
      for (int j = 0; j < in_w_l; ++j) adj[j] = adj_next[j];
    }
  }
}

template <int K>
void forward_jets_impl(const MlpSurrogate& net, const double* x,
                       const double* t, int n, JetSoA& out) {
  const int n_layers = net.layer_count();
  std::array<Taylor<K>, kMaxWidth> h, z;
  std::array<double, K + 1> w;
  for (int i = 0; i < n; ++i) {
    h[0] = Taylor<K>::variable_x(x[i]);
    h[1] = Taylor<K>::variable_t(t[i]);
    int in_w = 2;
    for (int l = 0; l < n_layers; ++l) {
      const int out_w = net.widths[l + 1];
      const double* W = net.weights(l);
      const double* b = net.biases(l);
      for (int o = 0; o < out_w; ++o) {
        Taylor<K> acc = Taylor<K>::constant(b[o]);
        const double* row = W + static_cast<std::size_t>(o) * in_w;
        for (int j = 0; j < in_w; ++j) {
          const double wij = row[j];
          for (int k = 0; k <= K; ++k) acc.a[k] += wij * h[j].a[k];
          acc.at += wij * h[j].at;
        }
        if (l + 1 < n_layers) {
          tanh_series(acc, z[o], w);
        } else {
          z[o] = acc;
        }
      }
      for (int o = 0; o < out_w; ++o) h[o] = z[o];
      in_w = out_w;
    }
    for (int k = 0; k <= K; ++k) out.comp(k)[i] = h[0].a[k];
    out.tangent()[i] = h[0].at;
  }
}

// Backward over the jet computation: recompute the forward per point, saving
// per-layer inputs plus the tanh (y, w) series, then reverse with the shared
// Taylor pullbacks.
template <int K>
void backward_jets_impl(const MlpSurrogate& net, const double* x,
                        const double* t, int n, const JetSoA& adj,
                        double* grad) {
  const int n_layers = net.layer_count();
  std::vector<std::array<Taylor<K>, kMaxWidth>> acts(n_layers + 1);
  std::vector<std::array<Taylor<K>, kMaxWidth>> pre(n_layers);  // affine outputs
  std::vector<std::array<std::array<double, K + 1>, kMaxWidth>> wser(n_layers);
  std::array<Taylor<K>, kMaxWidth> ab, ab_next;

  for (int i = 0; i < n; ++i) {
    acts[0][0] = Taylor<K>::variable_x(x[i]);
    acts[0][1] = Taylor<K>::variable_t(t[i]);
    int in_w = 2;
    for (int l = 0; l < n_layers; ++l) {
      const int out_w = net.widths[l + 1];
      const double* W = net.weights(l);
      const double* b = net.biases(l);
      for (int o = 0; o < out_w; ++o) {
        Taylor<K> acc = Taylor<K>::constant(b[o]);
        const double* row = W + static_cast<std::size_t>(o) * in_w;
        for (int j = 0; j < in_w; ++j) {
          const double wij = row[j];
          for (int k = 0; k <= K; ++k) acc.a[k] += wij * acts[l][j].a[k];
          acc.at += wij * acts[l][j].at;
        }
        pre[l][o] = acc;
        if (l + 1 < n_layers) {
          tanh_series(acc, acts[l + 1][o], wser[l][o]);
        } else {
          acts[l + 1][o] = acc;
        }
      }
      in_w = out_w;
    }

    for (int k = 0; k <= K; ++k) ab[0].a[k] = adj.comp(k)[i];
    ab[0].at = adj.tangent()[i];

    for (int l = n_layers - 1; l >= 0; --l) {
      const int out_w = net.widths[l + 1];
      const int in_w_l = net.widths[l];
      double* Wg = grad + net.layer_offsets[l];
      double* bg = Wg + static_cast<std::size_t>(in_w_l) * out_w;
      const double* W = net.weights(l);
      for (int j = 0; j < in_w_l; ++j) ab_next[j] = Taylor<K>{};
      for (int o = 0; o < out_w; ++o) {
        Taylor<K> zb{};
        if (l + 1 < n_layers) {
          tanh_pullback(pre[l][o], acts[l + 1][o], wser[l][o], ab[o], zb);
        } else {
          zb = ab[o];
        }
        bg[o] += zb.a[0];
        const double* row = W + static_cast<std::size_t>(o) * in_w_l;
        double* grow = Wg + static_cast<std::size_t>(o) * in_w_l;
        for (int j = 0; j < in_w_l; ++j) {
          const Taylor<K>& hj = acts[l][j];
          double g = zb.at * hj.at;
          for (int k = 0; k <= K; ++k) g += zb.a[k] * hj.a[k];
          grow[j] += g;
          Taylor<K>& nb = ab_next[j];
          const double wij = row[j];
          for (int k = 0; k <= K; ++k) nb.a[k] += wij * zb.a[k];
          nb.at += wij * zb.at;
        }
      }
      for (int j = 0; j < in_w_l; ++j) ab[j] = ab_next[j];
    }
  }
}

void forward_jets_scalar(const MlpSurrogate& net, const double* x,
                         const double* t, int n, JetSoA& out) {
  check_shapes(net, n);
  switch (out.order) {
    case 1: forward_jets_impl<1>(net, x, t, n, out); break;
    case 2: forward_jets_impl<2>(net, x, t, n, out); break;
    case 3: forward_jets_impl<3>(net, x, t, n, out); break;
    case 4: forward_jets_impl<4>(net, x, t, n, out); break;
    case 5: forward_jets_impl<5>(net, x, t, n, out); break;
    default:
      throw std::invalid_argument("forward_jets: order must be in [1, 5]");
  }
}

void backward_jets_scalar(const MlpSurrogate& net, const double* x,
                          const double* t, int n, const JetSoA& adj,
                          double* grad) {
  check_shapes(net, n);
  switch (adj.order) {
    case 1: backward_jets_impl<1>(net, x, t, n, adj, grad); break;
    case 2: backward_jets_impl<2>(net, x, t, n, adj, grad); break;
    case 3: backward_jets_impl<3>(net, x, t, n, adj, grad); break;
    case 4: backward_jets_impl<4>(net, x, t, n, adj, grad); break;
    case 5: backward_jets_impl<5>(net, x, t, n, adj, grad); break;
    default:
      throw std::invalid_argument("backward_jets: order must be in [1, 5]");
  }
}

}  // namespace

const KernelTable& scalar_kernels() {
  static const KernelTable table{
      "scalar", forward_values_scalar, forward_jets_scalar,
      backward_values_scalar, backward_jets_scalar};
  return table;
}

}  // namespace pded::kernels
