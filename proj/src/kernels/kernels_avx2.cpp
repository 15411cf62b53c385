#include <immintrin.h>

// std::vector<__m256d> trips -Wignored-attributes; C++17 over-aligned new
// keeps the storage 32-byte aligned, so the attribute is in fact honored.
#pragma GCC diagnostic ignored "-Wignored-attributes"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "pded/kernels.hpp"

// AVX2+FMA kernels: four sample points per vector lane, components kept in
// registers / L1-resident arrays. Mirrors the scalar reference op-for-op; the
// batch tail (n % 4) is delegated to the scalar kernels.

namespace pded::kernels {
namespace {

template <int K>
struct alignas(32) TV {
  __m256d a[K + 1];
  __m256d at;
};

template <int K>
inline void setzero(TV<K>& v) {
  for (int k = 0; k <= K; ++k) v.a[k] = _mm256_setzero_pd();
  v.at = _mm256_setzero_pd();
}

inline __m256d tanh4(__m256d v) {
  alignas(32) double tmp[4];
  _mm256_store_pd(tmp, v);
  tmp[0] = std::tanh(tmp[0]);
  tmp[1] = std::tanh(tmp[1]);
  tmp[2] = std::tanh(tmp[2]);
  tmp[3] = std::tanh(tmp[3]);
  return _mm256_load_pd(tmp);
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

template <int K>
inline void tanh_series_v(const TV<K>& x, TV<K>& y, __m256d (&w)[K + 1]) {
  const __m256d one = _mm256_set1_pd(1.0);
  y.a[0] = tanh4(x.a[0]);
  w[0] = _mm256_fnmadd_pd(y.a[0], y.a[0], one);
  for (int k = 0; k + 1 <= K; ++k) {
    __m256d acc = _mm256_setzero_pd();
    for (int j = 0; j <= k; ++j) {
      const __m256d term = _mm256_mul_pd(_mm256_set1_pd(double(k + 1 - j)), x.a[k + 1 - j]);
      acc = _mm256_fmadd_pd(w[j], term, acc);
    }
    y.a[k + 1] = _mm256_mul_pd(acc, _mm256_set1_pd(1.0 / (k + 1)));
    __m256d sq = _mm256_setzero_pd();
    for (int j = 0; j <= k + 1; ++j) sq = _mm256_fmadd_pd(y.a[j], y.a[k + 1 - j], sq);
    w[k + 1] = _mm256_sub_pd(_mm256_setzero_pd(), sq);
  }
  y.at = _mm256_mul_pd(w[0], x.at);
}

template <int K>
inline void tanh_pullback_v(const TV<K>& x, const TV<K>& y,
                            const __m256d (&w)[K + 1], const TV<K>& yb,
                            TV<K>& xb) {
  __m256d bb[K + 1];
  __m256d wb[K + 1];
  for (int k = 0; k <= K; ++k) {
    bb[k] = yb.a[k];
    wb[k] = _mm256_setzero_pd();
  }
  xb.at = _mm256_fmadd_pd(yb.at, w[0], xb.at);
  wb[0] = _mm256_fmadd_pd(yb.at, x.at, wb[0]);
  const __m256d neg2 = _mm256_set1_pd(-2.0);
  for (int k = K - 1; k >= 0; --k) {
    const __m256d wbk = _mm256_mul_pd(neg2, wb[k + 1]);
    for (int j = 0; j <= k + 1; ++j) bb[j] = _mm256_fmadd_pd(wbk, y.a[k + 1 - j], bb[j]);
    const __m256d c = _mm256_mul_pd(bb[k + 1], _mm256_set1_pd(1.0 / (k + 1)));
    for (int j = 0; j <= k; ++j) {
      const __m256d cf = _mm256_mul_pd(c, _mm256_set1_pd(double(k + 1 - j)));
      wb[j] = _mm256_fmadd_pd(cf, x.a[k + 1 - j], wb[j]);
      xb.a[k + 1 - j] = _mm256_fmadd_pd(cf, w[j], xb.a[k + 1 - j]);
    }
  }
  bb[0] = _mm256_fmadd_pd(_mm256_mul_pd(neg2, y.a[0]), wb[0], bb[0]);
  xb.a[0] = _mm256_fmadd_pd(bb[0], w[0], xb.a[0]);
}

void forward_values_avx2(const MlpSurrogate& net, const double* x,
                         const double* t, int n, double* u) {
  const int n_layers = net.layer_count();
  const int n4 = n - n % 4;
  std::vector<__m256d> h(kMaxWidth), z(kMaxWidth);
  for (int i = 0; i < n4; i += 4) {
    h[0] = _mm256_loadu_pd(x + i);
    h[1] = _mm256_loadu_pd(t + i);
    int in_w = 2;
    for (int l = 0; l < n_layers; ++l) {
      const int out_w = net.widths[l + 1];
      const double* W = net.weights(l);
      const double* b = net.biases(l);
      for (int o = 0; o < out_w; ++o) {
        __m256d acc = _mm256_set1_pd(b[o]);
        const double* row = W + static_cast<std::size_t>(o) * in_w;
        for (int j = 0; j < in_w; ++j)
          acc = _mm256_fmadd_pd(_mm256_set1_pd(row[j]), h[j], acc);
        z[o] = (l + 1 < n_layers) ? tanh4(acc) : acc;
      }
      for (int o = 0; o < out_w; ++o) h[o] = z[o];
      in_w = out_w;
    }
    _mm256_storeu_pd(u + i, h[0]);
  }
  if (n4 < n)
    scalar_kernels().forward_values(net, x + n4, t + n4, n - n4, u + n4);
}

void backward_values_avx2(const MlpSurrogate& net, const double* x,
                          const double* t, int n, const double* u_adj,
                          double* grad) {
  const int n_layers = net.layer_count();
  const int n4 = n - n % 4;
  std::vector<std::vector<__m256d>> acts(n_layers + 1,
                                          std::vector<__m256d>(kMaxWidth));
  std::vector<__m256d> adj(kMaxWidth), adj_next(kMaxWidth);
  for (int i = 0; i < n4; i += 4) {
    acts[0][0] = _mm256_loadu_pd(x + i);
    acts[0][1] = _mm256_loadu_pd(t + i);
    int in_w = 2;
    for (int l = 0; l < n_layers; ++l) {
      const int out_w = net.widths[l + 1];
      const double* W = net.weights(l);
      const double* b = net.biases(l);
      for (int o = 0; o < out_w; ++o) {
        __m256d acc = _mm256_set1_pd(b[o]);
        const double* row = W + static_cast<std::size_t>(o) * in_w;
        for (int j = 0; j < in_w; ++j)
          acc = _mm256_fmadd_pd(_mm256_set1_pd(row[j]), acts[l][j], acc);
        acts[l + 1][o] = (l + 1 < n_layers) ? tanh4(acc) : acc;
      }
      in_w = out_w;
    }

    adj[0] = _mm256_loadu_pd(u_adj + i);
    const __m256d one = _mm256_set1_pd(1.0);
    for (int l = n_layers - 1; l >= 0; --l) {
      const int out_w = net.widths[l + 1];
      const int in_w_l = net.widths[l];
      double* Wg = grad + net.layer_offsets[l];
      double* bg = Wg + static_cast<std::size_t>(in_w_l) * out_w;
      const double* W = net.weights(l);
      for (int j = 0; j < in_w_l; ++j) adj_next[j] = _mm256_setzero_pd();
      for (int o = 0; o < out_w; ++o) {
        __m256d zb = adj[o];
        if (l + 1 < n_layers) {
          const __m256d y = acts[l + 1][o];
          zb = _mm256_mul_pd(zb, _mm256_fnmadd_pd(y, y, one));
        }
        bg[o] += hsum(zb);
        const double* row = W + static_cast<std::size_t>(o) * in_w_l;
        double* grow = Wg + static_cast<std::size_t>(o) * in_w_l;
        for (int j = 0; j < in_w_l; ++j) {
          grow[j] += hsum(_mm256_mul_pd(zb, acts[l][j]));
          adj_next[j] = _mm256_fmadd_pd(_mm256_set1_pd(row[j]), zb, adj_next[j]);
        }
      }
      for (int j = 0; j < in_w_l; ++j) adj[j] = adj_next[j];
    }
  }
  if (n4 < n)
    scalar_kernels().backward_values(net, x + n4, t + n4, n - n4, u_adj + n4, grad);
}

template <int K>
void forward_jets_impl(const MlpSurrogate& net, const double* x,
                       const double* t, int n, JetSoA& out) {
  const int n_layers = net.layer_count();
  const int n4 = n - n % 4;
  std::vector<TV<K>> h(kMaxWidth), z(kMaxWidth);
  __m256d w[K + 1];
  for (int i = 0; i < n4; i += 4) {
    setzero(h[0]);
    h[0].a[0] = _mm256_loadu_pd(x + i);
    h[0].a[1] = _mm256_set1_pd(1.0);
    setzero(h[1]);
    h[1].a[0] = _mm256_loadu_pd(t + i);
    h[1].at = _mm256_set1_pd(1.0);
    int in_w = 2;
    for (int l = 0; l < n_layers; ++l) {
      const int out_w = net.widths[l + 1];
      const double* W = net.weights(l);
      const double* b = net.biases(l);
      for (int o = 0; o < out_w; ++o) {
        TV<K> acc;
        setzero(acc);
        acc.a[0] = _mm256_set1_pd(b[o]);
        const double* row = W + static_cast<std::size_t>(o) * in_w;
        for (int j = 0; j < in_w; ++j) {
          const __m256d wij = _mm256_set1_pd(row[j]);
          for (int k = 0; k <= K; ++k)
            acc.a[k] = _mm256_fmadd_pd(wij, h[j].a[k], acc.a[k]);
          acc.at = _mm256_fmadd_pd(wij, h[j].at, acc.at);
        }
        if (l + 1 < n_layers) {
          tanh_series_v(acc, z[o], w);
        } else {
          z[o] = acc;
        }
      }
      for (int o = 0; o < out_w; ++o) h[o] = z[o];
      in_w = out_w;
    }
    for (int k = 0; k <= K; ++k) _mm256_storeu_pd(out.comp(k) + i, h[0].a[k]);
    _mm256_storeu_pd(out.tangent() + i, h[0].at);
  }
  if (n4 < n) {
    const int m = n - n4;
    JetSoA tail;
    tail.resize(m, K);
    scalar_kernels().forward_jets(net, x + n4, t + n4, m, tail);
    for (int c = 0; c <= K + 1; ++c)
      for (int q = 0; q < m; ++q) out.comp(c)[n4 + q] = tail.comp(c)[q];
  }
}

template <int K>
void backward_jets_impl(const MlpSurrogate& net, const double* x,
                        const double* t, int n, const JetSoA& adj,
                        double* grad) {
  const int n_layers = net.layer_count();
  const int n4 = n - n % 4;
  std::vector<std::vector<TV<K>>> acts(n_layers + 1, std::vector<TV<K>>(kMaxWidth));
  std::vector<std::vector<TV<K>>> pre(n_layers, std::vector<TV<K>>(kMaxWidth));
  struct WSer {
    __m256d w[K + 1];
  };
  std::vector<std::vector<WSer>> wser(n_layers, std::vector<WSer>(kMaxWidth));
  std::vector<TV<K>> ab(kMaxWidth), ab_next(kMaxWidth);

  for (int i = 0; i < n4; i += 4) {
    setzero(acts[0][0]);
    acts[0][0].a[0] = _mm256_loadu_pd(x + i);
    acts[0][0].a[1] = _mm256_set1_pd(1.0);
    setzero(acts[0][1]);
    acts[0][1].a[0] = _mm256_loadu_pd(t + i);
    acts[0][1].at = _mm256_set1_pd(1.0);
    int in_w = 2;
    for (int l = 0; l < n_layers; ++l) {
      const int out_w = net.widths[l + 1];
      const double* W = net.weights(l);
      const double* b = net.biases(l);
      for (int o = 0; o < out_w; ++o) {
        TV<K> acc;
        setzero(acc);
        acc.a[0] = _mm256_set1_pd(b[o]);
        const double* row = W + static_cast<std::size_t>(o) * in_w;
        for (int j = 0; j < in_w; ++j) {
          const __m256d wij = _mm256_set1_pd(row[j]);
          for (int k = 0; k <= K; ++k)
            acc.a[k] = _mm256_fmadd_pd(wij, acts[l][j].a[k], acc.a[k]);
          acc.at = _mm256_fmadd_pd(wij, acts[l][j].at, acc.at);
        }
        pre[l][o] = acc;
        if (l + 1 < n_layers) {
          tanh_series_v(acc, acts[l + 1][o], wser[l][o].w);
        } else {
          acts[l + 1][o] = acc;
        }
      }
      in_w = out_w;
    }

    for (int k = 0; k <= K; ++k) ab[0].a[k] = _mm256_loadu_pd(adj.comp(k) + i);
    ab[0].at = _mm256_loadu_pd(adj.tangent() + i);

    for (int l = n_layers - 1; l >= 0; --l) {
      const int out_w = net.widths[l + 1];
      const int in_w_l = net.widths[l];
      double* Wg = grad + net.layer_offsets[l];
      double* bg = Wg + static_cast<std::size_t>(in_w_l) * out_w;
      const double* W = net.weights(l);
      for (int j = 0; j < in_w_l; ++j) setzero(ab_next[j]);
      for (int o = 0; o < out_w; ++o) {
        TV<K> zb;
        setzero(zb);
        if (l + 1 < n_layers) {
          tanh_pullback_v(pre[l][o], acts[l + 1][o], wser[l][o].w, ab[o], zb);
        } else {
          zb = ab[o];
        }
        bg[o] += hsum(zb.a[0]);
        const double* row = W + static_cast<std::size_t>(o) * in_w_l;
        double* grow = Wg + static_cast<std::size_t>(o) * in_w_l;
        for (int j = 0; j < in_w_l; ++j) {
          const TV<K>& hj = acts[l][j];
          __m256d g = _mm256_mul_pd(zb.at, hj.at);
          for (int k = 0; k <= K; ++k) g = _mm256_fmadd_pd(zb.a[k], hj.a[k], g);
          grow[j] += hsum(g);
          TV<K>& nb = ab_next[j];
          const __m256d wij = _mm256_set1_pd(row[j]);
          for (int k = 0; k <= K; ++k)
            nb.a[k] = _mm256_fmadd_pd(wij, zb.a[k], nb.a[k]);
          nb.at = _mm256_fmadd_pd(wij, zb.at, nb.at);
        }
      }
      for (int j = 0; j < in_w_l; ++j) ab[j] = ab_next[j];
    }
  }
  if (n4 < n) {
    const int m = n - n4;
    JetSoA tail;
    tail.resize(m, K);
    for (int c = 0; c <= K + 1; ++c)
      for (int q = 0; q < m; ++q) tail.comp(c)[q] = adj.comp(c)[n4 + q];
    scalar_kernels().backward_jets(net, x + n4, t + n4, m, tail, grad);
  }
}

void forward_jets_avx2(const MlpSurrogate& net, const double* x,
                       const double* t, int n, JetSoA& out) {
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

void backward_jets_avx2(const MlpSurrogate& net, const double* x,
                        const double* t, int n, const JetSoA& adj,
                        double* grad) {
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

const KernelTable* avx2_table_impl() {
  static const KernelTable table{"avx2", forward_values_avx2, forward_jets_avx2,
                                 backward_values_avx2, backward_jets_avx2};
  return &table;
}

}  // namespace pded::kernels
