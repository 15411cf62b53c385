#pragma once

#include <array>
#include <cassert>
#include <cmath>
#include <stdexcept>

namespace pded {

// Truncated univariate Taylor scalar used to push exact spatial derivatives
// through arbitrary arithmetic, plus a first-order tangent in time.
//
//   a[k] = (1/k!) d^k f / dx^k   (Taylor coefficients around the base point)
//   at   = df/dt                 (first-order tangent, independent direction)
//
// Composition with an analytic g needs only the x-series of the argument and
// the chain rule g'(a[0]) * at for the time tangent, so the pair is closed
// under every operation below. Cross derivatives in x and t are not tracked;
// nothing downstream consumes them.
template <int K>
struct Taylor {
  static_assert(K >= 0);
  std::array<double, K + 1> a{};
  double at = 0.0;

  static Taylor constant(double v) {
    Taylor r;
    r.a[0] = v;
    return r;
  }
  // Seed for the spatial variable: value x, unit first coefficient.
  static Taylor variable_x(double x) {
    Taylor r;
    r.a[0] = x;
    if constexpr (K >= 1) r.a[1] = 1.0;
    return r;
  }
  // Seed for the time variable: value t, unit tangent.
  static Taylor variable_t(double t) {
    Taylor r;
    r.a[0] = t;
    r.at = 1.0;
    return r;
  }

  double value() const { return a[0]; }
  // k-th derivative (not coefficient): d^k f/dx^k = k! a[k].
  double deriv(int k) const {
    double fact = 1.0;
    for (int i = 2; i <= k; ++i) fact *= i;
    return a[k] * fact;
  }
};

template <int K>
inline Taylor<K> operator+(const Taylor<K>& x, const Taylor<K>& y) {
  Taylor<K> r;
  for (int k = 0; k <= K; ++k) r.a[k] = x.a[k] + y.a[k];
  r.at = x.at + y.at;
  return r;
}

template <int K>
inline Taylor<K> operator-(const Taylor<K>& x, const Taylor<K>& y) {
  Taylor<K> r;
  for (int k = 0; k <= K; ++k) r.a[k] = x.a[k] - y.a[k];
  r.at = x.at - y.at;
  return r;
}

template <int K>
inline Taylor<K> operator-(const Taylor<K>& x) {
  Taylor<K> r;
  for (int k = 0; k <= K; ++k) r.a[k] = -x.a[k];
  r.at = -x.at;
  return r;
}

template <int K>
inline Taylor<K> operator*(double s, const Taylor<K>& x) {
  Taylor<K> r;
  for (int k = 0; k <= K; ++k) r.a[k] = s * x.a[k];
  r.at = s * x.at;
  return r;
}

template <int K>
inline Taylor<K> operator+(const Taylor<K>& x, double s) {
  Taylor<K> r = x;
  r.a[0] += s;
  return r;
}

// Cauchy product; the tangent follows the product rule at the base point.
template <int K>
inline Taylor<K> operator*(const Taylor<K>& x, const Taylor<K>& y) {
  Taylor<K> r;
  for (int k = 0; k <= K; ++k) {
    double acc = 0.0;
    for (int j = 0; j <= k; ++j) acc += x.a[j] * y.a[k - j];
    r.a[k] = acc;
  }
  r.at = x.a[0] * y.at + x.at * y.a[0];
  return r;
}

// z = x*y pullback: accumulates into xb, yb given zb.
template <int K>
inline void mul_pullback(const Taylor<K>& x, const Taylor<K>& y,
                         const Taylor<K>& zb, Taylor<K>& xb, Taylor<K>& yb) {
  for (int k = 0; k <= K; ++k) {
    for (int j = 0; j <= k; ++j) {
      xb.a[j] += zb.a[k] * y.a[k - j];
      yb.a[k - j] += zb.a[k] * x.a[j];
    }
  }
  xb.a[0] += zb.at * y.at;
  xb.at += zb.at * y.a[0];
  yb.a[0] += zb.at * x.at;
  yb.at += zb.at * x.a[0];
}

// y = tanh(x) by the standard ODE recurrence y' = w u', w = 1 - y^2.
// The w series is returned because the pullback needs it (and the trainer
// kernels cache it between passes).
template <int K>
inline void tanh_series(const Taylor<K>& x, Taylor<K>& y,
                        std::array<double, K + 1>& w) {
  y.a[0] = std::tanh(x.a[0]);
  w[0] = 1.0 - y.a[0] * y.a[0];
  for (int k = 0; k + 1 <= K; ++k) {
    double acc = 0.0;
    for (int j = 0; j <= k; ++j) acc += w[j] * (k + 1 - j) * x.a[k + 1 - j];
    y.a[k + 1] = acc / (k + 1);
    double sq = 0.0;
    for (int j = 0; j <= k + 1; ++j) sq += y.a[j] * y.a[k + 1 - j];
    w[k + 1] = -sq;
  }
  y.at = w[0] * x.at;
}

template <int K>
inline Taylor<K> tanh(const Taylor<K>& x) {
  Taylor<K> y;
  std::array<double, K + 1> w;
  tanh_series(x, y, w);
  return y;
}

// Pullback of tanh_series: given the saved forward values (x, y, w) and the
// output adjoint yb, accumulate the input adjoint into xb. Mechanical reverse
// of the recurrence above; wb/bb are the adjoints of the w and y coefficients.
template <int K>
inline void tanh_pullback(const Taylor<K>& x, const Taylor<K>& y,
                          const std::array<double, K + 1>& w,
                          const Taylor<K>& yb, Taylor<K>& xb) {
  std::array<double, K + 1> bb = yb.a;
  std::array<double, K + 1> wb{};
  xb.at += yb.at * w[0];
  wb[0] += yb.at * x.at;
  for (int k = K - 1; k >= 0; --k) {
    // w[k+1] = -sum_j y[j] y[k+1-j]
    for (int j = 0; j <= k + 1; ++j) bb[j] -= 2.0 * wb[k + 1] * y.a[k + 1 - j];
    // y[k+1] = (1/(k+1)) sum_j w[j] (k+1-j) x[k+1-j]
    const double c = bb[k + 1] / (k + 1);
    for (int j = 0; j <= k; ++j) {
      wb[j] += c * (k + 1 - j) * x.a[k + 1 - j];
      xb.a[k + 1 - j] += c * (k + 1 - j) * w[j];
    }
  }
  bb[0] -= 2.0 * y.a[0] * wb[0];
  xb.a[0] += bb[0] * w[0];
}

// y = exp(x): y' = y u'.
template <int K>
inline Taylor<K> exp(const Taylor<K>& x) {
  Taylor<K> y;
  y.a[0] = std::exp(x.a[0]);
  for (int k = 0; k + 1 <= K; ++k) {
    double acc = 0.0;
    for (int j = 0; j <= k; ++j) acc += y.a[j] * (k + 1 - j) * x.a[k + 1 - j];
    y.a[k + 1] = acc / (k + 1);
  }
  y.at = y.a[0] * x.at;
  return y;
}

template <int K>
inline void exp_pullback(const Taylor<K>& x, const Taylor<K>& y,
                         const Taylor<K>& yb, Taylor<K>& xb) {
  std::array<double, K + 1> bb = yb.a;
  xb.at += yb.at * y.a[0];
  bb[0] += yb.at * x.at;
  for (int k = K - 1; k >= 0; --k) {
    const double c = bb[k + 1] / (k + 1);
    for (int j = 0; j <= k; ++j) {
      bb[j] += c * (k + 1 - j) * x.a[k + 1 - j];
      xb.a[k + 1 - j] += c * (k + 1 - j) * y.a[j];
    }
  }
  xb.a[0] += bb[0] * y.a[0];
}

// y = log(x), x.a[0] > 0: from x y' = x'.
template <int K>
inline Taylor<K> log(const Taylor<K>& x) {
  assert(x.a[0] > 0.0);
  Taylor<K> y;
  y.a[0] = std::log(x.a[0]);
  for (int m = 1; m <= K; ++m) {
    double acc = m * x.a[m];
    for (int j = 1; j <= m - 1; ++j) acc -= x.a[j] * (m - j) * y.a[m - j];
    y.a[m] = acc / (m * x.a[0]);
  }
  y.at = x.at / x.a[0];
  return y;
}

template <int K>
inline void log_pullback(const Taylor<K>& x, const Taylor<K>& y,
                         const Taylor<K>& yb, Taylor<K>& xb) {
  std::array<double, K + 1> bb = yb.a;
  xb.at += yb.at / x.a[0];
  xb.a[0] -= yb.at * x.at / (x.a[0] * x.a[0]);
  for (int m = K; m >= 1; --m) {
    const double c = bb[m] / (m * x.a[0]);
    xb.a[m] += c * m;
    for (int j = 1; j <= m - 1; ++j) {
      xb.a[j] -= c * (m - j) * y.a[m - j];
      bb[m - j] -= c * (m - j) * x.a[j];
    }
    xb.a[0] -= bb[m] * y.a[m] / x.a[0];
  }
  xb.a[0] += bb[0] / x.a[0];
}

// softplus on a scalar that carries only (value, tangent); the flow's
// reparameterized layer weights are functions of t alone, so their higher
// x-coefficients are identically zero.
template <int K>
inline Taylor<K> dual_softplus(const Taylor<K>& x) {
#ifndef NDEBUG
  for (int k = 1; k <= K; ++k) assert(x.a[k] == 0.0);
#endif
  Taylor<K> y;
  const double v = x.a[0];
  y.a[0] = v > 30.0 ? v : std::log1p(std::exp(v));
  const double sig = 1.0 / (1.0 + std::exp(-v));
  y.at = sig * x.at;
  return y;
}

template <int K>
inline void dual_softplus_pullback(const Taylor<K>& x, const Taylor<K>& yb,
                                   Taylor<K>& xb) {
  const double v = x.a[0];
  const double sig = 1.0 / (1.0 + std::exp(-v));
  const double dsig = sig * (1.0 - sig);
  xb.a[0] += yb.a[0] * sig + yb.at * dsig * x.at;
  xb.at += yb.at * sig;
}

template <int K>
inline bool is_finite(const Taylor<K>& x) {
  for (int k = 0; k <= K; ++k)
    if (!std::isfinite(x.a[k])) return false;
  return std::isfinite(x.at);
}

}  // namespace pded
