#include "pded/data.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <stdexcept>

#include "pded/rng.hpp"

namespace pded {

double population_std(const Eigen::VectorXd& v) {
  return std::sqrt((v.array() - v.mean()).square().mean());
}

// ---------------------------------------------------------------------------
// Korteweg-de Vries, convention u_t = u_xxx - u u_x.
//
// With v solving the textbook form v_tau + 6 v v_x + v_xxx = 0, the map
// u(x, t) = -6 v(x, -t) satisfies u_t = u_xxx - u u_x identically. The
// two-soliton v is Hirota's F = 1 + e1 + e2 + B e1 e2 with
// eta_i = k_i (x - k_i^2 tau - x0_i), B = ((k1-k2)/(k1+k2))^2, speeds
// c_i = k_i^2. This convention carries solitary waves of amplitude -3c
// travelling towards -x.
// ---------------------------------------------------------------------------

double kdv_single_soliton(double x, double t, double x0, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("kdv: soliton speed must be positive");
  const double arg = 0.5 * std::sqrt(c) * (x + c * t - x0);
  const double sech = 1.0 / std::cosh(arg);
  return -3.0 * c * sech * sech;
}

double kdv_two_soliton(double x, double t, std::array<double, 2> x0,
                       std::array<double, 2> c) {
  if (!(c[0] > 0.0) || !(c[1] > 0.0))
    throw std::invalid_argument("kdv: soliton speeds must be positive");
  if (c[0] == c[1])
    throw std::invalid_argument("kdv: soliton speeds must differ");
  const double tau = -t;
  const double k1 = std::sqrt(c[0]);
  const double k2 = std::sqrt(c[1]);
  const double eta1 = k1 * (x - c[0] * tau - x0[0]);
  const double eta2 = k2 * (x - c[1] * tau - x0[1]);
  const double logb = 2.0 * std::log(std::abs(k1 - k2) / (k1 + k2));

  // factor exp(-m) out of F to keep all exponentials <= 1
  const double m =
      std::max(std::max(0.0, eta1), std::max(eta2, eta1 + eta2 + logb));
  const double e0 = std::exp(-m);
  const double e1 = std::exp(eta1 - m);
  const double e2 = std::exp(eta2 - m);
  const double e12 = std::exp(eta1 + eta2 + logb - m);

  const double f = e0 + e1 + e2 + e12;
  const double fx = k1 * e1 + k2 * e2 + (k1 + k2) * e12;
  const double fxx = k1 * k1 * e1 + k2 * k2 * e2 + (k1 + k2) * (k1 + k2) * e12;
  const double v = 2.0 * (fxx * f - fx * fx) / (f * f);
  return -6.0 * v;
}

// ---------------------------------------------------------------------------
// Burgers, u_t = nu u_xx - u u_x, delta-peak initial mass A (Cole-Hopf).
// ---------------------------------------------------------------------------

double burgers_delta(double x, double t, double nu, double A) {
  if (!(t > 0.0)) throw std::invalid_argument("burgers_delta: requires t > 0");
  if (!(nu > 0.0)) throw std::invalid_argument("burgers_delta: requires nu > 0");
  const double reynolds = A / (2.0 * nu);
  const double em1 = std::expm1(reynolds);
  const double z = x / std::sqrt(4.0 * nu * t);
  const double numer = std::sqrt(nu / (M_PI * t)) * em1 * std::exp(-z * z);
  const double denom = 1.0 + 0.5 * em1 * std::erfc(z);
  return numer / denom;
}

// ---------------------------------------------------------------------------
// Kuramoto-Sivashinsky, u_t = -u u_x - u_xx - u_xxxx, periodic, ETDRK4.
// ---------------------------------------------------------------------------

namespace {

struct KsWork {
  int n;
  int bins;
  double length;
  std::vector<double> real_buf;
  std::vector<std::complex<double>> spec_buf;
  fftw_plan fwd;
  fftw_plan inv;

  explicit KsWork(int n_, double length_)
      : n(n_), bins(n_ / 2 + 1), length(length_), real_buf(n_),
        spec_buf(bins) {
    fwd = fftw_plan_dft_r2c_1d(
        n, real_buf.data(), reinterpret_cast<fftw_complex*>(spec_buf.data()),
        FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_1d(
        n, reinterpret_cast<fftw_complex*>(spec_buf.data()), real_buf.data(),
        FFTW_ESTIMATE);
  }
  ~KsWork() {
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
  }

  std::vector<std::complex<double>> to_spec(const Eigen::VectorXd& u) {
    for (int i = 0; i < n; ++i) real_buf[i] = u(i);
    fftw_execute(fwd);
    return spec_buf;
  }
  // plans are bound to real_buf/spec_buf; copy in place, never reallocate
  Eigen::VectorXd to_real(const std::vector<std::complex<double>>& spec) {
    std::copy(spec.begin(), spec.end(), spec_buf.begin());
    fftw_execute(inv);
    Eigen::VectorXd out(n);
    for (int i = 0; i < n; ++i) out(i) = real_buf[i] / n;
    return out;
  }
  double wavenumber(int m) const { return 2.0 * M_PI * m / length; }
};

// -0.5 i k fft(u^2), 2/3-rule dealiased
std::vector<std::complex<double>> ks_nonlinear(
    KsWork& w, const std::vector<std::complex<double>>& v) {
  Eigen::VectorXd u = w.to_real(v);
  for (int i = 0; i < w.n; ++i) w.real_buf[i] = u(i) * u(i);
  fftw_execute(w.fwd);
  std::vector<std::complex<double>> out = w.spec_buf;
  const int cutoff = w.n / 3;
  for (int m = 0; m < w.bins; ++m) {
    if (m > cutoff) {
      out[m] = 0.0;
    } else {
      out[m] *= std::complex<double>(0.0, -0.5 * w.wavenumber(m));
    }
  }
  return out;
}

}  // namespace

Eigen::VectorXd ks_initial_condition(const KsConfig& cfg) {
  Rng rng(cfg.seed);
  Eigen::VectorXd u0 = Eigen::VectorXd::Zero(cfg.modes);
  std::vector<double> amp(8), phase(8);
  for (int m = 0; m < 8; ++m) {
    amp[m] = 0.3 * rng.gauss();
    phase[m] = rng.uniform(0.0, 2.0 * M_PI);
  }
  for (int i = 0; i < cfg.modes; ++i) {
    const double x = cfg.domain * i / cfg.modes;
    for (int m = 0; m < 8; ++m)
      u0(i) += amp[m] * std::cos(2.0 * M_PI * (m + 1) * x / cfg.domain + phase[m]);
  }
  return u0;
}

KsSolution ks_solve(const KsConfig& cfg, const std::vector<double>& out_times) {
  return ks_solve_from(cfg, ks_initial_condition(cfg), out_times);
}

KsSolution ks_solve_from(const KsConfig& cfg, const Eigen::VectorXd& u0,
                         const std::vector<double>& out_times) {
  if (cfg.modes < 16 || cfg.modes % 2 != 0)
    throw std::invalid_argument("ks_solve: modes must be even and >= 16");
  if (u0.size() != cfg.modes)
    throw std::invalid_argument("ks_solve: initial condition size mismatch");
  if (out_times.empty()) throw std::invalid_argument("ks_solve: no output times");
  const double h = cfg.dt;
  if (!(h > 0.0)) throw std::invalid_argument("ks_solve: dt must be positive");

  KsWork w(cfg.modes, cfg.domain);
  const int bins = w.bins;

  // linear symbol k^2 - k^4 and ETDRK4 contour coefficients
  std::vector<double> lin(bins), e_full(bins), e_half(bins);
  std::vector<double> q(bins), f1(bins), f2(bins), f3(bins);
  const int contour_pts = 32;
  for (int m = 0; m < bins; ++m) {
    const double k = w.wavenumber(m);
    lin[m] = k * k - k * k * k * k;
    e_full[m] = std::exp(h * lin[m]);
    e_half[m] = std::exp(0.5 * h * lin[m]);
    std::complex<double> sq = 0, s1 = 0, s2 = 0, s3 = 0;
    for (int j = 0; j < contour_pts; ++j) {
      const double angle = M_PI * (j + 0.5) / contour_pts;
      const std::complex<double> r(std::cos(angle), std::sin(angle));
      const std::complex<double> lr = h * lin[m] + r;
      const std::complex<double> elr = std::exp(lr);
      sq += (std::exp(lr * 0.5) - 1.0) / lr;
      s1 += (-4.0 - lr + elr * (4.0 - 3.0 * lr + lr * lr)) / (lr * lr * lr);
      s2 += (2.0 + lr + elr * (lr - 2.0)) / (lr * lr * lr);
      s3 += (-4.0 - 3.0 * lr - lr * lr + elr * (4.0 - lr)) / (lr * lr * lr);
    }
    q[m] = h * (sq / double(contour_pts)).real();
    f1[m] = h * (s1 / double(contour_pts)).real();
    f2[m] = h * (s2 / double(contour_pts)).real();
    f3[m] = h * (s3 / double(contour_pts)).real();
  }

  // map output times to steps
  std::vector<long> out_steps(out_times.size());
  long last_step = 0;
  for (std::size_t i = 0; i < out_times.size(); ++i) {
    out_steps[i] = std::lround(out_times[i] / h);
    if (out_steps[i] < 0) throw std::invalid_argument("ks_solve: negative output time");
    last_step = std::max(last_step, out_steps[i]);
  }

  KsSolution sol;
  sol.x.resize(cfg.modes);
  for (int i = 0; i < cfg.modes; ++i) sol.x(i) = cfg.domain * i / cfg.modes;
  sol.t.resize(static_cast<int>(out_times.size()));
  sol.u.resize(static_cast<int>(out_times.size()), cfg.modes);

  std::vector<std::complex<double>> v = w.to_spec(u0);
  auto record = [&](long step) {
    for (std::size_t i = 0; i < out_steps.size(); ++i) {
      if (out_steps[i] == step) {
        Eigen::VectorXd u = w.to_real(v);
        if (!u.allFinite())
          throw std::runtime_error("ks_solve: solution blew up (step size too large)");
        sol.u.row(static_cast<int>(i)) = u.transpose();
        sol.t(static_cast<int>(i)) = step * h;
      }
    }
  };
  record(0);

  std::vector<std::complex<double>> nv, na, nb, nc, a(bins), b(bins), c(bins);
  for (long step = 1; step <= last_step; ++step) {
    nv = ks_nonlinear(w, v);
    for (int m = 0; m < bins; ++m) a[m] = e_half[m] * v[m] + q[m] * nv[m];
    na = ks_nonlinear(w, a);
    for (int m = 0; m < bins; ++m) b[m] = e_half[m] * v[m] + q[m] * na[m];
    nb = ks_nonlinear(w, b);
    for (int m = 0; m < bins; ++m)
      c[m] = e_half[m] * a[m] + q[m] * (2.0 * nb[m] - nv[m]);
    nc = ks_nonlinear(w, c);
    for (int m = 0; m < bins; ++m)
      v[m] = e_full[m] * v[m] + f1[m] * nv[m] + 2.0 * f2[m] * (na[m] + nb[m]) +
             f3[m] * nc[m];
    record(step);
  }
  return sol;
}

KsSolution ks_experiment_slice(std::uint64_t seed) {
  KsConfig cfg;
  cfg.seed = seed;
  std::vector<double> times(25);
  for (int i = 0; i < 25; ++i) times[i] = 45.2 + 0.4 * i;
  KsSolution full = ks_solve(cfg, times);

  KsSolution sliced;
  const int nx = cfg.modes / 4;
  sliced.x.resize(nx);
  sliced.t = full.t;
  sliced.u.resize(full.u.rows(), nx);
  for (int j = 0; j < nx; ++j) {
    sliced.x(j) = full.x(4 * j);
    sliced.u.col(j) = full.u.col(4 * j);
  }
  return sliced;
}

// ---------------------------------------------------------------------------
// Particles
// ---------------------------------------------------------------------------

ParticleSet random_walk(int n_walkers, int steps, double diffusivity,
                        double drift, double dt, const GaussianMixture& init,
                        std::uint64_t seed) {
  if (n_walkers < 1 || steps < 1)
    throw std::invalid_argument("random_walk: need walkers and steps");
  if (diffusivity < 0.0 || !(dt > 0.0))
    throw std::invalid_argument("random_walk: D >= 0 and dt > 0 required");
  if (init.means.size() != init.sigmas.size() ||
      init.means.size() != init.weights.size() || init.means.empty())
    throw std::invalid_argument("random_walk: malformed initial mixture");

  double wsum = 0.0;
  for (const double w : init.weights) wsum += w;

  Rng rng(seed);
  ParticleSet set;
  set.positions.resize(n_walkers, steps + 1);
  set.times.resize(steps + 1);
  for (int s = 0; s <= steps; ++s) set.times(s) = s * dt;
  set.diffusivity = diffusivity;
  set.drift = drift;
  set.dt = dt;
  set.seed = seed;
  set.params = {{"mixture_means", init.means},
                {"mixture_sigmas", init.sigmas},
                {"mixture_weights", init.weights}};

  const double step_sd = std::sqrt(2.0 * diffusivity * dt);
  for (int wlk = 0; wlk < n_walkers; ++wlk) {
    double pick = rng.uniform01() * wsum;
    std::size_t comp = 0;
    while (comp + 1 < init.weights.size() && pick > init.weights[comp]) {
      pick -= init.weights[comp];
      ++comp;
    }
    double x = rng.gauss(init.means[comp], init.sigmas[comp]);
    set.positions(wlk, 0) = x;
    for (int s = 1; s <= steps; ++s) {
      x += drift * dt + step_sd * rng.gauss();
      set.positions(wlk, s) = x;
    }
  }
  return set;
}

double mixture_density(const GaussianMixture& init, double diffusivity,
                       double drift, double x, double t) {
  double wsum = 0.0;
  for (const double w : init.weights) wsum += w;
  double p = 0.0;
  for (std::size_t i = 0; i < init.means.size(); ++i) {
    const double mean = init.means[i] + drift * t;
    const double var = init.sigmas[i] * init.sigmas[i] + 2.0 * diffusivity * t;
    p += init.weights[i] / wsum *
         std::exp(-0.5 * (x - mean) * (x - mean) / var) /
         std::sqrt(2.0 * M_PI * var);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Sampling and noise
// ---------------------------------------------------------------------------

void add_noise(SampledField& field, double level, std::uint64_t seed) {
  if (level < 0.0) throw std::invalid_argument("add_noise: negative level");
  field.u_clean = field.u;
  field.noise_level = level;
  field.noise_seed = seed;
  if (level == 0.0) return;
  const double sd = population_std(field.u);
  Rng rng(seed);
  for (int i = 0; i < field.size(); ++i) field.u(i) += level * sd * rng.gauss();
}

SampledField sample_grid(double x0, double x1, int nx, double t0, double t1,
                         int nt) {
  if (nx < 2 || nt < 2)
    throw std::invalid_argument("sample_grid: counts must be >= 2");
  SampledField f;
  f.grid_nx = nx;
  f.grid_nt = nt;
  const int n = nx * nt;
  f.x.resize(n);
  f.t.resize(n);
  f.u = Eigen::VectorXd::Zero(n);
  f.u_clean = Eigen::VectorXd::Zero(n);
  for (int it = 0; it < nt; ++it) {
    const double t = t0 + (t1 - t0) * it / (nt - 1);
    for (int ix = 0; ix < nx; ++ix) {
      const int i = it * nx + ix;
      f.x(i) = x0 + (x1 - x0) * ix / (nx - 1);
      f.t(i) = t;
    }
  }
  return f;
}

}  // namespace pded
