#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace pded {

// Observed dataset {u_i, x_i, t_i} with provenance. grid_nx/grid_nt are set
// for tensor-grid datasets (point i = it * grid_nx + ix); zero means
// scattered.
struct SampledField {
  Eigen::VectorXd x, t, u;
  Eigen::VectorXd u_clean;
  int grid_nx = 0;
  int grid_nt = 0;

  std::string equation;          // generator name
  nlohmann::json params;         // generator parameters
  double noise_level = 0.0;      // fraction of std(u_clean)
  std::uint64_t noise_seed = 0;

  int size() const { return static_cast<int>(x.size()); }
  bool gridded() const { return grid_nx > 0 && grid_nt > 0; }
};

// Particle trajectories on a common time ladder: positions(w, s) is walker w
// at time stamps(s).
struct ParticleSet {
  Eigen::MatrixXd positions;     // walkers x (steps+1)
  Eigen::VectorXd times;         // steps+1
  double diffusivity = 0.0;
  double drift = 0.0;
  double dt = 0.0;
  nlohmann::json params;
  std::uint64_t seed = 0;

  int walkers() const { return static_cast<int>(positions.rows()); }
  int steps() const { return static_cast<int>(positions.cols()) - 1; }
};

// Two-soliton solution of u_t = u_xxx - u u_x (the convention used
// throughout; see kdv_residual test for the validation). Soliton i has speed
// c[i] and its center passes x0[i] at t = 0; propagation is in -x, the
// direction this convention admits solitary waves.
double kdv_two_soliton(double x, double t, std::array<double, 2> x0,
                       std::array<double, 2> c);

// Single-soliton limit, same convention.
double kdv_single_soliton(double x, double t, double x0, double c);

// Cole-Hopf solution of u_t = nu u_xx - u u_x for initial mass A at a delta
// peak; requires t > 0.
double burgers_delta(double x, double t, double nu, double A);

struct KsConfig {
  int modes = 1024;
  double domain = 32.0 * M_PI;
  double dt = 0.2;
  std::uint64_t seed = 0;
};

struct KsSolution {
  Eigen::VectorXd x;             // modes points on [0, L)
  Eigen::VectorXd t;             // output times
  Eigen::MatrixXd u;             // frames x modes
};

// Spectral ETDRK4 integration of u_t = -u u_x - u_xx - u_xxxx on a periodic
// domain from a seeded random smooth initial condition; frames are returned
// at the requested times (each rounded to the nearest step).
KsSolution ks_solve(const KsConfig& cfg, const std::vector<double>& out_times);

// Seeded low-mode random initial condition used by ks_solve.
Eigen::VectorXd ks_initial_condition(const KsConfig& cfg);

// Same integrator from an explicit initial condition.
KsSolution ks_solve_from(const KsConfig& cfg, const Eigen::VectorXd& u0,
                         const std::vector<double>& out_times);

// The canonical experiment slice: 25 frames in (45, 55), every 4th grid
// point.
KsSolution ks_experiment_slice(std::uint64_t seed);

struct GaussianMixture {
  std::vector<double> means;
  std::vector<double> sigmas;
  std::vector<double> weights;   // normalized internally
};

// Biased random walk x_{k+1} = x_k + v dt + sqrt(2 D dt) * N(0,1).
ParticleSet random_walk(int n_walkers, int steps, double diffusivity,
                        double drift, double dt, const GaussianMixture& init,
                        std::uint64_t seed);

// Density of the advected-diffused mixture at time t (exact evolution of a
// Gaussian mixture under p_t = -v p_x + D p_xx).
double mixture_density(const GaussianMixture& init, double diffusivity,
                       double drift, double x, double t);

// Additive white noise scaled by level * std(u); keeps the clean copy.
void add_noise(SampledField& field, double level, std::uint64_t seed);

// Regular tensor grid with endpoints included; u left zero.
SampledField sample_grid(double x0, double x1, int nx, double t0, double t1,
                         int nt);

// Population standard deviation, the convention for noise levels.
double population_std(const Eigen::VectorXd& v);

}  // namespace pded
