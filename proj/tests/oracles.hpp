#pragma once

// Test-side oracles kept independent of the library implementation paths they
// check.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "pded/rng.hpp"

namespace oracle {

// Compact form of the SBL marginal likelihood (hyper-priors off):
//   1/2 [ log|C| + y^T C^-1 y ],  C = beta^-1 I + Theta A^-1 Theta^T.
inline double compact_neg_log_evidence(const Eigen::MatrixXd& theta,
                                       const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& alpha,
                                       double beta) {
  const int n = static_cast<int>(theta.rows());
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(n, n) / beta;
  c.noalias() += theta * alpha.cwiseInverse().asDiagonal() * theta.transpose();
  Eigen::LLT<Eigen::MatrixXd> llt(c);
  const double logdet =
      2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return 0.5 * (logdet + y.dot(llt.solve(y)));
}

// Random sparse-regression instance for support-recovery checks.
struct SparseInstance {
  Eigen::MatrixXd theta;
  Eigen::VectorXd y;
  Eigen::VectorXd xi_true;
  std::vector<int> support;
};

inline SparseInstance make_sparse_instance(int n, int m, int k_active,
                                           double noise_frac,
                                           std::uint64_t seed) {
  pded::Rng rng(seed);
  SparseInstance inst;
  inst.theta.resize(n, m);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < m; ++j) inst.theta(i, j) = rng.gauss();
  inst.xi_true = Eigen::VectorXd::Zero(m);
  while (static_cast<int>(inst.support.size()) < k_active) {
    const int j = static_cast<int>(rng.below(m));
    bool seen = false;
    for (const int s : inst.support) seen |= s == j;
    if (!seen) inst.support.push_back(j);
  }
  for (const int j : inst.support)
    inst.xi_true(j) = rng.uniform(1.0, 3.0) * (rng.uniform01() < 0.5 ? -1.0 : 1.0);
  Eigen::VectorXd clean = inst.theta * inst.xi_true;
  const double sd = std::sqrt((clean.array() - clean.mean()).square().mean());
  inst.y = clean;
  for (int i = 0; i < n; ++i) inst.y(i) += noise_frac * sd * rng.gauss();
  return inst;
}

// Quadratic-programming oracle: minimizer of
//   beta ||y - Theta mu||^2 + mu^T diag(alpha) mu
// solved from the normal equations by dense LU (independent route).
inline Eigen::VectorXd ridge_qp(const Eigen::MatrixXd& theta,
                                const Eigen::VectorXd& y,
                                const Eigen::VectorXd& alpha, double beta) {
  Eigen::MatrixXd lhs = beta * theta.transpose() * theta;
  lhs += alpha.asDiagonal();
  return lhs.fullPivLu().solve(beta * theta.transpose() * y);
}

}  // namespace oracle
