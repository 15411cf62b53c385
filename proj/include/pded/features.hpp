#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "pded/kernels.hpp"

namespace pded {

struct SampledField;  // data.hpp

// Candidate-library layout: every term is u^p * d^k u/dx^k with
// 0 <= p <= max_poly, 0 <= k <= max_deriv; the k = 0 factor is taken as 1 so
// column (p, 0) is the pure power u^p and column (0, 0) is all ones.
struct LibrarySpec {
  int max_deriv = 4;   // D
  int max_poly = 3;    // P
  bool normalize = false;  // unit-RMS column scaling (numeric ablation only)

  int term_count() const { return (max_deriv + 1) * (max_poly + 1); }
};

struct TermDescriptor {
  int p = 0;
  int k = 0;
  std::string name() const;
};

// Target vector u_t and candidate matrix built from jets or numeric stencils.
// Column order is p-major, k-minor and stable across runs.
struct FeatureSystem {
  Eigen::MatrixXd theta;                // N x M
  Eigen::VectorXd ut;                   // N
  std::vector<TermDescriptor> terms;    // M descriptors
  Eigen::VectorXd col_scale;            // size M when normalized, else empty

  int rows() const { return static_cast<int>(theta.rows()); }
  int cols() const { return static_cast<int>(theta.cols()); }
};

int library_column(const LibrarySpec& spec, int p, int k);

// Neural route: jets carry exact derivatives of the surrogate.
FeatureSystem build_library(const kernels::JetSoA& jets, const LibrarySpec& spec);

// Pullback companion of build_library: map (dL/dTheta, dL/dut) back to jet
// adjoints in Taylor-coefficient convention, ready for backprop_jets.
// Only valid for unnormalized systems.
void accumulate_jet_adjoints(const FeatureSystem& sys, const LibrarySpec& spec,
                             const kernels::JetSoA& jets,
                             const Eigen::MatrixXd& theta_bar,
                             const Eigen::VectorXd& ut_bar,
                             kernels::JetSoA& jet_adj);

// Ablation route: numeric differentiation of a gridded field, central
// stencils inside and shifted one-sided stencils at the boundaries. Returns
// jets in the same SoA convention as the surrogate (Taylor coefficients +
// time tangent).
kernels::JetSoA numeric_jets(const SampledField& field, int max_deriv);

struct MleResult {
  Eigen::VectorXd xi;
  bool rank_deficient = false;
};

// Plain least squares on the full library via SVD.
MleResult mle_coefficients(const FeatureSystem& sys);

// Finite-difference weights on arbitrary nodes (Fornberg recursion); shared
// by numeric_jets and by the residual test oracles.
std::vector<double> fd_weights(double x0, const std::vector<double>& nodes,
                               int order);

}  // namespace pded
