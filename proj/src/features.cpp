#include "pded/features.hpp"

#include <cmath>
#include <stdexcept>

#include "pded/data.hpp"

namespace pded {

std::string TermDescriptor::name() const {
  std::string deriv;
  if (k > 0) deriv = "u_" + std::string(static_cast<std::size_t>(k), 'x');
  std::string poly;
  if (p == 1)
    poly = "u";
  else if (p > 1)
    poly = "u^" + std::to_string(p);
  if (poly.empty() && deriv.empty()) return "1";
  if (poly.empty()) return deriv;
  if (deriv.empty()) return poly;
  return poly + "*" + deriv;
}

int library_column(const LibrarySpec& spec, int p, int k) {
  return p * (spec.max_deriv + 1) + k;
}

namespace {

void factorials(int n, double* fact) {
  fact[0] = 1.0;
  for (int k = 1; k <= n; ++k) fact[k] = fact[k - 1] * k;
}

}  // namespace

FeatureSystem build_library(const kernels::JetSoA& jets, const LibrarySpec& spec) {
  if (jets.order < spec.max_deriv)
    throw std::invalid_argument("build_library: jets carry order " +
                                std::to_string(jets.order) + " < requested D=" +
                                std::to_string(spec.max_deriv));
  if (spec.max_poly < 0 || spec.max_poly > 7 || spec.max_deriv < 0)
    throw std::invalid_argument("build_library: library spec out of range");
  const int n = jets.n;
  const int D = spec.max_deriv;
  const int P = spec.max_poly;
  const int M = spec.term_count();

  FeatureSystem sys;
  sys.theta.resize(n, M);
  sys.ut.resize(n);
  sys.terms.resize(M);
  for (int p = 0; p <= P; ++p)
    for (int k = 0; k <= D; ++k) sys.terms[library_column(spec, p, k)] = {p, k};

  double fact[kernels::kMaxOrder + 1];
  factorials(D, fact);

  for (int i = 0; i < n; ++i) {
    const double u = jets.comp(0)[i];
    double upow = 1.0;
    for (int p = 0; p <= P; ++p) {
      for (int k = 0; k <= D; ++k) {
        const double dk = k == 0 ? 1.0 : jets.comp(k)[i] * fact[k];
        sys.theta(i, library_column(spec, p, k)) = upow * dk;
      }
      upow *= u;
    }
    sys.ut(i) = jets.tangent()[i];
  }

  if (spec.normalize) {
    sys.col_scale.resize(M);
    for (int j = 0; j < M; ++j) {
      const double rms = std::sqrt(sys.theta.col(j).squaredNorm() / n);
      sys.col_scale(j) = rms > 1e-300 ? rms : 1.0;
      sys.theta.col(j) /= sys.col_scale(j);
    }
  }
  return sys;
}

void accumulate_jet_adjoints(const FeatureSystem& sys, const LibrarySpec& spec,
                             const kernels::JetSoA& jets,
                             const Eigen::MatrixXd& theta_bar,
                             const Eigen::VectorXd& ut_bar,
                             kernels::JetSoA& jet_adj) {
  if (sys.col_scale.size() != 0)
    throw std::logic_error("accumulate_jet_adjoints: normalized systems carry no gradients");
  const int n = jets.n;
  const int D = spec.max_deriv;
  const int P = spec.max_poly;
  if (theta_bar.rows() != n || theta_bar.cols() != sys.cols() || ut_bar.size() != n)
    throw std::invalid_argument("accumulate_jet_adjoints: shape mismatch");
  if (jet_adj.n != n || jet_adj.order != jets.order) jet_adj.resize(n, jets.order);

  double fact[kernels::kMaxOrder + 1];
  factorials(D, fact);

  for (int i = 0; i < n; ++i) {
    const double u = jets.comp(0)[i];
    // powers u^0 .. u^P and their derivative factors p*u^(p-1)
    double upow[8];
    upow[0] = 1.0;
    for (int p = 1; p <= P; ++p) upow[p] = upow[p - 1] * u;

    double u_bar = 0.0;
    for (int p = 0; p <= P; ++p) {
      const double dpow = p == 0 ? 0.0 : p * upow[p - 1];
      for (int k = 0; k <= D; ++k) {
        const double tb = theta_bar(i, library_column(spec, p, k));
        if (tb == 0.0) continue;
        const double dk = k == 0 ? 1.0 : jets.comp(k)[i] * fact[k];
        u_bar += tb * dpow * dk;
        if (k > 0) jet_adj.comp(k)[i] += tb * upow[p] * fact[k];
      }
    }
    jet_adj.comp(0)[i] += u_bar;
    jet_adj.tangent()[i] += ut_bar(i);
  }
}

std::vector<double> fd_weights(double x0, const std::vector<double>& nodes,
                               int order) {
  // Fornberg's recursion for finite-difference weights on arbitrary nodes.
  const int n = static_cast<int>(nodes.size()) - 1;
  if (order > n)
    throw std::invalid_argument("fd_weights: need at least order+1 nodes");
  const int m = order;
  std::vector<std::vector<double>> c(n + 1, std::vector<double>(m + 1, 0.0));
  double c1 = 1.0;
  double c4 = nodes[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i <= n; ++i) {
    const int mn = std::min(i, m);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = nodes[i] - x0;
    for (int j = 0; j <= i - 1; ++j) {
      const double c3 = nodes[i] - nodes[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k)
        c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n + 1);
  for (int i = 0; i <= n; ++i) w[i] = c[i][m];
  return w;
}

kernels::JetSoA numeric_jets(const SampledField& field, int max_deriv) {
  if (!field.gridded())
    throw std::invalid_argument("numeric_jets: field is not on a regular grid");
  if (max_deriv < 1 || max_deriv > kernels::kMaxOrder)
    throw std::invalid_argument("numeric_jets: derivative order out of range");
  const int nx = field.grid_nx;
  const int nt = field.grid_nt;
  const int D = max_deriv;
  const int wx = (D % 2 == 1) ? D + 2 : D + 3;  // one window serves all orders
  if (nx < wx || nt < 3)
    throw std::invalid_argument("numeric_jets: grid too small for the stencil (need nx >= " +
                                std::to_string(wx) + ", nt >= 3)");

  kernels::JetSoA jets;
  jets.resize(nx * nt, D);

  double fact[kernels::kMaxOrder + 1];
  factorials(D, fact);

  std::vector<double> xnodes(wx), tnodes(3);
  for (int it = 0; it < nt; ++it) {
    for (int ix = 0; ix < nx; ++ix) {
      const int i = it * nx + ix;
      jets.comp(0)[i] = field.u(i);

      int start = ix - wx / 2;
      start = std::max(0, std::min(start, nx - wx));
      for (int q = 0; q < wx; ++q) xnodes[q] = field.x(it * nx + start + q);
      for (int k = 1; k <= D; ++k) {
        const std::vector<double> w = fd_weights(field.x(i), xnodes, k);
        double acc = 0.0;
        for (int q = 0; q < wx; ++q) acc += w[q] * field.u(it * nx + start + q);
        jets.comp(k)[i] = acc / fact[k];
      }

      int tstart = it - 1;
      tstart = std::max(0, std::min(tstart, nt - 3));
      for (int q = 0; q < 3; ++q) tnodes[q] = field.t((tstart + q) * nx + ix);
      const std::vector<double> wt = fd_weights(field.t(i), tnodes, 1);
      double acc = 0.0;
      for (int q = 0; q < 3; ++q) acc += wt[q] * field.u((tstart + q) * nx + ix);
      jets.tangent()[i] = acc;
    }
  }
  return jets;
}

MleResult mle_coefficients(const FeatureSystem& sys) {
  MleResult res;
  Eigen::BDCSVD<Eigen::MatrixXd> svd(sys.theta,
                                     Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double tol = 1e-10 * svd.singularValues()(0);
  res.rank_deficient =
      svd.singularValues()(svd.singularValues().size() - 1) <= tol;
  res.xi = svd.solve(sys.ut);
  return res;
}

}  // namespace pded
