#include "pded/sbl.hpp"

#include <algorithm>
#include <cmath>

namespace pded {

namespace {

void check_positive(const Eigen::VectorXd& alpha, double beta) {
  for (int j = 0; j < alpha.size(); ++j)
    if (!(alpha(j) > 0.0))
      throw std::invalid_argument("sbl: alpha must be positive (alpha[" +
                                  std::to_string(j) + "] = " +
                                  std::to_string(alpha(j)) + ")");
  if (!(beta > 0.0)) throw std::invalid_argument("sbl: beta must be positive");
}

struct GramPosterior {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  double logdet_sigma = 0.0;
  double resid2 = 0.0;  // ||ut - Theta mu||^2
};

// Posterior and residual from the Gram pieces G = Theta^T Theta,
// gy = Theta^T ut, yy = ut^T ut.
GramPosterior gram_posterior(const Eigen::MatrixXd& gram,
                             const Eigen::VectorXd& gy, double yy,
                             const Eigen::VectorXd& alpha, double beta) {
  const int m = static_cast<int>(gram.rows());
  Eigen::MatrixXd precision = beta * gram;
  precision.diagonal() += alpha;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(precision);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      (ldlt.vectorD().array() <= 0.0).any()) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(precision);
    const double cond = svd.singularValues()(0) /
                        std::max(svd.singularValues()(m - 1), 1e-300);
    throw std::runtime_error(
        "posterior: precision factorization failed (condition estimate " +
        std::to_string(cond) + ")");
  }
  GramPosterior post;
  post.mu = beta * ldlt.solve(gy);
  post.sigma = ldlt.solve(Eigen::MatrixXd::Identity(m, m));
  post.logdet_sigma = -ldlt.vectorD().array().log().sum();
  post.resid2 = std::max(
      yy - 2.0 * post.mu.dot(gy) + post.mu.dot(gram * post.mu), 0.0);
  return post;
}

double gram_neg_log_evidence(const GramPosterior& post, double n,
                             const Eigen::VectorXd& alpha, double beta,
                             const HyperPriors& priors) {
  const double ridge = post.mu.dot(alpha.asDiagonal() * post.mu);
  double value = 0.5 * (beta * post.resid2 + ridge - post.logdet_sigma -
                        alpha.array().log().sum() - n * std::log(beta));
  value -= (priors.a * alpha.array().log() - priors.b * alpha.array()).sum();
  value -= priors.c * std::log(beta);
  value += priors.d * beta;
  return value;
}

}  // namespace

Posterior posterior(const Eigen::MatrixXd& theta, const Eigen::VectorXd& ut,
                    const Eigen::VectorXd& alpha, double beta) {
  check_positive(alpha, beta);
  const GramPosterior gp = gram_posterior(theta.transpose() * theta,
                                          theta.transpose() * ut,
                                          ut.squaredNorm(), alpha, beta);
  return Posterior{gp.mu, gp.sigma, gp.logdet_sigma};
}

double neg_log_evidence(const Eigen::MatrixXd& theta, const Eigen::VectorXd& ut,
                        const Eigen::VectorXd& alpha, double beta,
                        const HyperPriors& priors) {
  check_positive(alpha, beta);
  const GramPosterior gp = gram_posterior(theta.transpose() * theta,
                                          theta.transpose() * ut,
                                          ut.squaredNorm(), alpha, beta);
  return gram_neg_log_evidence(gp, static_cast<double>(theta.rows()), alpha,
                               beta, priors);
}

Eigen::VectorXd update_alpha(const Eigen::VectorXd& alpha, const Posterior& post,
                             const HyperPriors& priors, double alpha_cap) {
  Eigen::VectorXd out(alpha.size());
  for (int j = 0; j < alpha.size(); ++j) {
    const double gamma = 1.0 - alpha(j) * post.sigma(j, j);
    const double denom = post.mu(j) * post.mu(j) + 2.0 * priors.b;
    double a_new = denom > 0.0 ? (gamma + 2.0 * priors.a) / denom : alpha_cap;
    if (!(a_new > 0.0) || a_new > alpha_cap) a_new = alpha_cap;
    out(j) = a_new;
  }
  return out;
}

double update_beta(const Eigen::MatrixXd& theta, const Eigen::VectorXd& ut,
                   const Eigen::VectorXd& alpha, const Posterior& post,
                   const HyperPriors& priors, double beta_max) {
  const double n = static_cast<double>(theta.rows());
  const double m = static_cast<double>(theta.cols());
  const double trace_term = (alpha.array() * post.sigma.diagonal().array()).sum();
  const double l_reg = (ut - theta * post.mu).squaredNorm() / n;
  const double numer = n - m + trace_term + 2.0 * priors.c;
  const double denom = n * l_reg + 2.0 * priors.d;
  if (denom <= 0.0 || !(numer / denom < beta_max)) return beta_max;
  return numer / denom;
}

SblState solve_type2(const FeatureSystem& sys, const HyperPriors& priors,
                     const SolveOptions& opts, SolveDiag* diag) {
  priors.validate();
  const int n = sys.rows();
  const int m = sys.cols();
  const double nd = static_cast<double>(n);

  SblState state;
  state.alpha = Eigen::VectorXd::Constant(m, opts.alpha_init);
  state.mu = Eigen::VectorXd::Zero(m);
  state.sigma = Eigen::MatrixXd::Zero(m, m);
  state.active.assign(m, true);

  const double ut_var =
      std::max((sys.ut.array() - sys.ut.mean()).square().mean(), 1e-12);
  state.beta = opts.beta_init > 0.0 ? opts.beta_init : 1.0 / ut_var;

  if (opts.warm_start != nullptr && opts.warm_start->alpha.size() == m) {
    // Re-admit every term: warm alphas are clipped below the cap so a term
    // pruned in an earlier call can resurrect here.
    const double clip = 0.01 * opts.alpha_cap;
    for (int j = 0; j < m; ++j)
      state.alpha(j) = std::min(std::max(opts.warm_start->alpha(j), 1e-12), clip);
    if (opts.warm_start->beta > 0.0)
      state.beta = std::min(opts.warm_start->beta, opts.beta_max);
  }

  // Gram pieces over the full library; the working system uses subsets.
  const Eigen::MatrixXd gram_full = sys.theta.transpose() * sys.theta;
  const Eigen::VectorXd gy_full = sys.theta.transpose() * sys.ut;
  const double yy = sys.ut.squaredNorm();

  std::vector<int> work(m);
  for (int j = 0; j < m; ++j) work[j] = j;

  auto subset = [&](const std::vector<int>& idx, Eigen::MatrixXd& g,
                    Eigen::VectorXd& gv, Eigen::VectorXd& av) {
    const int ma = static_cast<int>(idx.size());
    g.resize(ma, ma);
    gv.resize(ma);
    av.resize(ma);
    for (int q = 0; q < ma; ++q) {
      gv(q) = gy_full(idx[q]);
      av(q) = state.alpha(idx[q]);
      for (int r = 0; r < ma; ++r) g(q, r) = gram_full(idx[q], idx[r]);
    }
  };

  Eigen::MatrixXd gram_w;
  Eigen::VectorXd gy_w, alpha_w;
  subset(work, gram_w, gy_w, alpha_w);

  if (diag != nullptr) diag->underdetermined = n <= m;

  GramPosterior post;
  int iter = 0;
  bool converged = false;
  int em_fallbacks = 0;

  for (; iter < opts.max_iter && !work.empty(); ++iter) {
    const int ma = static_cast<int>(work.size());
    post = gram_posterior(gram_w, gy_w, yy, alpha_w, state.beta);
    const double nev0 =
        gram_neg_log_evidence(post, nd, alpha_w, state.beta, priors);

    // MacKay fixed point (the paper's update), EM fallback if it would raise
    // the objective.
    Eigen::VectorXd alpha_new(ma);
    for (int q = 0; q < ma; ++q) {
      const double gamma = 1.0 - alpha_w(q) * post.sigma(q, q);
      const double denom = post.mu(q) * post.mu(q) + 2.0 * priors.b;
      double v = denom > 0.0 ? (gamma + 2.0 * priors.a) / denom : opts.alpha_cap;
      if (!(v > 0.0) || v > opts.alpha_cap) v = opts.alpha_cap;
      alpha_new(q) = v;
    }
    const double trace_term =
        (alpha_new.array() * post.sigma.diagonal().array()).sum();
    double beta_new = (nd - ma + trace_term + 2.0 * priors.c) /
                      (nd * (post.resid2 / nd) + 2.0 * priors.d);
    if (!(beta_new > 0.0) || beta_new > opts.beta_max) beta_new = opts.beta_max;

    if (!alpha_new.allFinite() || !std::isfinite(beta_new)) {
      for (int q = 0; q < ma; ++q) {
        state.alpha(work[q]) = alpha_w(q);
        state.mu(work[q]) = post.mu(q);
      }
      throw SblDivergence("solve_type2: hyperparameters diverged at iteration " +
                              std::to_string(iter),
                          state);
    }

    {
      const GramPosterior cand =
          gram_posterior(gram_w, gy_w, yy, alpha_new, beta_new);
      const double nev1 =
          gram_neg_log_evidence(cand, nd, alpha_new, beta_new, priors);
      if (nev1 > nev0 + 1e-10) {
        ++em_fallbacks;
        for (int q = 0; q < ma; ++q) {
          double v = (1.0 + 2.0 * priors.a) /
                     (post.mu(q) * post.mu(q) + post.sigma(q, q) + 2.0 * priors.b);
          if (!(v > 0.0) || v > opts.alpha_cap) v = opts.alpha_cap;
          alpha_new(q) = v;
        }
        const double expected_resid2 =
            post.resid2 + (gram_w * post.sigma).trace();
        beta_new = (nd + 2.0 * priors.c) / (expected_resid2 + 2.0 * priors.d);
        if (!(beta_new > 0.0) || beta_new > opts.beta_max)
          beta_new = opts.beta_max;
      }
    }

    double rel_change =
        std::abs(beta_new - state.beta) / std::max(state.beta, 1e-300);
    for (int q = 0; q < ma; ++q)
      rel_change = std::max(rel_change, std::abs(alpha_new(q) - alpha_w(q)) /
                                            std::max(alpha_w(q), 1e-300));

    alpha_w = alpha_new;
    state.beta = beta_new;
    for (int q = 0; q < ma; ++q) state.alpha(work[q]) = alpha_w(q);

    bool pruned = false;
    if (iter >= opts.prune_burn_in) {
      // quality/sparsity factors at the updated hyperparameters
      const GramPosterior cur =
          gram_posterior(gram_w, gy_w, yy, alpha_w, state.beta);
      const Eigen::MatrixXd gs = gram_w * cur.sigma;
      const double b2 = state.beta * state.beta;
      std::vector<int> keep;
      keep.reserve(ma);
      for (int q = 0; q < ma; ++q) {
        const double S = state.beta * gram_w(q, q) - b2 * gs.row(q).dot(gram_w.col(q));
        const double Q = state.beta * gy_w(q) - b2 * gs.row(q).dot(gy_w);
        const double den = std::max(alpha_w(q) - S, 1e-12 * alpha_w(q));
        const double s_f = alpha_w(q) * S / den;
        const double q_f = alpha_w(q) * Q / den;
        const bool stays =
            q_f * q_f > opts.snr_min * s_f && alpha_w(q) < opts.alpha_cap;
        if (stays) {
          keep.push_back(work[q]);
        } else {
          state.active[work[q]] = false;
          state.alpha(work[q]) = opts.alpha_cap;
          state.mu(work[q]) = 0.0;
          pruned = true;
        }
      }
      if (pruned) {
        work = keep;
        if (work.empty()) {
          converged = true;
          ++iter;
          break;
        }
        subset(work, gram_w, gy_w, alpha_w);
      }
    }

    if (iter >= opts.prune_burn_in && !pruned && rel_change < opts.tol) {
      converged = true;
      ++iter;
      break;
    }
  }
  if (work.empty() && !converged) converged = true;

  if (!work.empty()) {
    post = gram_posterior(gram_w, gy_w, yy, alpha_w, state.beta);
    for (std::size_t q = 0; q < work.size(); ++q) {
      const int j = work[q];
      state.alpha(j) = alpha_w(q);
      state.mu(j) = post.mu(q);
      for (std::size_t r = 0; r < work.size(); ++r)
        state.sigma(j, work[r]) = post.sigma(q, r);
    }
  }

  if (diag != nullptr) {
    diag->iterations = iter;
    diag->converged = converged;
    diag->em_fallbacks = em_fallbacks;
  }
  return state;
}

}  // namespace pded
