#include "pded/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pded/mlp.hpp"

namespace pded {

void TrainConfig::validate() const {
  if (epochs <= precondition_epochs || precondition_epochs < 0)
    throw std::invalid_argument("TrainConfig: need epochs > precondition_epochs >= 0");
  if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: bad learning rate");
  priors.validate();
}

double tau_hat(double l_fit, int n, double e, double f, double cap) {
  if (l_fit < 0.0) throw std::invalid_argument("tau_hat: negative L_fit");
  const double denom = n * l_fit + 2.0 * f;
  if (denom <= 0.0) return cap;
  return std::min((n + 2.0 * e) / denom, cap);
}

std::pair<double, double> dynamic_prior(double tau, int n) {
  if (!(tau > 0.0)) throw std::invalid_argument("dynamic_prior: tau must be positive");
  return {0.5 * n, n / tau};
}

nlohmann::json DiscoveryReport::to_json() const {
  return {{"experiment", experiment},
          {"seed", seed},
          {"term_names", term_names},
          {"active_terms", active_terms},
          {"coefficients", coefficients},
          {"coefficient_std", coefficient_std},
          {"mle_coefficients", mle_coefficients},
          {"mle_rank_deficient", mle_rank_deficient},
          {"final_tau", final_tau},
          {"final_beta", final_beta},
          {"completed_epochs", completed_epochs},
          {"epochs_to_stabilization", epochs_to_stabilization},
          {"converged", converged},
          {"aborted", aborted},
          {"sbl_warnings", sbl_warnings},
          {"success", success},
          {"ground_truth_support", ground_truth_support}};
}

namespace {

struct ActiveSystem {
  std::vector<int> idx;
  Eigen::MatrixXd theta;
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  Eigen::VectorXd alpha;
  double logdet_sigma = 0.0;
};

// Gather the active columns and (re)compute the closed-form posterior at the
// state's hyperparameters; used both after a successful inner solve and when
// falling back to the previous epoch's (alpha, beta).
ActiveSystem active_system(const FeatureSystem& sys, const SblState& state) {
  ActiveSystem act;
  for (int j = 0; j < sys.cols(); ++j)
    if (state.active[j]) act.idx.push_back(j);
  const int ma = static_cast<int>(act.idx.size());
  if (ma == 0) return act;
  act.theta.resize(sys.rows(), ma);
  act.alpha.resize(ma);
  for (int q = 0; q < ma; ++q) {
    act.theta.col(q) = sys.theta.col(act.idx[q]);
    act.alpha(q) = state.alpha(act.idx[q]);
  }
  const Posterior post = posterior(act.theta, sys.ut, act.alpha, state.beta);
  act.mu = post.mu;
  act.sigma = post.sigma;
  act.logdet_sigma = post.logdet_sigma;
  return act;
}

struct EpochEval {
  LossBreakdown breakdown;
  kernels::JetSoA jets;
  FeatureSystem sys;
};

EpochEval evaluate_constrained(const MlpSurrogate& net, const SampledField& data,
                               const LibrarySpec& spec, const TrainConfig& cfg,
                               const SblState* warm_start,
                               std::vector<double>* grad) {
  if (spec.normalize)
    throw std::invalid_argument("sbl_pinn_loss: normalized libraries carry no gradients");
  const int n = data.size();
  const double nd = n;

  EpochEval ev;
  std::vector<double> xs(data.x.data(), data.x.data() + n);
  std::vector<double> ts(data.t.data(), data.t.data() + n);
  forward_jet_batch(net, xs, ts, spec.max_deriv, ev.jets);

  double l_fit = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = ev.jets.comp(0)[i] - data.u(i);
    l_fit += e * e;
  }
  l_fit /= nd;

  LossBreakdown& out = ev.breakdown;
  if (!std::isfinite(l_fit)) {  // let the caller abort with history intact
    out.l_fit = l_fit;
    out.total = std::numeric_limits<double>::quiet_NaN();
    out.state.alpha = Eigen::VectorXd::Zero(spec.term_count());
    out.state.mu = Eigen::VectorXd::Zero(spec.term_count());
    out.state.sigma = Eigen::MatrixXd::Zero(spec.term_count(), spec.term_count());
    out.state.active.assign(spec.term_count(), false);
    return ev;
  }
  out.l_fit = l_fit;
  out.tau = tau_hat(l_fit, n, cfg.priors.e, cfg.priors.f, cfg.tau_cap);

  HyperPriors priors = cfg.priors;
  if (cfg.prior_mode == TrainConfig::PriorMode::dynamic_prior) {
    const auto [c, d] = dynamic_prior(out.tau, n);
    priors.c = c;
    priors.d = d;
  }

  ev.sys = build_library(ev.jets, spec);

  SolveOptions opts = cfg.sbl;
  opts.warm_start = warm_start;
  try {
    out.state = solve_type2(ev.sys, priors, opts, &out.sbl_diag);
  } catch (const SblDivergence&) {
    if (warm_start == nullptr) throw;
    out.state = *warm_start;
    out.sbl_fell_back = true;
  }

  const ActiveSystem act = active_system(ev.sys, out.state);
  const int ma = static_cast<int>(act.idx.size());

  // propagate the recomputed posterior into the reported state
  out.state.mu.setZero();
  out.state.sigma.setZero();
  for (int q = 0; q < ma; ++q) {
    out.state.mu(act.idx[q]) = act.mu(q);
    for (int r = 0; r < ma; ++r)
      out.state.sigma(act.idx[q], act.idx[r]) = act.sigma(q, r);
  }

  Eigen::VectorXd resid = ev.sys.ut;
  if (ma > 0) resid.noalias() -= act.theta * act.mu;
  out.l_reg = resid.squaredNorm() / nd;

  const double beta = out.state.beta;
  double ridge = 0.0;
  for (int q = 0; q < ma; ++q) ridge += act.alpha(q) * act.mu(q) * act.mu(q);

  out.total = 0.5 * nd * out.tau * (l_fit + (beta / out.tau) * out.l_reg) +
              ridge - (ma > 0 ? act.logdet_sigma : 0.0);

  if (grad != nullptr) {
    if (grad->empty()) grad->assign(net.param_count(), 0.0);
    kernels::JetSoA adj;
    adj.resize(n, spec.max_deriv);

    Eigen::MatrixXd theta_bar = Eigen::MatrixXd::Zero(n, ev.sys.cols());
    Eigen::VectorXd ut_bar = Eigen::VectorXd::Zero(n);
    if (ma > 0) {
      // adjoints of (beta/2)||r||^2 + mu^T A mu - log|Sigma| with
      // mu(Theta), Sigma(Theta) in closed form and (A, beta) frozen
      Eigen::VectorXd mu_bar =
          2.0 * act.alpha.cwiseProduct(act.mu) - beta * act.theta.transpose() * resid;
      Eigen::VectorXd v = beta * act.sigma * mu_bar;
      Eigen::VectorXd theta_v = act.theta * v;
      Eigen::MatrixXd g_active = resid * v.transpose();
      g_active.noalias() -= beta * resid * act.mu.transpose();
      g_active.noalias() -= theta_v * act.mu.transpose();
      if (cfg.grad_through_logdet)
        g_active.noalias() += 2.0 * beta * act.theta * act.sigma;
      for (int q = 0; q < ma; ++q) theta_bar.col(act.idx[q]) = g_active.col(q);
      ut_bar = beta * resid + theta_v;
    } else {
      ut_bar = beta * ev.sys.ut;  // loss (beta/2)||ut||^2 when nothing is active
    }

    accumulate_jet_adjoints(ev.sys, spec, ev.jets, theta_bar, ut_bar, adj);
    for (int i = 0; i < n; ++i)
      adj.comp(0)[i] += out.tau * (ev.jets.comp(0)[i] - data.u(i));

    backprop_jets(net, xs, ts, adj, *grad);
  }
  return ev;
}

}  // namespace

LossBreakdown sbl_pinn_loss(const MlpSurrogate& net, const SampledField& data,
                            const LibrarySpec& spec, const TrainConfig& cfg,
                            const SblState* warm_start,
                            std::vector<double>* grad) {
  return evaluate_constrained(net, data, spec, cfg, warm_start, grad).breakdown;
}

TrainResult train(MlpSurrogate& net, const SampledField& data,
                  const LibrarySpec& spec, const TrainConfig& cfg) {
  cfg.validate();
  net.validate();
  const int n = data.size();

  TrainResult result;
  TrainHistory& hist = result.history;
  hist.records.reserve(cfg.epochs);

  AdamState adam(net.param_count(), cfg.lr, cfg.adam_beta1, cfg.adam_beta2);
  std::vector<double> grad(net.param_count(), 0.0);
  std::vector<double> xs(data.x.data(), data.x.data() + n);
  std::vector<double> ts(data.t.data(), data.t.data() + n);
  std::vector<double> u_hat(n), u_adj(n);

  DiscoveryReport& rep = result.report;
  rep.seed = cfg.seed;
  const int m = spec.term_count();
  {
    FeatureSystem probe;  // names only
    kernels::JetSoA j0;
    j0.resize(1, spec.max_deriv);
    probe = build_library(j0, spec);
    for (const auto& tdesc : probe.terms) rep.term_names.push_back(tdesc.name());
  }

  // precondition: plain mean-squared fit
  bool aborted = false;
  for (int epoch = 0; epoch < cfg.precondition_epochs && !aborted; ++epoch) {
    forward_batch(net, xs, ts, u_hat);
    double l_fit = 0.0;
    for (int i = 0; i < n; ++i) {
      const double e = u_hat[i] - data.u(i);
      l_fit += e * e;
      u_adj[i] = 2.0 * e / n;
    }
    l_fit /= n;
    if (!std::isfinite(l_fit)) {
      aborted = true;
      break;
    }
    std::fill(grad.begin(), grad.end(), 0.0);
    backprop_values(net, xs, ts, u_adj, grad);
    adam_step(adam, net.params, grad);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = 0;
    rec.l_fit = l_fit;
    rec.tau = tau_hat(l_fit, n, cfg.priors.e, cfg.priors.f, cfg.tau_cap);
    rec.loss = l_fit;
    hist.records.push_back(std::move(rec));
  }

  SblState warm;
  bool have_warm = false;
  std::vector<bool> last_active;
  int last_support_change = cfg.precondition_epochs;
  std::vector<double> loss_trace;
  bool converged = false;
  EpochEval ev;

  int epoch = cfg.precondition_epochs;
  for (; epoch < cfg.epochs && !aborted; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    ev = evaluate_constrained(net, data, spec, cfg, have_warm ? &warm : nullptr,
                              &grad);
    LossBreakdown& lb = ev.breakdown;
    if (lb.sbl_fell_back) ++hist.sbl_warnings;

    if (!std::isfinite(lb.total)) {
      aborted = true;
      break;
    }

    adam_step(adam, net.params, grad);

    if (lb.state.active != last_active) {
      last_active = lb.state.active;
      last_support_change = epoch;
    }
    loss_trace.push_back(lb.total);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = 1;
    rec.l_fit = lb.l_fit;
    rec.l_reg = lb.l_reg;
    rec.tau = lb.tau;
    rec.beta = lb.state.beta;
    rec.loss = lb.total;
    rec.alpha = lb.state.alpha;
    rec.mu = lb.state.mu;
    rec.active_count = lb.state.active_count();
    hist.records.push_back(std::move(rec));

    warm = lb.state;
    have_warm = true;

    const int constrained_done = epoch - cfg.precondition_epochs + 1;
    if (epoch - last_support_change >= cfg.support_stable_epochs &&
        constrained_done > cfg.loss_window) {
      const double now = loss_trace.back();
      const double then = loss_trace[loss_trace.size() - 1 - cfg.loss_window];
      const double denom = std::max({std::abs(now), std::abs(then), 1e-300});
      if (std::abs(now - then) / denom < cfg.loss_rtol) {
        converged = true;
        ++epoch;
        break;
      }
    }
  }

  rep.completed_epochs = static_cast<int>(hist.records.size());
  rep.converged = converged;
  rep.aborted = aborted;
  rep.sbl_warnings = hist.sbl_warnings;

  if (have_warm) {
    result.state = warm;
  } else {
    result.state.alpha = Eigen::VectorXd::Constant(m, cfg.sbl.alpha_cap);
    result.state.mu = Eigen::VectorXd::Zero(m);
    result.state.sigma = Eigen::MatrixXd::Zero(m, m);
    result.state.active.assign(m, false);
  }

  rep.coefficients.assign(result.state.mu.data(), result.state.mu.data() + m);
  rep.coefficient_std.resize(m);
  for (int j = 0; j < m; ++j)
    rep.coefficient_std[j] = std::sqrt(std::max(result.state.sigma(j, j), 0.0));
  for (int j = 0; j < m; ++j)
    if (result.state.active[j]) rep.active_terms.push_back(rep.term_names[j]);
  rep.final_beta = result.state.beta;

  // final-epoch diagnostics on the trained network
  if (!aborted) {
    EpochEval fin;
    try {
      fin = evaluate_constrained(net, data, spec, cfg,
                                 have_warm ? &warm : nullptr, nullptr);
      rep.final_tau = fin.breakdown.tau;
      const MleResult mle = mle_coefficients(fin.sys);
      rep.mle_coefficients.assign(mle.xi.data(), mle.xi.data() + m);
      rep.mle_rank_deficient = mle.rank_deficient;
    } catch (const std::exception&) {
      rep.mle_coefficients.assign(m, 0.0);
    }
  } else {
    rep.mle_coefficients.assign(m, 0.0);
  }

  // epoch at which the final active set was last entered
  if (have_warm) rep.epochs_to_stabilization = last_support_change;

  return result;
}

}  // namespace pded
