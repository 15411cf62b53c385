#include <doctest.h>

#include <cmath>

#include "pded/data.hpp"
#include "pded/mlp.hpp"
#include "pded/trainer.hpp"

using namespace pded;

TEST_CASE("tau_hat: closed-form values") {
  CHECK(tau_hat(0.25, 100, 0.0, 0.0) == doctest::Approx(4.0));
  CHECK(tau_hat(0.01, 1000, 1e-6, 1e-6) == doctest::Approx(100.0).epsilon(1e-3));
  CHECK(tau_hat(0.0, 50, 1e-6, 0.0) == 1e14);  // capped
}

TEST_CASE("tau_hat: stationary point of the data loss") {
  // L_data(tau) = 1/2 [tau N L_fit - N log tau] - e log tau + f tau
  const double l_fit = 0.37, e = 0.2, f = 0.1;
  const int n = 64;
  const double tau = tau_hat(l_fit, n, e, f);
  auto l_data = [&](double tv) {
    return 0.5 * (tv * n * l_fit - n * std::log(tv)) - e * std::log(tv) + f * tv;
  };
  const double h = 1e-6 * tau;
  const double slope = (l_data(tau + h) - l_data(tau - h)) / (2 * h);
  CHECK(std::abs(slope) < 1e-8);
}

TEST_CASE("dynamic_prior: direct substitution and self-consistency") {
  const auto [c, d] = dynamic_prior(4.0, 1000);
  CHECK(c == doctest::Approx(500.0));
  CHECK(d == doctest::Approx(250.0));
  // tau ~ (N + 2c)/(2d) returns tau exactly
  CHECK((1000 + 2 * c) / (2 * d) == doctest::Approx(4.0));
}

namespace {

SampledField decay_dataset(int nx, int nt, double noise, std::uint64_t seed) {
  // u(x,t) = f(x) e^{-t} solves u_t = -u exactly for any smooth f
  SampledField f = sample_grid(-2.0, 2.0, nx, 0.0, 2.0, nt);
  for (int i = 0; i < f.size(); ++i)
    f.u(i) = (1.0 + 0.5 * std::sin(1.3 * f.x(i))) * std::exp(-f.t(i));
  add_noise(f, noise, seed);
  return f;
}

}  // namespace

TEST_CASE("sbl_pinn_loss: parameter gradient matches finite differences") {
  // tiny net, 20 samples, hyperparameters frozen through the perturbation
  SampledField data = decay_dataset(5, 4, 0.05, 3);
  MlpSurrogate net(2, 5);
  net.init_xavier(11);
  LibrarySpec spec{2, 2, false};
  TrainConfig cfg;
  cfg.seed = 11;

  std::vector<double> grad;
  LossBreakdown base = sbl_pinn_loss(net, data, spec, cfg, nullptr, &grad);
  REQUIRE(grad.size() == net.param_count());
  REQUIRE(std::isfinite(base.total));
  REQUIRE(base.state.active_count() > 0);

  // freeze (A, beta, tau): recompute the loss analytically at perturbed
  // parameters with the same hyperparameters
  const SblState frozen = base.state;
  auto frozen_loss = [&](const MlpSurrogate& m) {
    const int n = data.size();
    std::vector<double> xs(data.x.data(), data.x.data() + n);
    std::vector<double> ts(data.t.data(), data.t.data() + n);
    kernels::JetSoA jets;
    forward_jet_batch(m, xs, ts, spec.max_deriv, jets);
    double l_fit = 0;
    for (int i = 0; i < n; ++i) {
      const double e = jets.comp(0)[i] - data.u(i);
      l_fit += e * e;
    }
    l_fit /= n;
    FeatureSystem sys = build_library(jets, spec);
    std::vector<int> idx;
    for (int j = 0; j < sys.cols(); ++j)
      if (frozen.active[j]) idx.push_back(j);
    Eigen::MatrixXd th(n, idx.size());
    Eigen::VectorXd al(idx.size());
    for (std::size_t q = 0; q < idx.size(); ++q) {
      th.col(q) = sys.theta.col(idx[q]);
      al(q) = frozen.alpha(idx[q]);
    }
    Posterior post = posterior(th, sys.ut, al, frozen.beta);
    const double l_reg = (sys.ut - th * post.mu).squaredNorm() / n;
    double ridge = 0;
    for (int q = 0; q < static_cast<int>(idx.size()); ++q)
      ridge += al(q) * post.mu(q) * post.mu(q);
    return 0.5 * n * base.tau * (l_fit + frozen.beta / base.tau * l_reg) +
           ridge - post.logdet_sigma;
  };

  CHECK(frozen_loss(net) == doctest::Approx(base.total).epsilon(1e-10));

  MlpSurrogate pert = net;
  const double h = 1e-6;
  int checked = 0;
  for (std::size_t p = 0; p < net.param_count(); p += 3) {
    pert.params = net.params;
    pert.params[p] += h;
    const double up = frozen_loss(pert);
    pert.params[p] -= 2 * h;
    const double dn = frozen_loss(pert);
    const double fd = (up - dn) / (2 * h);
    if (std::abs(fd) < 1e-8) continue;  // ill-conditioned FD, skip
    CHECK(grad[p] == doctest::Approx(fd).epsilon(1e-3));
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("sbl_pinn_loss: Eq-12 style decomposition with frozen terms") {
  SampledField data = decay_dataset(6, 5, 0.0, 4);
  MlpSurrogate net(2, 6);
  net.init_xavier(5);
  LibrarySpec spec{2, 1, false};
  TrainConfig cfg;
  LossBreakdown lb = sbl_pinn_loss(net, data, spec, cfg, nullptr, nullptr);

  // reproduce term-by-term: (N tau/2)[L_fit + (beta/tau) L_reg] + ridge - log|Sigma|
  const int n = data.size();
  double ridge = 0.0;
  for (int j = 0; j < spec.term_count(); ++j)
    if (lb.state.active[j])
      ridge += lb.state.alpha(j) * lb.state.mu(j) * lb.state.mu(j);
  // recover log|Sigma| on the active block
  std::vector<int> idx;
  for (int j = 0; j < spec.term_count(); ++j)
    if (lb.state.active[j]) idx.push_back(j);
  Eigen::MatrixXd sig(idx.size(), idx.size());
  for (std::size_t q = 0; q < idx.size(); ++q)
    for (std::size_t r = 0; r < idx.size(); ++r)
      sig(q, r) = lb.state.sigma(idx[q], idx[r]);
  const double logdet = idx.empty() ? 0.0 : std::log(sig.determinant());
  const double expect = 0.5 * n * lb.tau * (lb.l_fit + lb.state.beta / lb.tau * lb.l_reg) +
                        ridge - logdet;
  CHECK(lb.total == doctest::Approx(expect).epsilon(1e-8));
}

TEST_CASE("train: pure decay recovers u_t = -u") {
  SampledField data = decay_dataset(12, 10, 0.0, 7);
  MlpSurrogate net(2, 10);
  net.init_xavier(1);
  LibrarySpec spec{2, 2, false};
  TrainConfig cfg;
  cfg.epochs = 2500;
  cfg.seed = 1;
  cfg.support_stable_epochs = 800;
  cfg.loss_window = 300;
  TrainResult res = train(net, data, spec, cfg);

  REQUIRE_FALSE(res.report.aborted);
  // active set contains u with coefficient -1 (+-2%); no other terms
  REQUIRE(res.report.active_terms.size() >= 1);
  const int u_col = library_column(spec, 1, 0);
  CHECK(res.state.active[u_col]);
  CHECK(res.state.mu(u_col) == doctest::Approx(-1.0).epsilon(0.02));
  for (int j = 0; j < spec.term_count(); ++j)
    if (j != u_col && res.state.active[j])
      CHECK(std::abs(res.state.mu(j)) < 0.05);

  // history bookkeeping
  CHECK(static_cast<int>(res.history.records.size()) == res.report.completed_epochs);
  CHECK(res.report.epochs_to_stabilization >= 0);
  // envelope property: tau and beta stayed positive and finite
  for (const auto& rec : res.history.records) {
    CHECK(std::isfinite(rec.tau));
    CHECK(rec.tau > 0);
    if (rec.phase == 1) {
      CHECK(std::isfinite(rec.beta));
      CHECK(rec.beta > 0);
    }
  }
}

TEST_CASE("train: frozen-hyperparameter envelope at a converged point") {
  // perturbing (A, beta, tau) by their own update maps changes the loss only
  // through second-order terms; verify the gradient contribution is null by
  // comparing the assembled loss at the fixed point against the re-solved one
  SampledField data = decay_dataset(10, 8, 0.0, 8);
  MlpSurrogate net(2, 8);
  net.init_xavier(2);
  LibrarySpec spec{2, 2, false};
  TrainConfig cfg;
  cfg.epochs = 1200;
  cfg.seed = 2;
  TrainResult res = train(net, data, spec, cfg);
  REQUIRE_FALSE(res.report.aborted);

  LossBreakdown a = sbl_pinn_loss(net, data, spec, cfg, &res.state, nullptr);
  LossBreakdown b = sbl_pinn_loss(net, data, spec, cfg, &a.state, nullptr);
  // the inner solve is a fixed point here: re-running it barely moves the loss
  CHECK(a.total == doctest::Approx(b.total).epsilon(1e-6));
}

TEST_CASE("train: non-finite loss aborts with history intact") {
  SampledField data = decay_dataset(6, 5, 0.0, 9);
  MlpSurrogate net(1, 4);
  net.init_xavier(3);
  net.params[0] = std::numeric_limits<double>::quiet_NaN();
  LibrarySpec spec{1, 1, false};
  TrainConfig cfg;
  cfg.epochs = 50;
  CHECK_THROWS(train(net, data, spec, cfg));
  // NaN parameters are rejected up front by validate(); now poison mid-run
  MlpSurrogate net2(1, 4);
  net2.init_xavier(3);
  TrainConfig cfg2;
  cfg2.epochs = 30;
  cfg2.lr = 1e30;  // guaranteed blow-up
  TrainResult res = train(net2, data, spec, cfg2);
  CHECK(res.report.aborted);
  CHECK(res.report.completed_epochs == static_cast<int>(res.history.records.size()));
}

TEST_CASE("train config validation") {
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.precondition_epochs = 10;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
