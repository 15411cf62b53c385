#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pded/data.hpp"
#include "pded/features.hpp"
#include "pded/sbl.hpp"
#include "pded/surrogate.hpp"

namespace pded {

struct TrainConfig {
  int epochs = 20000;
  int precondition_epochs = 0;       // fit-only phase before the constraint
  double lr = 2e-3;
  double adam_beta1 = 0.99;
  double adam_beta2 = 0.99;
  enum class PriorMode { uninformed, dynamic_prior };
  PriorMode prior_mode = PriorMode::dynamic_prior;
  bool grad_through_logdet = true;   // carry d(-log|Sigma|)/dTheta
  std::uint64_t seed = 0;            // network init

  // convergence: active set stable and relative loss change small
  int support_stable_epochs = 5000;
  int loss_window = 1000;
  double loss_rtol = 1e-7;

  double tau_cap = 1e14;
  HyperPriors priors;                // a, b (alpha); e, f (tau); c, d when uninformed
  SolveOptions sbl;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  int phase = 1;                     // 0 = precondition, 1 = constrained
  double l_fit = 0.0;
  double l_reg = 0.0;
  double tau = 0.0;
  double beta = 0.0;
  double loss = 0.0;
  Eigen::VectorXd alpha;             // full library (empty in precondition)
  Eigen::VectorXd mu;
  int active_count = 0;
};

struct TrainHistory {
  std::vector<EpochRecord> records;
  int sbl_warnings = 0;              // divergence fallbacks
};

struct DiscoveryReport {
  std::string experiment;
  std::uint64_t seed = 0;
  std::vector<std::string> term_names;
  std::vector<std::string> active_terms;
  std::vector<double> coefficients;      // posterior mean, full library order
  std::vector<double> coefficient_std;   // sqrt(Sigma_jj)
  std::vector<double> mle_coefficients;  // least squares on the full library
  bool mle_rank_deficient = false;
  double final_tau = 0.0;
  double final_beta = 0.0;
  int completed_epochs = 0;
  int epochs_to_stabilization = -1;
  bool converged = false;
  bool aborted = false;                  // non-finite loss stop
  int sbl_warnings = 0;
  bool success = false;                  // vs ground truth, set by the caller
  std::vector<std::string> ground_truth_support;

  nlohmann::json to_json() const;
};

struct TrainResult {
  SblState state;
  TrainHistory history;
  DiscoveryReport report;
};

// tau_hat = (N + 2e) / (N L_fit + 2f): stationary point of the data loss.
double tau_hat(double l_fit, int n, double e, double f, double cap = 1e14);

// dynamic Gamma prior on beta: c = N/2, d = N / tau_hat.
std::pair<double, double> dynamic_prior(double tau, int n);

struct LossBreakdown {
  double total = 0.0;
  double l_fit = 0.0;
  double l_reg = 0.0;
  double tau = 0.0;
  SblState state;
  SolveDiag sbl_diag;
  bool sbl_fell_back = false;  // inner solve diverged, previous state reused
};

// Forward pipeline of the SBL-constrained PINN loss: jets -> features ->
// type-II solve (outputs treated as constants) -> tau_hat -> assembled loss.
// When grad is non-null it receives d(loss)/d(params), with gradients flowing
// through mu(Theta) and Sigma(Theta) analytically but never through the
// solver's hyperparameter iteration.
LossBreakdown sbl_pinn_loss(const MlpSurrogate& net, const SampledField& data,
                            const LibrarySpec& spec, const TrainConfig& cfg,
                            const SblState* warm_start,
                            std::vector<double>* grad);

TrainResult train(MlpSurrogate& net, const SampledField& data,
                  const LibrarySpec& spec, const TrainConfig& cfg);

}  // namespace pded
