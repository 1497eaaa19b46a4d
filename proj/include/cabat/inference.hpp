#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "cabat/model_spec.hpp"
#include "cabat/spline_basis.hpp"

namespace cabat {

struct ConvergenceDiagnostic {
  std::vector<double> rhat;  // per reported parameter
  double max_rhat = 1.0;
  int divergences = 0;
  double mean_accept = 0.0;
  bool converged = true;  // max_rhat <= limit
};

// Joint posterior draws on the reported (constrained, uncentered) scale,
// stacked chain-major: rows [0, kept) are chain 0, then chain 1, ...
struct ParameterDraws {
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // S x P
  int chains = 0;
  int kept_per_chain = 0;

  int idx_intercept = -1;
  int idx_phi = -1;
  std::vector<int> idx_beta;
  std::vector<int> idx_omega;
  int idx_sigma = -1;
  int idx_psi0 = -1;
  int n_psi = 0;

  int S() const { return static_cast<int>(values.rows()); }
};

struct FittedModel {
  ModelSpec spec;
  ParameterDraws draws;
  ConvergenceDiagnostic diag;
  std::optional<SplineBasis> basis;  // tte only
  PriorPlan priors;
};

// Gelman-Rubin potential scale reduction over whole chains, using
// var_plus = W + B/n so that identical chains give exactly 1.
double gelman_rubin(const Eigen::MatrixXd& draws, int chains,
                    int kept_per_chain, int column);

// MCMC fit of one adjustment model.  Continuous: Gaussian linear regression.
// Binary: logistic regression.  TTE: M-spline proportional hazards with a
// simplex-constrained baseline.  Draws are translated back to the uncentered
// parameterization.  Non-convergence (max R-hat above the limit) flags the
// fit; it does not throw.
FittedModel fit(const TrialDataset& data, const ModelSpec& spec,
                const SamplerConfig& cfg, std::uint64_t seed);

}  // namespace cabat
