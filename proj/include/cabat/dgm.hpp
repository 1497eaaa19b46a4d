#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cabat/rng.hpp"
#include "cabat/types.hpp"

namespace cabat {

// Truncated normal parameterized by post-truncation summary targets.
// (xi, tau) are the pre-truncation generator mean and sd; they may be left
// unset and found by fit_truncation().
struct TruncNormSpec {
  double min = kNaN, max = kNaN;
  double q1 = kNaN, q2 = kNaN, q3 = kNaN;
  double mu = kNaN, sigma = kNaN;
  double xi = kNaN, tau = kNaN;

  bool has_generator() const { return std::isfinite(xi) && std::isfinite(tau); }
  void validate() const;
};

enum class CovariateKind { bernoulli, standard_normal, truncated_normal };

// prognostic: appears in the DGM linear predictor.
// noise: generated but never predictive; eligible for the noise-adjustment model.
// filler: generated only to keep the column layout; never modeled.
enum class CovariateRole { prognostic, noise, filler };

struct CovariateSpec {
  std::string name;
  CovariateKind kind = CovariateKind::standard_normal;
  double bernoulli_p = 0.5;
  TruncNormSpec trunc;
  CovariateRole role = CovariateRole::prognostic;
};

struct DgmCoef {
  Term term;
  double value = 0.0;
};

// Data generating mechanism for one endpoint.
struct DgmSpec {
  Endpoint endpoint = Endpoint::continuous;
  double beta0_star = 0.0;
  std::vector<DgmCoef> coefficients;  // conditional covariate effects
  double p_ctr = kNaN;                // binary: target marginal control event risk
  double lambda = kNaN;               // tte: exponential baseline hazard rate
  double sigma = kNaN;                // continuous: outcome sd
  std::vector<CovariateSpec> covariates;
  int n_max = 0;
  int truncnorm_pool_factor = 250;

  void validate() const;
  int covariate_index(const std::string& name) const;
};

// Analysis-ready dataset handed to the model fitters.
struct TrialDataset {
  Endpoint endpoint = Endpoint::continuous;
  Eigen::VectorXd treatment;           // 0/1
  Eigen::MatrixXd covariates;          // n x p
  Eigen::VectorXd outcome;             // continuous / binary
  Eigen::VectorXd time;                // tte: event-or-censor time (> 0)
  std::vector<std::uint8_t> observed;  // tte: 1 = event observed
  std::vector<double> enroll_time;

  int n() const { return static_cast<int>(treatment.size()); }
};

struct CovariateDraw {
  Eigen::VectorXd treatment;
  Eigen::MatrixXd covariates;
};

struct TruncSampleInfo {
  int pool_kept = 0;
  bool with_replacement = false;
};

struct TruncFitResult {
  double xi = kNaN, tau = kNaN;
  int iterations = 0;
  double achieved_mean = kNaN, achieved_sd = kNaN;  // Monte Carlo verification
};

struct CalibrationResult {
  double beta0_star = kNaN;
  double mc_se = kNaN;
  int datasets = 0;
};

struct AscertainResult {
  double gamma = kNaN;
  double mc_se = kNaN;
  int datasets_used = 0;
  int datasets_skipped = 0;
};

// A ~ Bernoulli(0.5) independent of all covariates (simple randomization);
// covariate columns drawn independently per CovariateSpec.
CovariateDraw generate_covariates(const DgmSpec& spec, int n, Rng& rng);

// Appendix-style stratified resampler: draws a raw pool from N(xi, tau^2),
// rejects values outside [min, max], then resamples n/4 values per quartile
// stratum so the output hits (q1, q2, q3) by construction.
std::vector<double> sample_truncated_normal(const TruncNormSpec& spec, int n,
                                            Rng& rng,
                                            TruncSampleInfo* info = nullptr);

// Analytic post-truncation moments of the stratified sampler (pool -> inf).
void stratified_truncnorm_moments(const TruncNormSpec& spec, double xi,
                                  double tau, double* mean, double* sd);

// Finds (xi, tau) whose stratified output matches the target mean/sd.
// Damped moment-matching first, then a Nelder-Mead refinement when the
// fixed-point iteration alone cannot reach the tolerance.  Default tolerance
// is 0.02*sigma on each moment.
TruncFitResult fit_truncation(const TruncNormSpec& targets, Rng& rng,
                              double tol_mean = kNaN, double tol_sd = kNaN,
                              int max_iter = 400);

// DGM linear predictor xi = beta0* + phi*A + sum_j beta_j* term_j(X).
Eigen::VectorXd dgm_linear_predictor(const DgmSpec& spec,
                                     const Eigen::VectorXd& treatment,
                                     const Eigen::MatrixXd& covariates,
                                     double phi_star);

// Continuous: Normal(xi, sigma^2).  Binary: Bernoulli(logit^-1(xi)).
// TTE: uncensored inverse-transform exponential times (censoring is applied
// by the trial engine).
Eigen::VectorXd generate_outcomes(const DgmSpec& spec,
                                  const Eigen::VectorXd& treatment,
                                  const Eigen::MatrixXd& covariates,
                                  double phi_star, Rng& rng);

// T = -log(u) / (lambda * exp(xi)).
inline double tte_inverse_transform(double u, double lambda, double xi) {
  return -std::log(u) / (lambda * std::exp(xi));
}

// Roots beta0* of sum_ctrl logit^-1(beta0 + x'beta*) = l * p_ctr per dataset
// (bisection on [-20, 20], |f| <= 1e-8), averaged over datasets.
CalibrationResult calibrate_intercept(const DgmSpec& spec, Rng& rng,
                                      int n_datasets = 5000, int n_per = 5000);

// Large-sample Monte Carlo value of the marginal estimand for a given phi*.
// Binary: mean over datasets of the event-fraction ratio.  TTE: mean of the
// cloglog-difference hazard ratio at the horizon.  Continuous short-circuits
// to phi* (collapsible).
AscertainResult ascertain_marginal_estimand(const DgmSpec& spec,
                                            double phi_star, Rng& rng,
                                            int n_datasets = 5000,
                                            int n_per = 5000,
                                            double horizon = 75.0);

inline double expit(double x) {
  if (x >= 0) {
    const double z = std::exp(-x);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(x);
  return z / (1.0 + z);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace cabat
