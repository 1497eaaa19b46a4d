#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cabat/dgm.hpp"
#include "cabat/types.hpp"

namespace cabat {

enum class PriorStrength { defaulted, centered, centered_strong };

struct SamplerConfig {
  int chains = 3;
  int iterations = 2000;  // per chain; first half is warmup
  double target_accept = 0.8;
  int max_leapfrog = 32;
  double integration_time = 1.2;
  double dirichlet_concentration = 1.0;
  int spline_degree = 3;
  int spline_interior_knots = 5;
  double rhat_limit = 1.05;
  // test hooks
  double fixed_sigma = kNaN;            // pin the Gaussian sd when finite
  double prior_scale_multiplier = 1.0;  // inflate prior scales (flat limit)

  int warmup() const { return iterations / 2; }
  int kept_per_chain() const { return iterations - warmup(); }
};

// One adjustment model: linear predictor terms over dataset columns plus the
// prior strength; the treatment indicator and (for continuous/binary) an
// intercept are always included.  TTE models carry the intercept as the log
// scale of the baseline hazard alongside the simplex spline weights.
struct ModelSpec {
  std::string name;
  Endpoint endpoint = Endpoint::continuous;
  std::vector<Term> main_terms;
  std::vector<Term> interaction_terms;  // Z (treatment interactions)
  std::vector<std::string> term_names;
  std::vector<std::string> interaction_names;
  PriorStrength strength = PriorStrength::defaulted;
  std::vector<double> prior_centers;  // per main term, centered variants only

  bool unadjusted() const {
    return main_terms.empty() && interaction_terms.empty();
  }
  void validate() const;
};

// Expands one of the named adjustment models against a DGM:
//   correct            - the DGM's own terms
//   no_quad            - correct minus squared terms
//   correct_noise      - correct plus all noise covariates
//   correct_prior      - correct, priors centered at the DGM coefficients
//   correct_strong_prior - centered and rescaled to be more informative
//   unadjusted         - treatment indicator only
ModelSpec resolve_model(const std::string& preset, const DgmSpec& dgm);

// Per-fit prior plan with rstanarm-style autoscaling.
struct PriorPlan {
  double ybar = 0.0, sy = 1.0;
  double intercept_loc = 0.0, intercept_scale = 2.5;
  std::vector<double> coef_loc;    // [phi, betas..., omegas...]
  std::vector<double> coef_scale;
  double sigma_rate = 1.0;         // continuous auxiliary prior
  double dirichlet_conc = 1.0;     // tte simplex prior
  std::vector<double> col_mean;    // design-column centering constants
  std::vector<double> col_sd;
  bool constant_column = false;
};

// Design matrix [A, main terms..., A * interaction terms...] (no intercept).
Eigen::MatrixXd build_design(const TrialDataset& data, const ModelSpec& spec);
Eigen::MatrixXd build_design(const Eigen::VectorXd& treatment,
                             const Eigen::MatrixXd& covariates,
                             const ModelSpec& spec);

// Coefficient scales 2.5*sy/sx (sy/sx for the strong variant); intercept
// prior Normal(ybar, 2.5*sy) applied after centering; binary and tte use
// ybar = 0, sy = 1; sigma rate 1/sy.
PriorPlan autoscale_priors(const TrialDataset& data, const ModelSpec& spec,
                           const SamplerConfig& cfg = {});

std::vector<std::string> parameter_names(const ModelSpec& spec);

}  // namespace cabat
