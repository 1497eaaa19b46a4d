#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "cabat/inference.hpp"
#include "cabat/spline_basis.hpp"

namespace cabat {

enum class Estimand { DM, RR, HR };

inline const char* estimand_name(Estimand e) {
  switch (e) {
    case Estimand::DM: return "DM";
    case Estimand::RR: return "RR";
    case Estimand::HR: return "HR";
  }
  return "?";
}

// Posterior draws of a marginal estimand obtained by standardizing the
// conditional draws over the empirical covariate distribution.
struct MarginalPosterior {
  Estimand estimand = Estimand::DM;
  std::vector<double> draws;  // finite draws only
  int total_draws = 0;
  int excluded = 0;           // non-finite draws dropped
  double eval_time = kNaN;    // HR: time from trial start to this analysis
  std::string model_id;
  bool unreliable = false;    // more than 1% of draws excluded

  double excluded_fraction() const {
    return total_draws > 0 ? static_cast<double>(excluded) / total_draws : 0.0;
  }
};

// Difference in means via counterfactual duplication (identity link).  For
// models without treatment interactions this returns the phi draws directly
// (collapsible shortcut).
MarginalPosterior marginal_dm(const FittedModel& fm, const Eigen::MatrixXd& X);

// Relative risk: per draw, mean_i logit^-1(eta(1, x_i)) / mean_i
// logit^-1(eta(0, x_i)); draws with a vanishing denominator are excluded.
MarginalPosterior marginal_rr(const FittedModel& fm, const Eigen::MatrixXd& X);

// Hazard ratio at analysis time t via the cloglog-difference identity on
// covariate-averaged survival probabilities; draws where either average
// survival reaches 0 or 1 are excluded.
MarginalPosterior marginal_hr(const FittedModel& fm, const Eigen::MatrixXd& X,
                              const SplineBasis& basis, double t);

// Endpoint dispatcher; `analysis_time` is only used for the hazard ratio.
MarginalPosterior marginalize(const FittedModel& fm, const Eigen::MatrixXd& X,
                              double analysis_time);

double posterior_median(const std::vector<double>& draws);

}  // namespace cabat
