#pragma once

#include <span>
#include <string>
#include <vector>

#include "cabat/marginalize.hpp"
#include "cabat/trial.hpp"

namespace cabat {

struct FractionWithSe {
  double estimate = kNaN;
  double mc_se = kNaN;  // sqrt(p(1-p)/R)
};

struct MeanWithSe {
  double estimate = kNaN;
  double mc_se = kNaN;  // sd/sqrt(R)
};

// Fraction of replicates declaring superiority (at an interim or the final
// analysis); alpha when gamma_true equals the null boundary, power otherwise.
FractionWithSe rejection_rate(std::span<const TrialResult> results);

// Fraction stopping before the final analysis.
FractionWithSe stop_early_rate(std::span<const TrialResult> results);

// Mean enrolled sample size at trial end.
MeanWithSe expected_sample_size(std::span<const TrialResult> results);

// sqrt(mean over draws of (gamma_s - gamma_true)^2): the posterior expected
// squared error loss of one replicate.
double rmse_per_replicate(const MarginalPosterior& mp, double gamma_true);

// Mean over replicates of (posterior median at stop - gamma_true).
MeanWithSe posterior_median_bias(std::span<const TrialResult> results,
                                 double gamma_true);

// Aggregated operating characteristics for one (model, effect) cell.
struct OperatingCharacteristics {
  std::string model;
  double gamma_true = kNaN;
  bool is_null = false;  // gamma_true == gamma0
  int n_replicates = 0;
  int n_failed = 0;
  FractionWithSe rejection;
  FractionWithSe stop_early;
  MeanWithSe expected_n;
  MeanWithSe bias;
  MeanWithSe rmse;
  double nonconverged_frac = 0.0;
  double invalid_analysis_frac = 0.0;
};

OperatingCharacteristics aggregate_opchar(std::span<const TrialResult> results,
                                          const std::string& model,
                                          double gamma_true, double gamma0);

}  // namespace cabat
