#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cabat/dgm.hpp"
#include "cabat/marginalize.hpp"
#include "cabat/model_spec.hpp"

namespace cabat {

struct InterimSchedule {
  enum class Mode { per_enrollment, per_events };
  Mode mode = Mode::per_enrollment;
  int step = 1;
};

struct DesignSpec {
  double threshold_u = 0.99;  // superiority probability threshold
  double gamma0 = 0.0;        // null boundary: 0 for DM, 1 for RR/HR
  enum class Direction { less, greater };
  Direction direction = Direction::less;
  InterimSchedule schedule;
  int n_max = 0;
  double tte_horizon = 75.0;
  double tte_enroll_cutoff = 50.0;

  void validate(Endpoint endpoint) const;
};

enum class Decision { superior_at_interim, superior_at_final, not_superior };

inline const char* decision_name(Decision d) {
  switch (d) {
    case Decision::superior_at_interim: return "superior_at_interim";
    case Decision::superior_at_final: return "superior_at_final";
    case Decision::not_superior: return "not_superior";
  }
  return "?";
}

struct AnalysisRecord {
  int index = 0;        // 1-based analysis number
  int n_enrolled = 0;
  int events = 0;       // binary / tte
  double calendar_time = kNaN;  // tte analyses
  bool is_final = false;
  double t_stat = kNaN;         // T(D_n)
  double posterior_median = kNaN;
  double max_rhat = kNaN;
  bool converged = true;
  double excluded_frac = 0.0;
  bool valid = true;            // false when the analysis could not be evaluated
  std::string error;
};

struct TrialResult {
  Decision decision = Decision::not_superior;
  int stopped_at_analysis = -1;  // 1-based interim index when stopping early
  int n_enrolled = 0;
  int analyses_run = 0;
  int fit_calls = 0;  // audit: must equal analyses_run
  std::vector<AnalysisRecord> analyses;
  double posterior_median_at_stop = kNaN;
  double rmse_at_stop = kNaN;
  double bias_at_stop = kNaN;
  bool any_nonconverged = false;
  bool any_invalid_analysis = false;

  bool rejected() const { return decision != Decision::not_superior; }
  bool stopped_early() const {
    return decision == Decision::superior_at_interim;
  }
};

// Fraction of finite draws strictly on the alternative side of gamma0.
double posterior_prob_superiority(const MarginalPosterior& mp,
                                  const DesignSpec& design);

// Covariates, treatment, enrollment times and per-effect outcomes for one
// replicate; shared by all adjustment models so comparisons are paired.
struct ReplicateData {
  Eigen::VectorXd treatment;
  Eigen::MatrixXd covariates;
  std::vector<double> enroll_time;             // calendar, sorted (tte)
  std::vector<Eigen::VectorXd> outcome_by_effect;  // y or latent event times
};

ReplicateData generate_replicate_data(const DgmSpec& dgm,
                                      const DesignSpec& design,
                                      std::span<const double> phi_stars,
                                      std::uint64_t replicate_stream);

struct TrialSetup {
  const DgmSpec& dgm;
  const ModelSpec& model;
  const DesignSpec& design;
  const SamplerConfig& sampler;
  double gamma_true = kNaN;  // for rmse/bias at stop
};

// Runs one adaptive trial for one adjustment model on shared replicate data.
// Fit errors at an analysis are recorded on the analysis and the trial
// continues; the replicate never aborts silently.
TrialResult run_trial(const TrialSetup& setup, const ReplicateData& data,
                      int effect_index, std::uint64_t replicate_stream,
                      std::vector<FittedModel>* fits_audit = nullptr);

}  // namespace cabat
