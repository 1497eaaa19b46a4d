#include "cabat/trial.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cabat/opchar.hpp"

namespace cabat {

namespace {

constexpr std::uint64_t kCovariateTag = 0x10;
constexpr std::uint64_t kOutcomeTag = 0x11;
constexpr std::uint64_t kFitTag = 0x12;

struct AnalysisPoint {
  int n = 0;
  int events = 0;
  double calendar_time = kNaN;
  bool is_final = false;
};

// Interim/final analysis points for instantaneous-outcome endpoints.
std::vector<AnalysisPoint> enrollment_schedule(const DesignSpec& design,
                                               const Eigen::VectorXd& outcome,
                                               Endpoint endpoint) {
  std::vector<AnalysisPoint> points;
  const int n_max = design.n_max;
  if (design.schedule.mode == InterimSchedule::Mode::per_enrollment) {
    for (int n = design.schedule.step; n < n_max; n += design.schedule.step) {
      points.push_back({n, 0, kNaN, false});
    }
  } else {
    // event driven: trigger at the enrollment that brings the count of new
    // events since the last analysis up to the step
    int since_last = 0;
    for (int i = 0; i < n_max - 1; ++i) {
      if (outcome(i) == 1.0) ++since_last;
      if (since_last >= design.schedule.step) {
        points.push_back({i + 1, 0, kNaN, false});
        since_last = 0;
      }
    }
  }
  points.push_back({n_max, 0, kNaN, true});
  if (endpoint == Endpoint::binary) {
    for (auto& pt : points) {
      pt.events = static_cast<int>(outcome.head(pt.n).sum());
    }
  }
  return points;
}

TrialDataset prefix_dataset(const ReplicateData& data, int effect, int n,
                            Endpoint endpoint) {
  TrialDataset ds;
  ds.endpoint = endpoint;
  ds.treatment = data.treatment.head(n);
  ds.covariates = data.covariates.topRows(n);
  ds.outcome = data.outcome_by_effect[effect].head(n);
  ds.enroll_time.assign(data.enroll_time.begin(), data.enroll_time.begin() + n);
  return ds;
}

// At-risk snapshot at calendar time `at`: events observed up to `at`, the
// rest censored at (at - enroll_time).
TrialDataset tte_snapshot(const ReplicateData& data, int effect, double at,
                          int* n_enrolled) {
  const auto& latent = data.outcome_by_effect[effect];
  std::vector<int> rows;
  for (std::size_t i = 0; i < data.enroll_time.size(); ++i) {
    if (data.enroll_time[i] <= at &&
        at - data.enroll_time[i] > 0.0) {  // positive follow-up only
      rows.push_back(static_cast<int>(i));
    }
  }
  *n_enrolled = static_cast<int>(rows.size());

  TrialDataset ds;
  ds.endpoint = Endpoint::time_to_event;
  const int n = static_cast<int>(rows.size());
  ds.treatment.resize(n);
  ds.covariates.resize(n, data.covariates.cols());
  ds.time.resize(n);
  ds.observed.resize(n);
  ds.enroll_time.resize(n);
  for (int k = 0; k < n; ++k) {
    const int i = rows[k];
    ds.treatment(k) = data.treatment(i);
    ds.covariates.row(k) = data.covariates.row(i);
    ds.enroll_time[k] = data.enroll_time[i];
    const double follow_up = at - data.enroll_time[i];
    if (latent(i) <= follow_up) {
      ds.time(k) = latent(i);
      ds.observed[k] = 1;
    } else {
      ds.time(k) = follow_up;
      ds.observed[k] = 0;
    }
  }
  return ds;
}

std::vector<AnalysisPoint> tte_schedule(const DesignSpec& design,
                                        const ReplicateData& data,
                                        int effect) {
  const auto& latent = data.outcome_by_effect[effect];
  std::vector<double> event_times;  // calendar times of events before horizon
  for (std::size_t i = 0; i < data.enroll_time.size(); ++i) {
    const double t = data.enroll_time[i] + latent(i);
    if (t <= design.tte_horizon) event_times.push_back(t);
  }
  std::sort(event_times.begin(), event_times.end());

  std::vector<AnalysisPoint> points;
  int since_last = 0;
  int total = 0;
  for (double t : event_times) {
    ++since_last;
    ++total;
    if (since_last >= design.schedule.step && t < design.tte_horizon) {
      points.push_back({0, total, t, false});
      since_last = 0;
    }
  }
  points.push_back({0, static_cast<int>(event_times.size()),
                    design.tte_horizon, true});
  return points;
}

}  // namespace

void DesignSpec::validate(Endpoint endpoint) const {
  if (!(threshold_u > 0.0 && threshold_u < 1.0)) {
    throw ConfigError("superiority threshold u must lie in (0,1)");
  }
  if (schedule.step < 1) throw ConfigError("interim schedule step must be >= 1");
  if (n_max < 1) throw ConfigError("n_max must be >= 1");
  if (schedule.step > n_max) {
    throw ConfigError("interim schedule step exceeds n_max");
  }
  if (schedule.mode == InterimSchedule::Mode::per_events &&
      endpoint == Endpoint::continuous) {
    throw ConfigError("event-driven schedules need a binary or tte endpoint");
  }
  if (endpoint == Endpoint::time_to_event) {
    if (!(tte_enroll_cutoff > 0.0 && tte_horizon > tte_enroll_cutoff)) {
      throw ConfigError("tte design requires 0 < enroll cutoff < horizon");
    }
    const double expected_gamma0 = 1.0;
    if (gamma0 != expected_gamma0) {
      throw ConfigError("tte null boundary gamma0 must be 1");
    }
  }
  if (endpoint == Endpoint::binary && gamma0 != 1.0) {
    throw ConfigError("binary null boundary gamma0 must be 1");
  }
  if (endpoint == Endpoint::continuous && gamma0 != 0.0) {
    throw ConfigError("continuous null boundary gamma0 must be 0");
  }
}

double posterior_prob_superiority(const MarginalPosterior& mp,
                                  const DesignSpec& design) {
  if (mp.draws.empty()) {
    throw FitError("posterior_prob_superiority: no finite draws");
  }
  std::size_t count = 0;
  if (design.direction == DesignSpec::Direction::less) {
    for (double v : mp.draws) count += v < design.gamma0;
  } else {
    for (double v : mp.draws) count += v > design.gamma0;
  }
  return static_cast<double>(count) / static_cast<double>(mp.draws.size());
}

ReplicateData generate_replicate_data(const DgmSpec& dgm,
                                      const DesignSpec& design,
                                      std::span<const double> phi_stars,
                                      std::uint64_t replicate_stream) {
  ReplicateData data;
  Rng cov_rng(derive_stream(replicate_stream, kCovariateTag));
  auto draw = generate_covariates(dgm, design.n_max, cov_rng);
  data.treatment = std::move(draw.treatment);
  data.covariates = std::move(draw.covariates);

  data.enroll_time.resize(design.n_max);
  if (dgm.endpoint == Endpoint::time_to_event) {
    for (auto& t : data.enroll_time) {
      t = cov_rng.uniform(0.0, design.tte_enroll_cutoff);
    }
    std::sort(data.enroll_time.begin(), data.enroll_time.end());
  } else {
    std::iota(data.enroll_time.begin(), data.enroll_time.end(), 0.0);
  }

  data.outcome_by_effect.reserve(phi_stars.size());
  for (std::size_t e = 0; e < phi_stars.size(); ++e) {
    Rng out_rng(derive_stream(replicate_stream, kOutcomeTag,
                              static_cast<std::uint64_t>(e)));
    data.outcome_by_effect.push_back(generate_outcomes(
        dgm, data.treatment, data.covariates, phi_stars[e], out_rng));
  }
  return data;
}

TrialResult run_trial(const TrialSetup& setup, const ReplicateData& data,
                      int effect_index, std::uint64_t replicate_stream,
                      std::vector<FittedModel>* fits_audit) {
  const Endpoint endpoint = setup.dgm.endpoint;
  setup.design.validate(endpoint);

  const bool tte = endpoint == Endpoint::time_to_event;
  const std::vector<AnalysisPoint> points =
      tte ? tte_schedule(setup.design, data, effect_index)
          : enrollment_schedule(setup.design,
                                data.outcome_by_effect[effect_index], endpoint);

  TrialResult result;
  int interim_count = 0;

  for (std::size_t k = 0; k < points.size(); ++k) {
    const auto& pt = points[k];
    AnalysisRecord rec;
    rec.index = static_cast<int>(k) + 1;
    rec.is_final = pt.is_final;
    rec.events = pt.events;
    rec.calendar_time = pt.calendar_time;

    TrialDataset ds;
    if (tte) {
      int n_enrolled = 0;
      ds = tte_snapshot(data, effect_index, pt.calendar_time, &n_enrolled);
      rec.n_enrolled = n_enrolled;
      int ev = 0;
      for (auto o : ds.observed) ev += o;
      rec.events = ev;
    } else {
      ds = prefix_dataset(data, effect_index, pt.n, endpoint);
      rec.n_enrolled = pt.n;
    }
    if (!pt.is_final) ++interim_count;

    const std::uint64_t fit_seed = derive_stream(
        replicate_stream, kFitTag, static_cast<std::uint64_t>(effect_index),
        static_cast<std::uint64_t>(k));

    double t_stat = kNaN;
    MarginalPosterior mp;
    try {
      ++result.fit_calls;
      FittedModel fm = fit(ds, setup.model, setup.sampler, fit_seed);
      rec.max_rhat = fm.diag.max_rhat;
      rec.converged = fm.diag.converged;
      result.any_nonconverged |= !fm.diag.converged;
      mp = marginalize(fm, ds.covariates,
                       tte ? pt.calendar_time : kNaN);
      rec.excluded_frac = mp.excluded_fraction();
      t_stat = posterior_prob_superiority(mp, setup.design);
      rec.t_stat = t_stat;
      rec.posterior_median = posterior_median(mp.draws);
      if (fits_audit) fits_audit->push_back(std::move(fm));
    } catch (const RuntimeFailure& err) {
      rec.valid = false;
      rec.error = err.what();
      result.any_invalid_analysis = true;
    }

    result.analyses.push_back(rec);
    ++result.analyses_run;
    result.n_enrolled = rec.n_enrolled;

    if (rec.valid && t_stat > setup.design.threshold_u) {
      if (pt.is_final) {
        result.decision = Decision::superior_at_final;
      } else {
        result.decision = Decision::superior_at_interim;
        result.stopped_at_analysis = interim_count;
      }
      result.posterior_median_at_stop = rec.posterior_median;
      result.rmse_at_stop = rmse_per_replicate(mp, setup.gamma_true);
      result.bias_at_stop = rec.posterior_median - setup.gamma_true;
      return result;
    }

    if (pt.is_final) {
      result.decision = Decision::not_superior;
      if (rec.valid) {
        result.posterior_median_at_stop = rec.posterior_median;
        result.rmse_at_stop = rmse_per_replicate(mp, setup.gamma_true);
        result.bias_at_stop = rec.posterior_median - setup.gamma_true;
      }
    }
  }
  return result;
}

}  // namespace cabat
