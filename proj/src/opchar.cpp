#include "cabat/opchar.hpp"

#include <cmath>

namespace cabat {

namespace {

FractionWithSe fraction(double count, double total) {
  FractionWithSe f;
  if (total <= 0) return f;
  f.estimate = count / total;
  f.mc_se = std::sqrt(f.estimate * (1.0 - f.estimate) / total);
  return f;
}

class MeanAccumulator {
 public:
  void add(double v) {
    if (!std::isfinite(v)) return;
    ++n_;
    sum_ += v;
    sum2_ += v * v;
  }
  MeanWithSe result() const {
    MeanWithSe m;
    if (n_ == 0) return m;
    m.estimate = sum_ / n_;
    if (n_ > 1) {
      const double var = (sum2_ - sum_ * sum_ / n_) / (n_ - 1.0);
      m.mc_se = std::sqrt(std::max(var, 0.0) / n_);
    }
    return m;
  }

 private:
  double n_ = 0, sum_ = 0, sum2_ = 0;
};

}  // namespace

FractionWithSe rejection_rate(std::span<const TrialResult> results) {
  if (results.empty()) throw RuntimeFailure("rejection_rate: no replicates");
  double c = 0;
  for (const auto& r : results) c += r.rejected();
  return fraction(c, static_cast<double>(results.size()));
}

FractionWithSe stop_early_rate(std::span<const TrialResult> results) {
  if (results.empty()) throw RuntimeFailure("stop_early_rate: no replicates");
  double c = 0;
  for (const auto& r : results) c += r.stopped_early();
  return fraction(c, static_cast<double>(results.size()));
}

MeanWithSe expected_sample_size(std::span<const TrialResult> results) {
  if (results.empty()) throw RuntimeFailure("expected_sample_size: no replicates");
  MeanAccumulator acc;
  for (const auto& r : results) acc.add(static_cast<double>(r.n_enrolled));
  return acc.result();
}

double rmse_per_replicate(const MarginalPosterior& mp, double gamma_true) {
  if (mp.draws.empty()) return kNaN;
  double ss = 0.0;
  for (double v : mp.draws) ss += (v - gamma_true) * (v - gamma_true);
  return std::sqrt(ss / static_cast<double>(mp.draws.size()));
}

MeanWithSe posterior_median_bias(std::span<const TrialResult> results,
                                 double gamma_true) {
  MeanAccumulator acc;
  for (const auto& r : results) {
    acc.add(r.posterior_median_at_stop - gamma_true);
  }
  return acc.result();
}

OperatingCharacteristics aggregate_opchar(std::span<const TrialResult> results,
                                          const std::string& model,
                                          double gamma_true, double gamma0) {
  OperatingCharacteristics oc;
  oc.model = model;
  oc.gamma_true = gamma_true;
  oc.is_null = gamma_true == gamma0;
  oc.n_replicates = static_cast<int>(results.size());
  oc.rejection = rejection_rate(results);
  oc.stop_early = stop_early_rate(results);
  oc.expected_n = expected_sample_size(results);
  oc.bias = posterior_median_bias(results, gamma_true);
  MeanAccumulator rmse;
  double nc = 0, invalid = 0;
  for (const auto& r : results) {
    rmse.add(r.rmse_at_stop);
    nc += r.any_nonconverged;
    invalid += r.any_invalid_analysis;
  }
  oc.rmse = rmse.result();
  oc.nonconverged_frac = nc / oc.n_replicates;
  oc.invalid_analysis_frac = invalid / oc.n_replicates;
  return oc;
}

}  // namespace cabat
