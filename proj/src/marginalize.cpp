#include "cabat/marginalize.hpp"

#include <algorithm>
#include <cmath>

#include "cabat/dgm.hpp"

namespace cabat {

namespace {

// Counterfactual row design [1, a, terms(x), a * zterms(x)] for all rows.
Eigen::MatrixXd counterfactual_design(const ModelSpec& spec,
                                      const Eigen::MatrixXd& X, double a) {
  const int n = static_cast<int>(X.rows());
  const Eigen::VectorXd treatment = Eigen::VectorXd::Constant(n, a);
  Eigen::MatrixXd d(n, 2 + spec.main_terms.size() + spec.interaction_terms.size());
  d.col(0).setOnes();
  d.rightCols(d.cols() - 1) = build_design(treatment, X, spec);
  return d;
}

// Draw coefficients ordered as [intercept, phi, beta..., omega...].
Eigen::VectorXd draw_coefficients(const ParameterDraws& pd, int s) {
  const int p = 2 + static_cast<int>(pd.idx_beta.size() + pd.idx_omega.size());
  Eigen::VectorXd theta(p);
  theta(0) = pd.values(s, pd.idx_intercept);
  theta(1) = pd.values(s, pd.idx_phi);
  int j = 2;
  for (int idx : pd.idx_beta) theta(j++) = pd.values(s, idx);
  for (int idx : pd.idx_omega) theta(j++) = pd.values(s, idx);
  return theta;
}

void finalize(MarginalPosterior& mp) {
  mp.unreliable = mp.excluded_fraction() > 0.01;
}

}  // namespace

MarginalPosterior marginal_dm(const FittedModel& fm, const Eigen::MatrixXd& X) {
  if (fm.spec.endpoint != Endpoint::continuous) {
    throw FitError("marginal_dm applies to the continuous endpoint");
  }
  MarginalPosterior mp;
  mp.estimand = Estimand::DM;
  mp.model_id = fm.spec.name;
  const auto& pd = fm.draws;
  mp.total_draws = pd.S();
  mp.draws.reserve(pd.S());

  if (fm.spec.interaction_terms.empty()) {
    // collapsible: the marginal difference in means is the phi draw
    for (int s = 0; s < pd.S(); ++s) {
      mp.draws.push_back(pd.values(s, pd.idx_phi));
    }
    finalize(mp);
    return mp;
  }

  const Eigen::MatrixXd d1 = counterfactual_design(fm.spec, X, 1.0);
  const Eigen::MatrixXd d0 = counterfactual_design(fm.spec, X, 0.0);
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  for (int s = 0; s < pd.S(); ++s) {
    const Eigen::VectorXd theta = draw_coefficients(pd, s);
    const double mean1 = (d1 * theta).sum() * inv_n;
    const double mean0 = (d0 * theta).sum() * inv_n;
    const double v = mean1 - mean0;
    if (std::isfinite(v)) {
      mp.draws.push_back(v);
    } else {
      ++mp.excluded;
    }
  }
  finalize(mp);
  return mp;
}

MarginalPosterior marginal_rr(const FittedModel& fm, const Eigen::MatrixXd& X) {
  if (fm.spec.endpoint != Endpoint::binary) {
    throw FitError("marginal_rr applies to the binary endpoint");
  }
  MarginalPosterior mp;
  mp.estimand = Estimand::RR;
  mp.model_id = fm.spec.name;
  const auto& pd = fm.draws;
  mp.total_draws = pd.S();
  mp.draws.reserve(pd.S());

  const Eigen::MatrixXd d1 = counterfactual_design(fm.spec, X, 1.0);
  const Eigen::MatrixXd d0 = counterfactual_design(fm.spec, X, 0.0);
  const double inv_n = 1.0 / static_cast<double>(X.rows());
  for (int s = 0; s < pd.S(); ++s) {
    const Eigen::VectorXd theta = draw_coefficients(pd, s);
    const Eigen::VectorXd eta1 = d1 * theta;
    const Eigen::VectorXd eta0 = d0 * theta;
    double r1 = 0.0, r0 = 0.0;
    for (int i = 0; i < eta1.size(); ++i) {
      r1 += expit(eta1(i));
      r0 += expit(eta0(i));
    }
    r1 *= inv_n;
    r0 *= inv_n;
    if (r0 < 1e-12 || !std::isfinite(r1) || !std::isfinite(r0)) {
      ++mp.excluded;
      continue;
    }
    mp.draws.push_back(r1 / r0);
  }
  finalize(mp);
  return mp;
}

MarginalPosterior marginal_hr(const FittedModel& fm, const Eigen::MatrixXd& X,
                              const SplineBasis& basis, double t) {
  if (fm.spec.endpoint != Endpoint::time_to_event) {
    throw FitError("marginal_hr applies to the time-to-event endpoint");
  }
  MarginalPosterior mp;
  mp.estimand = Estimand::HR;
  mp.model_id = fm.spec.name;
  mp.eval_time = t;
  const auto& pd = fm.draws;
  mp.total_draws = pd.S();
  mp.draws.reserve(pd.S());

  bool clamped = false;
  const Eigen::VectorXd ibasis = basis.i_eval(t, &clamped);
  const Eigen::MatrixXd d1 = counterfactual_design(fm.spec, X, 1.0);
  const Eigen::MatrixXd d0 = counterfactual_design(fm.spec, X, 0.0);
  const double inv_n = 1.0 / static_cast<double>(X.rows());

  Eigen::VectorXd psi(pd.n_psi);
  for (int s = 0; s < pd.S(); ++s) {
    for (int l = 0; l < pd.n_psi; ++l) psi(l) = pd.values(s, pd.idx_psi0 + l);
    const double cum0 = ibasis.dot(psi);  // baseline cumulative hazard at t
    const Eigen::VectorXd theta = draw_coefficients(pd, s);
    const Eigen::VectorXd eta1 = d1 * theta;
    const Eigen::VectorXd eta0 = d0 * theta;
    double s1 = 0.0, s0 = 0.0;
    for (int i = 0; i < eta1.size(); ++i) {
      s1 += std::exp(-cum0 * std::exp(eta1(i)));
      s0 += std::exp(-cum0 * std::exp(eta0(i)));
    }
    s1 *= inv_n;
    s0 *= inv_n;
    // the cloglog identity is undefined when either survival hits 0 or 1
    if (!(s1 > 0.0) || !(s0 > 0.0) || s1 >= 1.0 || s0 >= 1.0) {
      ++mp.excluded;
      continue;
    }
    const double v =
        std::exp(std::log(-std::log(s1)) - std::log(-std::log(s0)));
    if (!std::isfinite(v)) {
      ++mp.excluded;
      continue;
    }
    mp.draws.push_back(v);
  }
  finalize(mp);
  return mp;
}

MarginalPosterior marginalize(const FittedModel& fm, const Eigen::MatrixXd& X,
                              double analysis_time) {
  switch (fm.spec.endpoint) {
    case Endpoint::continuous:
      return marginal_dm(fm, X);
    case Endpoint::binary:
      return marginal_rr(fm, X);
    case Endpoint::time_to_event:
      return marginal_hr(fm, X, *fm.basis, analysis_time);
  }
  throw FitError("marginalize: unknown endpoint");
}

double posterior_median(const std::vector<double>& draws) {
  if (draws.empty()) return kNaN;
  std::vector<double> v = draws;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    const double lo = *std::max_element(v.begin(), v.begin() + mid);
    m = 0.5 * (m + lo);
  }
  return m;
}

}  // namespace cabat
