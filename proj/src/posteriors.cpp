#include "cabat/posteriors.hpp"

#include <cmath>

namespace cabat {

namespace {

// log(1 + exp(x)) without overflow
double log1pexp(double x) {
  if (x > 35.0) return x;
  if (x < -35.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

}  // namespace

RegressionData make_regression_data(const Eigen::MatrixXd& design,
                                    const PriorPlan& plan) {
  RegressionData reg;
  const int p = static_cast<int>(design.cols());
  reg.design_centered = design;
  reg.col_mean.resize(p);
  reg.coef_loc.resize(p);
  reg.coef_scale.resize(p);
  for (int j = 0; j < p; ++j) {
    reg.col_mean(j) = plan.col_mean[j];
    reg.design_centered.col(j).array() -= plan.col_mean[j];
    reg.coef_loc(j) = plan.coef_loc[j];
    reg.coef_scale(j) = plan.coef_scale[j];
  }
  reg.intercept_loc = plan.intercept_loc;
  reg.intercept_scale = plan.intercept_scale;
  return reg;
}

double gaussian_prior_logpdf(const RegressionData& reg,
                             const Eigen::VectorXd& q_coef) {
  // q_coef = [b0c, b...]; drops additive constants
  double lp = 0.0;
  {
    const double z = (q_coef(0) - reg.intercept_loc) / reg.intercept_scale;
    lp -= 0.5 * z * z;
  }
  for (int j = 0; j < reg.coef_loc.size(); ++j) {
    const double z = (q_coef(j + 1) - reg.coef_loc(j)) / reg.coef_scale(j);
    lp -= 0.5 * z * z;
  }
  return lp;
}

namespace {

// prior gradient for [b0c, b...] appended into g
void add_prior_grad(const RegressionData& reg, const Eigen::VectorXd& q,
                    Eigen::VectorXd& g) {
  g(0) -= (q(0) - reg.intercept_loc) /
          (reg.intercept_scale * reg.intercept_scale);
  for (int j = 0; j < reg.coef_loc.size(); ++j) {
    g(j + 1) -= (q(j + 1) - reg.coef_loc(j)) /
                (reg.coef_scale(j) * reg.coef_scale(j));
  }
}

}  // namespace

GaussianPosterior::GaussianPosterior(RegressionData reg, Eigen::VectorXd y,
                                     double sigma_rate, double fixed_sigma)
    : reg_(std::move(reg)), y_(std::move(y)), sigma_rate_(sigma_rate),
      fixed_sigma_(fixed_sigma) {}

int GaussianPosterior::dim() const {
  return 1 + static_cast<int>(reg_.coef_loc.size()) + (sigma_fixed() ? 0 : 1);
}

double GaussianPosterior::logp_grad(const Eigen::VectorXd& q,
                                    Eigen::VectorXd& g) const {
  const int p = static_cast<int>(reg_.coef_loc.size());
  const double n = static_cast<double>(y_.size());
  g.setZero(dim());

  const double sigma = sigma_fixed() ? fixed_sigma_ : std::exp(q(1 + p));
  if (!std::isfinite(sigma) || sigma <= 0.0) return -kInf;

  Eigen::VectorXd eta = reg_.design_centered * q.segment(1, p);
  eta.array() += q(0);
  const Eigen::VectorXd r = y_ - eta;
  const double ssr = r.squaredNorm();
  const double inv2 = 1.0 / (sigma * sigma);

  double lp = -n * std::log(sigma) - 0.5 * ssr * inv2;
  g(0) = r.sum() * inv2;
  g.segment(1, p) = reg_.design_centered.transpose() * r * inv2;

  if (!sigma_fixed()) {
    // sigma ~ Exponential(rate), sampled as log sigma (Jacobian +log sigma)
    lp += -sigma_rate_ * sigma + q(1 + p);
    g(1 + p) = -n + ssr * inv2 - sigma_rate_ * sigma + 1.0;
  }

  lp += gaussian_prior_logpdf(reg_, q);
  add_prior_grad(reg_, q, g);
  return lp;
}

Eigen::VectorXd GaussianPosterior::initial_point(Rng& rng) const {
  const int p = static_cast<int>(reg_.coef_loc.size());
  Eigen::VectorXd q(dim());
  q(0) = reg_.intercept_loc +
         rng.uniform(-1.0, 1.0) * std::min(reg_.intercept_scale, 2.0);
  for (int j = 0; j < p; ++j) {
    q(1 + j) = reg_.coef_loc(j) +
               rng.uniform(-1.0, 1.0) * std::min(reg_.coef_scale(j), 2.0);
  }
  if (!sigma_fixed()) q(1 + p) = -std::log(sigma_rate_) + rng.uniform(-0.5, 0.5);
  return q;
}

LogisticPosterior::LogisticPosterior(RegressionData reg, Eigen::VectorXd y)
    : reg_(std::move(reg)), y_(std::move(y)) {}

int LogisticPosterior::dim() const {
  return 1 + static_cast<int>(reg_.coef_loc.size());
}

double LogisticPosterior::logp_grad(const Eigen::VectorXd& q,
                                    Eigen::VectorXd& g) const {
  const int p = static_cast<int>(reg_.coef_loc.size());
  g.setZero(dim());

  Eigen::VectorXd eta = reg_.design_centered * q.segment(1, p);
  eta.array() += q(0);

  double lp = 0.0;
  Eigen::VectorXd resid(y_.size());
  for (int i = 0; i < y_.size(); ++i) {
    lp += y_(i) * eta(i) - log1pexp(eta(i));
    resid(i) = y_(i) - expit(eta(i));
  }
  g(0) = resid.sum();
  g.segment(1, p) = reg_.design_centered.transpose() * resid;

  lp += gaussian_prior_logpdf(reg_, q);
  add_prior_grad(reg_, q, g);
  return lp;
}

Eigen::VectorXd LogisticPosterior::initial_point(Rng& rng) const {
  const int p = static_cast<int>(reg_.coef_loc.size());
  Eigen::VectorXd q(dim());
  q(0) = reg_.intercept_loc +
         rng.uniform(-1.0, 1.0) * std::min(reg_.intercept_scale, 2.0);
  for (int j = 0; j < p; ++j) {
    q(1 + j) = reg_.coef_loc(j) +
               rng.uniform(-1.0, 1.0) * std::min(reg_.coef_scale(j), 2.0);
  }
  return q;
}

MSplineCoxPosterior::MSplineCoxPosterior(RegressionData reg,
                                         const SplineBasis& basis,
                                         const Eigen::VectorXd& time,
                                         const std::vector<std::uint8_t>& observed,
                                         double dirichlet_conc)
    : reg_(std::move(reg)), conc_(dirichlet_conc) {
  const int n = static_cast<int>(time.size());
  const int L = basis.size();
  m_basis_.resize(n, L);
  i_basis_.resize(n, L);
  obs_.resize(n);
  bool clamped = false;
  for (int i = 0; i < n; ++i) {
    m_basis_.row(i) = basis.m_eval(time(i), &clamped);
    i_basis_.row(i) = basis.i_eval(time(i), &clamped);
    obs_(i) = observed[i] ? 1.0 : 0.0;
  }
}

int MSplineCoxPosterior::dim() const {
  return 1 + static_cast<int>(reg_.coef_loc.size()) + n_basis() - 1;
}

Eigen::VectorXd MSplineCoxPosterior::softmax_anchored(const Eigen::VectorXd& v) {
  const int L = static_cast<int>(v.size()) + 1;
  Eigen::VectorXd psi(L);
  double vmax = 0.0;  // anchored logit
  for (int l = 0; l < L - 1; ++l) vmax = std::max(vmax, v(l));
  double denom = std::exp(-vmax);
  for (int l = 0; l < L - 1; ++l) denom += std::exp(v(l) - vmax);
  for (int l = 0; l < L - 1; ++l) psi(l) = std::exp(v(l) - vmax) / denom;
  psi(L - 1) = std::exp(-vmax) / denom;
  return psi;
}

double MSplineCoxPosterior::logp_grad(const Eigen::VectorXd& q,
                                      Eigen::VectorXd& g) const {
  const int p = static_cast<int>(reg_.coef_loc.size());
  const int L = n_basis();
  g.setZero(dim());

  const Eigen::VectorXd psi = softmax_anchored(q.tail(L - 1));
  for (int l = 0; l < L; ++l) {
    if (!(psi(l) > 0.0)) return -kInf;
  }

  Eigen::VectorXd eta = reg_.design_centered * q.segment(1, p);
  eta.array() += q(0);

  double lp = 0.0;
  Eigen::VectorXd eta_grad(eta.size());
  Eigen::VectorXd psi_grad = Eigen::VectorXd::Zero(L);
  for (int i = 0; i < eta.size(); ++i) {
    if (eta(i) > 690.0) return -kInf;
    const double ee = std::exp(eta(i));
    const double cumhaz = i_basis_.row(i).dot(psi) * ee;
    lp -= cumhaz;
    eta_grad(i) = -cumhaz;
    psi_grad -= ee * i_basis_.row(i).transpose();
    if (obs_(i) != 0.0) {
      const double m = m_basis_.row(i).dot(psi);
      if (!(m > 0.0)) return -kInf;
      lp += std::log(m) + eta(i);
      eta_grad(i) += 1.0;
      psi_grad += m_basis_.row(i).transpose() / m;
    }
  }
  g(0) = eta_grad.sum();
  g.segment(1, p) = reg_.design_centered.transpose() * eta_grad;

  // Dirichlet(conc) density plus softmax Jacobian: sum_l conc * log psi_l
  for (int l = 0; l < L; ++l) {
    lp += conc_ * std::log(psi(l));
    psi_grad(l) += conc_ / psi(l);
  }
  // chain rule to the free logits
  const double dot = psi.dot(psi_grad);
  for (int j = 0; j < L - 1; ++j) {
    g(1 + p + j) = psi(j) * (psi_grad(j) - dot);
  }

  lp += gaussian_prior_logpdf(reg_, q);
  add_prior_grad(reg_, q, g);
  return lp;
}

Eigen::VectorXd MSplineCoxPosterior::initial_point(Rng& rng) const {
  const int p = static_cast<int>(reg_.coef_loc.size());
  const int L = n_basis();
  Eigen::VectorXd q(dim());
  q(0) = rng.uniform(-1.0, 1.0);
  for (int j = 0; j < p; ++j) {
    q(1 + j) = reg_.coef_loc(j) +
               rng.uniform(-1.0, 1.0) * std::min(reg_.coef_scale(j), 2.0);
  }
  for (int j = 0; j < L - 1; ++j) q(1 + p + j) = rng.uniform(-0.5, 0.5);
  return q;
}

}  // namespace cabat
