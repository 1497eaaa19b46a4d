#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>

#include "cabat/hmc.hpp"
#include "cabat/model_spec.hpp"
#include "cabat/spline_basis.hpp"

namespace cabat {

// Shared pieces of the three regression posteriors: centered design,
// independent normal priors on the intercept and coefficients.
struct RegressionData {
  Eigen::MatrixXd design_centered;  // n x P
  Eigen::VectorXd col_mean;         // P (for translating the intercept back)
  Eigen::VectorXd coef_loc, coef_scale;
  double intercept_loc = 0.0, intercept_scale = 2.5;
};

RegressionData make_regression_data(const Eigen::MatrixXd& design,
                                    const PriorPlan& plan);

// Gaussian likelihood, identity link; parameters [b0c, b..., log sigma]
// (log sigma omitted when the sd is pinned for testing).
class GaussianPosterior final : public PosteriorTarget {
 public:
  GaussianPosterior(RegressionData reg, Eigen::VectorXd y, double sigma_rate,
                    double fixed_sigma = kNaN);
  int dim() const override;
  double logp_grad(const Eigen::VectorXd& q, Eigen::VectorXd& g) const override;
  Eigen::VectorXd initial_point(Rng& rng) const override;

  bool sigma_fixed() const { return std::isfinite(fixed_sigma_); }

 private:
  RegressionData reg_;
  Eigen::VectorXd y_;
  double sigma_rate_;
  double fixed_sigma_;
};

// Bernoulli likelihood, logit link; parameters [b0c, b...].
class LogisticPosterior final : public PosteriorTarget {
 public:
  LogisticPosterior(RegressionData reg, Eigen::VectorXd y);
  int dim() const override;
  double logp_grad(const Eigen::VectorXd& q, Eigen::VectorXd& g) const override;
  Eigen::VectorXd initial_point(Rng& rng) const override;

 private:
  RegressionData reg_;
  Eigen::VectorXd y_;
};

// M-spline proportional hazards: hazard M(t; psi) * exp(b0c + eta_x), with
// psi on the simplex via an anchored softmax (last logit pinned at zero) and
// a Dirichlet prior plus transform Jacobian.  Parameters
// [b0c, b..., v_1..v_{L-1}].
class MSplineCoxPosterior final : public PosteriorTarget {
 public:
  MSplineCoxPosterior(RegressionData reg, const SplineBasis& basis,
                      const Eigen::VectorXd& time,
                      const std::vector<std::uint8_t>& observed,
                      double dirichlet_conc);
  int dim() const override;
  double logp_grad(const Eigen::VectorXd& q, Eigen::VectorXd& g) const override;
  Eigen::VectorXd initial_point(Rng& rng) const override;

  int n_basis() const { return static_cast<int>(m_basis_.cols()); }
  static Eigen::VectorXd softmax_anchored(const Eigen::VectorXd& v);

 private:
  RegressionData reg_;
  Eigen::MatrixXd m_basis_;  // n x L, M_l(T_i)
  Eigen::MatrixXd i_basis_;  // n x L, I_l(T_i)
  Eigen::VectorXd obs_;      // event indicators as doubles
  double conc_;
};

// Direct-summation log posterior used to cross-check the HMC target; see the
// matching declaration in tests.
double gaussian_prior_logpdf(const RegressionData& reg,
                             const Eigen::VectorXd& q_coef);

}  // namespace cabat
