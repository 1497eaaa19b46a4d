#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "cabat/types.hpp"

namespace cabat {

// M-spline / I-spline basis for the baseline hazard and cumulative baseline
// hazard.  M-splines are evaluated with the stable order recurrence; each
// basis term is nonnegative and integrates to one over its support.
// I-splines are the running integrals, computed exactly by per-span
// Gauss-Legendre quadrature (exact for piecewise polynomials).
//
// Evaluation beyond the upper boundary clamps to the boundary and reports it
// through the `clamped` flag (administrative-censoring times); times below
// the lower boundary are an error.
class SplineBasis {
 public:
  SplineBasis(int degree, std::vector<double> interior_knots, double lower,
              double upper);

  // Cubic basis with interior knots at quantiles of the uncensored event
  // times and boundaries (0, upper).  Knots that collide with each other or
  // with a boundary are dropped.
  static SplineBasis from_event_times(std::span<const double> event_times,
                                      double upper, int degree = 3,
                                      int n_interior = 5);

  int size() const { return basis_count_; }
  int degree() const { return degree_; }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  const std::vector<double>& interior_knots() const { return interior_; }

  Eigen::VectorXd m_eval(double t, bool* clamped = nullptr) const;
  Eigen::VectorXd i_eval(double t, bool* clamped = nullptr) const;

 private:
  int span_index(double t) const;

  int degree_;
  double lower_, upper_;
  std::vector<double> interior_;
  std::vector<double> knots_;  // padded with (degree+1) boundary repeats
  int basis_count_;
  // cum_(l, s) = integral of M_l from lower to the end of non-empty span s
  Eigen::MatrixXd cum_;
  std::vector<double> span_lo_, span_hi_;
};

}  // namespace cabat
