#include "cabat/spline_basis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cabat {

namespace {

// 4-point Gauss-Legendre nodes/weights on [-1, 1]; exact through degree 7.
constexpr double kGlNode[4] = {-0.8611363115940526, -0.3399810435848563,
                               0.3399810435848563, 0.8611363115940526};
constexpr double kGlWeight[4] = {0.3478548451374538, 0.6521451548625461,
                                 0.6521451548625461, 0.3478548451374538};

// R type-7 quantile.
double quantile(std::vector<double> sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - std::floor(h)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

SplineBasis::SplineBasis(int degree, std::vector<double> interior_knots,
                         double lower, double upper)
    : degree_(degree), lower_(lower), upper_(upper),
      interior_(std::move(interior_knots)) {
  if (degree_ < 1) throw ConfigError("spline degree must be >= 1");
  if (!(lower_ < upper_)) throw ConfigError("spline boundaries must satisfy lower < upper");
  std::sort(interior_.begin(), interior_.end());
  for (double k : interior_) {
    if (!(k > lower_ && k < upper_)) {
      throw ConfigError("interior knots must lie strictly inside the boundaries");
    }
  }
  const int order = degree_ + 1;
  basis_count_ = static_cast<int>(interior_.size()) + order;
  knots_.assign(order, lower_);
  knots_.insert(knots_.end(), interior_.begin(), interior_.end());
  knots_.insert(knots_.end(), order, upper_);

  // Non-empty spans between consecutive distinct knots in [lower, upper].
  span_lo_.push_back(lower_);
  for (double k : interior_) {
    span_hi_.push_back(k);
    span_lo_.push_back(k);
  }
  span_hi_.push_back(upper_);

  // Precompute exact cumulative integrals of each basis term per span.
  const int n_spans = static_cast<int>(span_lo_.size());
  cum_.setZero(basis_count_, n_spans);
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(basis_count_);
  for (int s = 0; s < n_spans; ++s) {
    const double a = span_lo_[s], b = span_hi_[s];
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    for (int g = 0; g < 4; ++g) {
      acc += (half * kGlWeight[g]) * m_eval(mid + half * kGlNode[g]);
    }
    cum_.col(s) = acc;
  }
}

SplineBasis SplineBasis::from_event_times(std::span<const double> event_times,
                                          double upper, int degree,
                                          int n_interior) {
  if (event_times.empty()) {
    throw FitError("spline basis needs at least one observed event time");
  }
  std::vector<double> sorted(event_times.begin(), event_times.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> knots;
  for (int k = 1; k <= n_interior; ++k) {
    const double q =
        quantile(sorted, static_cast<double>(k) / (n_interior + 1.0));
    if (q > 0.0 && q < upper) knots.push_back(q);
  }
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());
  return SplineBasis(degree, std::move(knots), 0.0, upper);
}

int SplineBasis::span_index(double t) const {
  // index into span_lo_/span_hi_; t == upper maps to the last span
  const auto it = std::upper_bound(span_hi_.begin(), span_hi_.end(), t);
  const int idx = static_cast<int>(it - span_hi_.begin());
  return std::min(idx, static_cast<int>(span_hi_.size()) - 1);
}

Eigen::VectorXd SplineBasis::m_eval(double t, bool* clamped) const {
  if (clamped) *clamped = false;
  if (t > upper_) {
    if (clamped) {
      *clamped = true;
      t = upper_;
    } else {
      throw std::domain_error("m_spline time above the upper boundary");
    }
  }
  if (t < lower_) throw std::domain_error("m_spline time below the lower boundary");

  const int order = degree_ + 1;
  const int n_padded = static_cast<int>(knots_.size());
  // locate the padded-knot interval containing t (treat t == upper as the
  // limit from the left so boundary evaluation stays inside the last span)
  int j = order - 1;
  while (j < n_padded - order - 1 && t >= knots_[j + 1]) ++j;

  // order-1 M-splines: indicator / span width
  std::vector<double> work(n_padded - 1, 0.0);
  const double w = knots_[j + 1] - knots_[j];
  work[j] = 1.0 / w;

  // raise order: M_l^m = m[(t-k_l)M_l^{m-1} + (k_{l+m}-t)M_{l+1}^{m-1}] /
  //                      [(m-1)(k_{l+m}-k_l)]
  for (int m = 2; m <= order; ++m) {
    const int count = n_padded - m;
    for (int l = 0; l < count; ++l) {
      const double denom = knots_[l + m] - knots_[l];
      if (denom <= 0.0) {
        work[l] = 0.0;
        continue;
      }
      const double left = (t - knots_[l]) * work[l];
      const double right = (knots_[l + m] - t) * work[l + 1];
      work[l] = m * (left + right) / ((m - 1) * denom);
    }
  }

  Eigen::VectorXd out(basis_count_);
  for (int l = 0; l < basis_count_; ++l) out(l) = work[l];
  return out;
}

Eigen::VectorXd SplineBasis::i_eval(double t, bool* clamped) const {
  if (clamped) *clamped = false;
  if (t > upper_) {
    if (clamped) {
      *clamped = true;
      t = upper_;
    } else {
      throw std::domain_error("i_spline time above the upper boundary");
    }
  }
  if (t < lower_) throw std::domain_error("i_spline time below the lower boundary");

  const int s = span_index(t);
  Eigen::VectorXd out =
      s > 0 ? Eigen::VectorXd(cum_.col(s - 1)) : Eigen::VectorXd::Zero(basis_count_);
  const double a = span_lo_[s];
  if (t > a) {
    const double half = 0.5 * (t - a), mid = 0.5 * (a + t);
    for (int g = 0; g < 4; ++g) {
      out += (half * kGlWeight[g]) * m_eval(mid + half * kGlNode[g]);
    }
  }
  return out;
}

}  // namespace cabat
