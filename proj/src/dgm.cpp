#include "cabat/dgm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

namespace cabat {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.70710678118654752440); }

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) * 0.39894228040143267794;
}

// Mean and variance of N(xi, tau^2) restricted to [a, b].
bool truncated_moments(double xi, double tau, double a, double b, double* m,
                       double* v) {
  const double alpha = (a - xi) / tau;
  const double beta = (b - xi) / tau;
  const double z = normal_cdf(beta) - normal_cdf(alpha);
  if (!(z > 1e-300)) return false;
  const double pa = normal_pdf(alpha);
  const double pb = normal_pdf(beta);
  const double ratio = (pa - pb) / z;
  *m = xi + tau * ratio;
  *v = tau * tau * (1.0 + (alpha * pa - beta * pb) / z - ratio * ratio);
  return true;
}

struct SampleStats {
  double mean = 0.0, sd = 0.0;
};

SampleStats moments(const std::vector<double>& x) {
  SampleStats s;
  const double n = static_cast<double>(x.size());
  s.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / (n - 1.0));
  return s;
}

}  // namespace

void TruncNormSpec::validate() const {
  if (!(min < q1 && q1 < q2 && q2 < q3 && q3 < max)) {
    throw ConfigError("truncated normal spec requires min < q1 < q2 < q3 < max");
  }
  if (has_generator() && !(tau > 0)) {
    throw ConfigError("truncated normal generator sd tau must be > 0");
  }
}

void DgmSpec::validate() const {
  switch (endpoint) {
    case Endpoint::continuous:
      if (!(sigma > 0)) throw ConfigError("continuous endpoint requires sigma > 0");
      break;
    case Endpoint::binary:
      if (!(p_ctr > 0 && p_ctr < 1)) {
        throw ConfigError("binary endpoint requires p_ctr in (0,1)");
      }
      break;
    case Endpoint::time_to_event:
      if (!(lambda > 0)) throw ConfigError("tte endpoint requires lambda > 0");
      break;
  }
  const int p = static_cast<int>(covariates.size());
  for (const auto& c : coefficients) {
    if (c.term.column < 0 || c.term.column >= p) {
      throw ConfigError("DGM coefficient references covariate column out of range");
    }
    if (c.term.power != 1 && c.term.power != 2) {
      throw ConfigError("DGM coefficient power must be 1 or 2");
    }
    if (covariates[c.term.column].role != CovariateRole::prognostic &&
        c.value != 0.0) {
      throw ConfigError("non-prognostic covariate '" +
                        covariates[c.term.column].name +
                        "' has a nonzero DGM coefficient");
    }
  }
  for (const auto& cov : covariates) {
    if (cov.kind == CovariateKind::bernoulli &&
        !(cov.bernoulli_p >= 0 && cov.bernoulli_p <= 1)) {
      throw ConfigError("bernoulli covariate '" + cov.name +
                        "' needs p in [0,1]");
    }
    if (cov.kind == CovariateKind::truncated_normal) cov.trunc.validate();
  }
}

int DgmSpec::covariate_index(const std::string& name) const {
  for (std::size_t j = 0; j < covariates.size(); ++j) {
    if (covariates[j].name == name) return static_cast<int>(j);
  }
  throw ConfigError("unknown covariate name '" + name + "'");
}

CovariateDraw generate_covariates(const DgmSpec& spec, int n, Rng& rng) {
  spec.validate();
  if (n < 1) throw ConfigError("generate_covariates requires n >= 1");
  CovariateDraw d;
  const int p = static_cast<int>(spec.covariates.size());
  d.covariates.resize(n, p);
  for (int j = 0; j < p; ++j) {
    const auto& cov = spec.covariates[j];
    switch (cov.kind) {
      case CovariateKind::bernoulli:
        for (int i = 0; i < n; ++i) {
          d.covariates(i, j) = rng.bernoulli(cov.bernoulli_p) ? 1.0 : 0.0;
        }
        break;
      case CovariateKind::standard_normal:
        for (int i = 0; i < n; ++i) d.covariates(i, j) = rng.normal();
        break;
      case CovariateKind::truncated_normal: {
        if (!cov.trunc.has_generator()) {
          throw ConfigError("covariate '" + cov.name +
                            "' lacks (xi, tau); run fit_truncation first");
        }
        const int pool = spec.truncnorm_pool_factor * n;
        auto col = sample_truncated_normal(cov.trunc, pool, rng);
        for (int i = 0; i < n; ++i) d.covariates(i, j) = col[i];
        break;
      }
    }
  }
  d.treatment.resize(n);
  for (int i = 0; i < n; ++i) d.treatment(i) = rng.bernoulli(0.5) ? 1.0 : 0.0;
  return d;
}

std::vector<double> sample_truncated_normal(const TruncNormSpec& spec, int n,
                                            Rng& rng, TruncSampleInfo* info) {
  spec.validate();
  if (!spec.has_generator()) {
    throw ConfigError("sample_truncated_normal requires (xi, tau)");
  }
  if (n < 4) throw ConfigError("sample_truncated_normal requires n >= 4");

  std::vector<double> pool;
  pool.reserve(n);
  for (int i = 0; i < n; ++i) {
    const double x = spec.xi + spec.tau * rng.normal();
    if (x >= spec.min && x <= spec.max) pool.push_back(x);
  }

  const double edges[5] = {spec.min, spec.q1, spec.q2, spec.q3, spec.max};
  std::vector<double> strata[4];
  for (double x : pool) {
    for (int s = 0; s < 4; ++s) {
      if (x >= edges[s] && (x < edges[s + 1] || s == 3)) {
        strata[s].push_back(x);
        break;
      }
    }
  }

  if (info) {
    info->pool_kept = static_cast<int>(pool.size());
    info->with_replacement = false;
  }

  std::vector<double> out;
  out.reserve(n);
  const int base = n / 4;
  const int rem = n % 4;
  for (int s = 0; s < 4; ++s) {
    const int need = base + (s < rem ? 1 : 0);
    auto& st = strata[s];
    if (st.empty()) {
      std::ostringstream msg;
      msg << "stratum " << s + 1 << " [" << edges[s] << ", " << edges[s + 1]
          << "] is empty after rejection; increase the oversample factor";
      throw ResamplingError(msg.str());
    }
    if (static_cast<int>(st.size()) >= need) {
      // partial Fisher-Yates: first `need` entries become a uniform subset
      for (int i = 0; i < need; ++i) {
        const std::size_t j = i + rng.uniform_int(st.size() - i);
        std::swap(st[i], st[j]);
        out.push_back(st[i]);
      }
    } else {
      if (info) info->with_replacement = true;
      for (int i = 0; i < need; ++i) {
        out.push_back(st[rng.uniform_int(st.size())]);
      }
    }
  }
  rng.shuffle(out);
  return out;
}

void stratified_truncnorm_moments(const TruncNormSpec& spec, double xi,
                                  double tau, double* mean, double* sd) {
  const double edges[5] = {spec.min, spec.q1, spec.q2, spec.q3, spec.max};
  double m[4], v[4];
  for (int s = 0; s < 4; ++s) {
    if (!truncated_moments(xi, tau, edges[s], edges[s + 1], &m[s], &v[s])) {
      *mean = kNaN;
      *sd = kNaN;
      return;
    }
  }
  const double mu = (m[0] + m[1] + m[2] + m[3]) / 4.0;
  double var = 0.0;
  for (int s = 0; s < 4; ++s) var += v[s] + (m[s] - mu) * (m[s] - mu);
  *mean = mu;
  *sd = std::sqrt(var / 4.0);
}

TruncFitResult fit_truncation(const TruncNormSpec& targets, Rng& rng,
                              double tol_mean, double tol_sd, int max_iter) {
  targets.validate();
  if (!std::isfinite(targets.mu) || !std::isfinite(targets.sigma)) {
    throw ConfigError("fit_truncation requires target mu and sigma");
  }
  if (!std::isfinite(tol_mean)) tol_mean = 0.02 * targets.sigma;
  if (!std::isfinite(tol_sd)) tol_sd = 0.02 * targets.sigma;

  const auto residual = [&](double xi, double tau, double* m, double* s) {
    stratified_truncnorm_moments(targets, xi, tau, m, s);
    if (!std::isfinite(*m) || !std::isfinite(*s)) {
      return std::numeric_limits<double>::infinity();
    }
    return std::max(std::abs(*m - targets.mu) / tol_mean,
                    std::abs(*s - targets.sigma) / tol_sd);
  };

  double xi = targets.mu, tau = targets.sigma;
  double best_xi = xi, best_tau = tau;
  double best_r = std::numeric_limits<double>::infinity();
  int it = 0;

  // Phase 1: damped moment-matching fixed point.
  for (; it < max_iter / 2; ++it) {
    double m, s;
    const double r = residual(xi, tau, &m, &s);
    if (r < best_r) {
      best_r = r;
      best_xi = xi;
      best_tau = tau;
    }
    if (r <= 1.0) break;
    if (!std::isfinite(r)) {
      tau *= 2.0;
      continue;
    }
    xi += 0.5 * (targets.mu - m);
    tau *= std::sqrt(targets.sigma / s);
  }

  // Phase 2: Nelder-Mead on (xi, log tau) when the fixed point stalls on
  // targets that have no exact joint solution.
  if (best_r > 1.0) {
    using P = std::array<double, 2>;
    auto eval = [&](const P& p) {
      double m, s;
      return residual(p[0], std::exp(p[1]), &m, &s);
    };
    P simplex[3] = {{best_xi, std::log(best_tau)},
                    {best_xi - 2.0 * targets.sigma, std::log(best_tau) + 0.4},
                    {best_xi + 2.0 * targets.sigma, std::log(best_tau) - 0.4}};
    double f[3] = {eval(simplex[0]), eval(simplex[1]), eval(simplex[2])};
    for (; it < max_iter; ++it) {
      int hi = 0, lo = 0;
      for (int k = 1; k < 3; ++k) {
        if (f[k] > f[hi]) hi = k;
        if (f[k] < f[lo]) lo = k;
      }
      if (f[lo] <= 1.0 || std::abs(f[hi] - f[lo]) < 1e-12) break;
      P cen{};
      for (int k = 0; k < 3; ++k) {
        if (k == hi) continue;
        cen[0] += simplex[k][0] / 2.0;
        cen[1] += simplex[k][1] / 2.0;
      }
      P refl{2.0 * cen[0] - simplex[hi][0], 2.0 * cen[1] - simplex[hi][1]};
      double fr = eval(refl);
      if (fr < f[lo]) {
        P exp_{3.0 * cen[0] - 2.0 * simplex[hi][0],
               3.0 * cen[1] - 2.0 * simplex[hi][1]};
        const double fe = eval(exp_);
        simplex[hi] = fe < fr ? exp_ : refl;
        f[hi] = std::min(fe, fr);
      } else if (fr < f[hi]) {
        simplex[hi] = refl;
        f[hi] = fr;
      } else {
        P con{0.5 * (cen[0] + simplex[hi][0]), 0.5 * (cen[1] + simplex[hi][1])};
        const double fc = eval(con);
        if (fc < f[hi]) {
          simplex[hi] = con;
          f[hi] = fc;
        } else {
          for (int k = 0; k < 3; ++k) {
            if (k == lo) continue;
            simplex[k][0] = 0.5 * (simplex[k][0] + simplex[lo][0]);
            simplex[k][1] = 0.5 * (simplex[k][1] + simplex[lo][1]);
            f[k] = eval(simplex[k]);
          }
        }
      }
    }
    int lo = 0;
    for (int k = 1; k < 3; ++k) {
      if (f[k] < f[lo]) lo = k;
    }
    if (f[lo] < best_r) {
      best_r = f[lo];
      best_xi = simplex[lo][0];
      best_tau = std::exp(simplex[lo][1]);
    }
  }

  double m, s;
  stratified_truncnorm_moments(targets, best_xi, best_tau, &m, &s);
  if (best_r > 1.0) {
    std::ostringstream msg;
    msg << "fit_truncation did not converge after " << max_iter
        << " iterations; residuals |mean-target|=" << std::abs(m - targets.mu)
        << " (tol " << tol_mean << "), |sd-target|=" << std::abs(s - targets.sigma)
        << " (tol " << tol_sd << ")";
    throw CalibrationError(msg.str());
  }

  // Monte Carlo verification of the fitted generator.
  TruncNormSpec fitted = targets;
  fitted.xi = best_xi;
  fitted.tau = best_tau;
  auto sample = sample_truncated_normal(fitted, 100000, rng);
  const auto stats = moments(sample);

  TruncFitResult out;
  out.xi = best_xi;
  out.tau = best_tau;
  out.iterations = it;
  out.achieved_mean = stats.mean;
  out.achieved_sd = stats.sd;
  return out;
}

Eigen::VectorXd dgm_linear_predictor(const DgmSpec& spec,
                                     const Eigen::VectorXd& treatment,
                                     const Eigen::MatrixXd& covariates,
                                     double phi_star) {
  const int n = static_cast<int>(treatment.size());
  Eigen::VectorXd xi = Eigen::VectorXd::Constant(n, spec.beta0_star);
  xi += phi_star * treatment;
  for (const auto& c : spec.coefficients) {
    const auto col = covariates.col(c.term.column);
    if (c.term.power == 1) {
      xi += c.value * col;
    } else {
      xi += c.value * col.cwiseProduct(col);
    }
  }
  return xi;
}

Eigen::VectorXd generate_outcomes(const DgmSpec& spec,
                                  const Eigen::VectorXd& treatment,
                                  const Eigen::MatrixXd& covariates,
                                  double phi_star, Rng& rng) {
  spec.validate();
  const Eigen::VectorXd xi =
      dgm_linear_predictor(spec, treatment, covariates, phi_star);
  const int n = static_cast<int>(xi.size());
  Eigen::VectorXd y(n);
  switch (spec.endpoint) {
    case Endpoint::continuous:
      for (int i = 0; i < n; ++i) y(i) = xi(i) + spec.sigma * rng.normal();
      break;
    case Endpoint::binary:
      for (int i = 0; i < n; ++i) {
        y(i) = rng.bernoulli(expit(xi(i))) ? 1.0 : 0.0;
      }
      break;
    case Endpoint::time_to_event:
      for (int i = 0; i < n; ++i) {
        y(i) = tte_inverse_transform(rng.uniform_open(), spec.lambda, xi(i));
      }
      break;
  }
  return y;
}

CalibrationResult calibrate_intercept(const DgmSpec& spec, Rng& rng,
                                      int n_datasets, int n_per) {
  spec.validate();
  if (spec.endpoint != Endpoint::binary) {
    throw ConfigError("calibrate_intercept applies to the binary endpoint only");
  }
  std::vector<double> roots;
  roots.reserve(n_datasets);
  for (int d = 0; d < n_datasets; ++d) {
    const auto draw = generate_covariates(spec, n_per, rng);
    // control-arm linear predictor without intercept and without treatment
    std::vector<double> xb;
    xb.reserve(n_per);
    DgmSpec no_intercept = spec;
    no_intercept.beta0_star = 0.0;
    const Eigen::VectorXd lp = dgm_linear_predictor(
        no_intercept, Eigen::VectorXd::Zero(n_per), draw.covariates, 0.0);
    for (int i = 0; i < n_per; ++i) {
      if (draw.treatment(i) == 0.0) xb.push_back(lp(i));
    }
    const double l = static_cast<double>(xb.size());
    const auto f = [&](double b0) {
      double s = 0.0;
      for (double v : xb) s += expit(b0 + v);
      return s - l * spec.p_ctr;
    };
    double lo = -20.0, hi = 20.0;
    double flo = f(lo), fhi = f(hi);
    if (!(flo < 0.0 && fhi > 0.0)) {
      throw CalibrationError(
          "calibrate_intercept: no sign change on bracket [-20, 20]");
    }
    double root = 0.0;
    for (int iter = 0; iter < 200; ++iter) {
      root = 0.5 * (lo + hi);
      const double fm = f(root);
      if (std::abs(fm) <= 1e-8 || hi - lo < 1e-14) break;
      if (fm < 0.0) {
        lo = root;
      } else {
        hi = root;
      }
    }
    roots.push_back(root);
  }
  const auto stats = moments(roots);
  CalibrationResult out;
  out.beta0_star = stats.mean;
  out.mc_se = stats.sd / std::sqrt(static_cast<double>(n_datasets));
  out.datasets = n_datasets;
  return out;
}

AscertainResult ascertain_marginal_estimand(const DgmSpec& spec,
                                            double phi_star, Rng& rng,
                                            int n_datasets, int n_per,
                                            double horizon) {
  spec.validate();
  AscertainResult out;
  if (spec.endpoint == Endpoint::continuous) {
    // collapsible: the marginal difference in means equals phi*
    out.gamma = phi_star;
    out.mc_se = 0.0;
    return out;
  }
  std::vector<double> values;
  values.reserve(n_datasets);
  for (int d = 0; d < n_datasets; ++d) {
    const auto draw = generate_covariates(spec, n_per, rng);
    const Eigen::VectorXd y =
        generate_outcomes(spec, draw.treatment, draw.covariates, phi_star, rng);
    double n1 = 0, n0 = 0, s1 = 0, s0 = 0;
    for (int i = 0; i < n_per; ++i) {
      const bool trt = draw.treatment(i) == 1.0;
      const double hit = spec.endpoint == Endpoint::binary
                             ? y(i)
                             : (y(i) > horizon ? 1.0 : 0.0);
      if (trt) {
        n1 += 1;
        s1 += hit;
      } else {
        n0 += 1;
        s0 += hit;
      }
    }
    if (n1 == 0 || n0 == 0) {
      ++out.datasets_skipped;
      continue;
    }
    const double r1 = s1 / n1, r0 = s0 / n0;
    if (spec.endpoint == Endpoint::binary) {
      if (r1 <= 0.0 || r0 <= 0.0) {
        ++out.datasets_skipped;
        continue;
      }
      values.push_back(r1 / r0);
    } else {
      // r1/r0 here are survival fractions P(T > horizon | A)
      if (r1 <= 0.0 || r1 >= 1.0 || r0 <= 0.0 || r0 >= 1.0) {
        ++out.datasets_skipped;
        continue;
      }
      values.push_back(std::exp(std::log(-std::log(r1)) - std::log(-std::log(r0))));
    }
  }
  if (values.empty()) {
    throw CalibrationError("ascertain_marginal_estimand: all datasets skipped");
  }
  const auto stats = moments(values);
  out.gamma = stats.mean;
  out.mc_se = stats.sd / std::sqrt(static_cast<double>(values.size()));
  out.datasets_used = static_cast<int>(values.size());
  return out;
}

}  // namespace cabat
