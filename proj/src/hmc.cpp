#include "cabat/hmc.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace cabat {

namespace {

struct DualAveraging {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  double m = 1.0;
  static constexpr double kGamma = 0.05;
  static constexpr double kT0 = 10.0;
  static constexpr double kKappa = 0.75;

  void reset(double eps) {
    mu = std::log(10.0 * eps);
    log_eps = std::log(eps);
    log_eps_bar = 0.0;
    h_bar = 0.0;
    m = 1.0;
  }

  void update(double accept_prob, double target) {
    const double w = 1.0 / (m + kT0);
    h_bar = (1.0 - w) * h_bar + w * (target - accept_prob);
    log_eps = mu - std::sqrt(m) / kGamma * h_bar;
    const double w2 = std::pow(m, -kKappa);
    log_eps_bar = w2 * log_eps + (1.0 - w2) * log_eps_bar;
    m += 1.0;
  }
};

struct Hamiltonian {
  const PosteriorTarget& target;
  const Eigen::VectorXd& inv_mass;

  double kinetic(const Eigen::VectorXd& p) const {
    return 0.5 * (p.array().square() * inv_mass.array()).sum();
  }

  // One leapfrog trajectory; returns false on numerical failure.
  bool leapfrog(Eigen::VectorXd& q, Eigen::VectorXd& p, Eigen::VectorXd& grad,
                double& logp, double eps, int steps) const {
    for (int s = 0; s < steps; ++s) {
      p += (0.5 * eps) * grad;
      q += eps * (inv_mass.array() * p.array()).matrix();
      logp = target.logp_grad(q, grad);
      if (!std::isfinite(logp)) return false;
      p += (0.5 * eps) * grad;
    }
    return true;
  }
};

double find_initial_step(const Hamiltonian& ham, const Eigen::VectorXd& q0,
                         double logp0, Rng& rng) {
  double eps = 0.1;
  Eigen::VectorXd p0(q0.size());
  for (int i = 0; i < p0.size(); ++i) {
    p0(i) = rng.normal() / std::sqrt(ham.inv_mass(i));
  }
  const double h0 = -logp0 + ham.kinetic(p0);

  const auto ratio = [&](double e) {
    Eigen::VectorXd q = q0, p = p0, grad(q0.size());
    double logp = ham.target.logp_grad(q, grad);
    if (!ham.leapfrog(q, p, grad, logp, e, 1)) return -1e30;
    return h0 - (-logp + ham.kinetic(p));  // log acceptance ratio
  };

  const bool grow = ratio(eps) > std::log(0.5);
  for (int iter = 0; iter < 50; ++iter) {
    eps *= grow ? 2.0 : 0.5;
    const double r = ratio(eps);
    if (grow ? r <= std::log(0.5) : r > std::log(0.5)) break;
    if (eps > 1e7 || eps < 1e-10) break;
  }
  return eps;
}

}  // namespace

HmcChainResult hmc_chain(const PosteriorTarget& target, Rng& rng,
                         const HmcOptions& opts) {
  if (opts.warmup < 20 || opts.kept < 1) {
    throw FitError("hmc: warmup must be >= 20 and kept >= 1");
  }
  const int dim = target.dim();
  Eigen::VectorXd q = target.initial_point(rng);
  Eigen::VectorXd grad(dim);
  double logp = target.logp_grad(q, grad);
  for (int tries = 0; tries < 20 && !std::isfinite(logp); ++tries) {
    q = target.initial_point(rng);
    logp = target.logp_grad(q, grad);
  }
  if (!std::isfinite(logp)) {
    std::ostringstream msg;
    msg << "hmc: log posterior not finite at any initial point; last q = [";
    for (int i = 0; i < dim; ++i) msg << (i ? ", " : "") << q(i);
    msg << "]";
    throw FitError(msg.str());
  }

  Eigen::VectorXd inv_mass = Eigen::VectorXd::Ones(dim);
  Hamiltonian ham{target, inv_mass};

  DualAveraging da;
  da.reset(find_initial_step(ham, q, logp, rng));

  // Stan-style warmup windows: step-size-only buffers around expanding
  // variance-estimation windows.
  const int init_buffer = std::min(75, opts.warmup / 4);
  const int term_buffer = std::min(50, opts.warmup / 4);
  int window_end = init_buffer + std::min(25, opts.warmup / 4);
  int window_size = std::min(25, opts.warmup / 4);
  Eigen::VectorXd wsum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd wsum2 = Eigen::VectorXd::Zero(dim);
  int wcount = 0;

  HmcChainResult result;
  result.draws.resize(opts.kept, dim);
  double accept_sum = 0.0;
  int accept_n = 0;

  const int total = opts.warmup + opts.kept;
  Eigen::VectorXd p(dim), q_new(dim), grad_new(dim);

  for (int iter = 0; iter < total; ++iter) {
    const bool warm = iter < opts.warmup;
    const double eps = warm ? std::exp(da.log_eps) : result.step_size;

    for (int i = 0; i < dim; ++i) {
      p(i) = rng.normal() / std::sqrt(inv_mass(i));
    }
    const double h0 = -logp + ham.kinetic(p);

    const int cap = std::max(
        1, std::min(opts.max_leapfrog,
                    static_cast<int>(std::ceil(opts.integration_time / eps))));
    const int steps = 1 + static_cast<int>(rng.uniform_int(cap));

    q_new = q;
    grad_new = grad;
    double logp_new = logp;
    Eigen::VectorXd p_new = p;
    const bool ok = ham.leapfrog(q_new, p_new, grad_new, logp_new, eps, steps);

    double accept = 0.0;
    if (ok) {
      const double h1 = -logp_new + ham.kinetic(p_new);
      const double dh = h1 - h0;
      if (!std::isfinite(dh) || dh > 1000.0) {
        ++result.divergences;
      } else {
        accept = std::min(1.0, std::exp(-dh));
      }
    } else {
      ++result.divergences;
    }

    if (accept > 0.0 && rng.uniform() < accept) {
      q = q_new;
      grad = grad_new;
      logp = logp_new;
    }

    if (warm) {
      da.update(accept, opts.target_accept);
      const bool in_window =
          iter >= init_buffer && iter < opts.warmup - term_buffer;
      if (in_window) {
        wsum += q;
        wsum2 += q.cwiseProduct(q);
        ++wcount;
        if (iter + 1 == window_end) {
          if (wcount > 1) {
            const double n = wcount;
            Eigen::VectorXd var =
                (wsum2 - wsum.cwiseProduct(wsum) / n) / (n - 1.0);
            // shrink toward a small constant as Stan does
            inv_mass = ((n / (n + 5.0)) * var.cwiseMax(1e-10).array() +
                        1e-3 * (5.0 / (n + 5.0)))
                           .matrix();
          }
          wsum.setZero();
          wsum2.setZero();
          wcount = 0;
          window_size *= 2;
          window_end = std::min(window_end + window_size,
                                opts.warmup - term_buffer);
          da.reset(std::exp(da.log_eps));
        }
      }
      if (iter + 1 == opts.warmup) {
        result.step_size = std::exp(da.log_eps_bar);
      }
    } else {
      result.draws.row(iter - opts.warmup) = q;
      accept_sum += accept;
      ++accept_n;
    }
  }

  result.mean_accept = accept_n > 0 ? accept_sum / accept_n : 0.0;
  return result;
}

}  // namespace cabat
