#pragma once

#include <Eigen/Dense>

#include "cabat/rng.hpp"
#include "cabat/types.hpp"

namespace cabat {

// Unnormalized log posterior with gradient, over an unconstrained space.
class PosteriorTarget {
 public:
  virtual ~PosteriorTarget() = default;
  virtual int dim() const = 0;
  // Returns log density at q and fills grad (same length as q); may return
  // -inf for out-of-support points.
  virtual double logp_grad(const Eigen::VectorXd& q,
                           Eigen::VectorXd& grad) const = 0;
  virtual Eigen::VectorXd initial_point(Rng& rng) const = 0;
};

struct HmcOptions {
  int warmup = 1000;
  int kept = 1000;
  double target_accept = 0.8;
  int max_leapfrog = 32;
  double integration_time = 1.2;
};

struct HmcChainResult {
  Eigen::MatrixXd draws;  // kept x dim, unconstrained scale
  int divergences = 0;
  double mean_accept = 0.0;
  double step_size = 0.0;
};

// One HMC chain: dual-averaging step size adaptation toward target_accept,
// diagonal mass matrix estimated over expanding warmup windows, jittered
// leapfrog path lengths.
HmcChainResult hmc_chain(const PosteriorTarget& target, Rng& rng,
                         const HmcOptions& opts);

}  // namespace cabat
