#include "cabat/inference.hpp"

#include <cmath>

#include "cabat/posteriors.hpp"

namespace cabat {

double gelman_rubin(const Eigen::MatrixXd& draws, int chains,
                    int kept_per_chain, int column) {
  if (chains < 2 || kept_per_chain < 2) return 1.0;
  const double n = static_cast<double>(kept_per_chain);
  const double m = static_cast<double>(chains);
  double grand = 0.0;
  std::vector<double> chain_mean(chains, 0.0);
  std::vector<double> chain_var(chains, 0.0);
  for (int c = 0; c < chains; ++c) {
    double s = 0.0;
    for (int i = 0; i < kept_per_chain; ++i) {
      s += draws(c * kept_per_chain + i, column);
    }
    chain_mean[c] = s / n;
    grand += chain_mean[c] / m;
  }
  double w = 0.0, b = 0.0;
  for (int c = 0; c < chains; ++c) {
    double ss = 0.0;
    for (int i = 0; i < kept_per_chain; ++i) {
      const double d = draws(c * kept_per_chain + i, column) - chain_mean[c];
      ss += d * d;
    }
    chain_var[c] = ss / (n - 1.0);
    w += chain_var[c] / m;
    b += (chain_mean[c] - grand) * (chain_mean[c] - grand);
  }
  b *= n / (m - 1.0);
  if (w <= 0.0) return 1.0;  // degenerate chains
  return std::sqrt(1.0 + b / (n * w));
}

FittedModel fit(const TrialDataset& data, const ModelSpec& spec,
                const SamplerConfig& cfg, std::uint64_t seed) {
  if (data.n() == 0) throw FitError("fit: empty dataset");
  if (data.n() < 2) throw FitError("fit: needs at least 2 observations");
  if (data.endpoint != spec.endpoint) {
    throw FitError("fit: dataset endpoint does not match the model");
  }
  spec.validate();

  FittedModel out;
  out.spec = spec;
  out.priors = autoscale_priors(data, spec, cfg);

  const Eigen::MatrixXd design = build_design(data, spec);
  RegressionData reg = make_regression_data(design, out.priors);
  const Eigen::VectorXd col_mean = reg.col_mean;
  const int p = static_cast<int>(design.cols());

  std::unique_ptr<PosteriorTarget> target;
  switch (spec.endpoint) {
    case Endpoint::continuous:
      target = std::make_unique<GaussianPosterior>(
          std::move(reg), data.outcome, out.priors.sigma_rate, cfg.fixed_sigma);
      break;
    case Endpoint::binary:
      for (int i = 0; i < data.outcome.size(); ++i) {
        if (data.outcome(i) != 0.0 && data.outcome(i) != 1.0) {
          throw FitError("fit: binary outcome must be 0/1");
        }
      }
      target = std::make_unique<LogisticPosterior>(std::move(reg), data.outcome);
      break;
    case Endpoint::time_to_event: {
      std::vector<double> events;
      for (int i = 0; i < data.n(); ++i) {
        if (!(data.time(i) > 0.0)) throw FitError("fit: tte times must be > 0");
        if (data.observed[i]) events.push_back(data.time(i));
      }
      if (events.empty()) {
        throw FitError("fit: tte endpoint needs at least one observed event");
      }
      const double upper = data.time.maxCoeff();
      out.basis = SplineBasis::from_event_times(
          events, upper, cfg.spline_degree, cfg.spline_interior_knots);
      target = std::make_unique<MSplineCoxPosterior>(
          std::move(reg), *out.basis, data.time, data.observed,
          cfg.dirichlet_concentration);
      break;
    }
  }

  HmcOptions hopts;
  hopts.warmup = cfg.warmup();
  hopts.kept = cfg.kept_per_chain();
  hopts.target_accept = cfg.target_accept;
  hopts.max_leapfrog = cfg.max_leapfrog;
  hopts.integration_time = cfg.integration_time;

  std::vector<HmcChainResult> chains;
  chains.reserve(cfg.chains);
  for (int c = 0; c < cfg.chains; ++c) {
    Rng rng(derive_stream(seed, 0xC4A1u, static_cast<std::uint64_t>(c)));
    chains.push_back(hmc_chain(*target, rng, hopts));
  }

  // Assemble reported draws: transform to the constrained scale and translate
  // the intercept back to the uncentered parameterization.
  const bool tte = spec.endpoint == Endpoint::time_to_event;
  const bool has_sigma =
      spec.endpoint == Endpoint::continuous && !std::isfinite(cfg.fixed_sigma);
  const int n_psi = tte ? out.basis->size() : 0;

  ParameterDraws& d = out.draws;
  d.chains = cfg.chains;
  d.kept_per_chain = hopts.kept;
  const int S = d.chains * d.kept_per_chain;

  d.names = parameter_names(spec);
  d.idx_intercept = 0;
  d.idx_phi = 1;
  const int n_main = static_cast<int>(spec.main_terms.size());
  const int n_inter = static_cast<int>(spec.interaction_terms.size());
  for (int j = 0; j < n_main; ++j) d.idx_beta.push_back(2 + j);
  for (int j = 0; j < n_inter; ++j) d.idx_omega.push_back(2 + n_main + j);
  int extra = 2 + n_main + n_inter;
  if (has_sigma) {
    d.idx_sigma = extra++;
    d.names.push_back("sigma");
  }
  if (tte) {
    d.idx_psi0 = extra;
    d.n_psi = n_psi;
    for (int l = 0; l < n_psi; ++l) {
      d.names.push_back("psi[" + std::to_string(l + 1) + "]");
    }
    extra += n_psi;
  }
  d.values.resize(S, extra);

  for (int c = 0; c < cfg.chains; ++c) {
    const auto& raw = chains[c].draws;
    for (int i = 0; i < hopts.kept; ++i) {
      const int row = c * hopts.kept + i;
      const double b0c = raw(i, 0);
      double shift = 0.0;
      for (int j = 0; j < p; ++j) shift += col_mean(j) * raw(i, 1 + j);
      d.values(row, 0) = b0c - shift;
      for (int j = 0; j < p; ++j) d.values(row, 1 + j) = raw(i, 1 + j);
      if (has_sigma) d.values(row, d.idx_sigma) = std::exp(raw(i, 1 + p));
      if (tte) {
        const Eigen::VectorXd psi = MSplineCoxPosterior::softmax_anchored(
            raw.row(i).tail(n_psi - 1).transpose());
        for (int l = 0; l < n_psi; ++l) {
          d.values(row, d.idx_psi0 + l) = psi(l);
        }
      }
    }
  }

  ConvergenceDiagnostic& diag = out.diag;
  diag.rhat.resize(extra);
  diag.max_rhat = 1.0;
  for (int j = 0; j < extra; ++j) {
    diag.rhat[j] = gelman_rubin(d.values, d.chains, d.kept_per_chain, j);
    diag.max_rhat = std::max(diag.max_rhat, diag.rhat[j]);
  }
  for (const auto& ch : chains) {
    diag.divergences += ch.divergences;
    diag.mean_accept += ch.mean_accept / cfg.chains;
  }
  diag.converged = diag.max_rhat <= cfg.rhat_limit;
  return out;
}

}  // namespace cabat
