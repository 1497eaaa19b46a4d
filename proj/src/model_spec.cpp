#include "cabat/model_spec.hpp"

#include <algorithm>
#include <cmath>

namespace cabat {

void ModelSpec::validate() const {
  if (term_names.size() != main_terms.size()) {
    throw ConfigError("model '" + name + "': term_names mismatch");
  }
  if (!prior_centers.empty() && prior_centers.size() != main_terms.size()) {
    throw ConfigError("model '" + name + "': prior_centers mismatch");
  }
  for (const auto& z : interaction_terms) {
    const bool in_main =
        std::any_of(main_terms.begin(), main_terms.end(),
                    [&](const Term& t) { return t == z; });
    if (!in_main) {
      throw ConfigError("model '" + name +
                        "': interaction terms must be a subset of main terms");
    }
  }
}

namespace {

std::string term_label(const DgmSpec& dgm, const Term& t) {
  const auto& nm = dgm.covariates[t.column].name;
  return t.power == 2 ? nm + "^2" : nm;
}

}  // namespace

ModelSpec resolve_model(const std::string& preset, const DgmSpec& dgm) {
  ModelSpec m;
  m.name = preset;
  m.endpoint = dgm.endpoint;

  const auto add_dgm_terms = [&](bool keep_quadratic) {
    for (const auto& c : dgm.coefficients) {
      if (!keep_quadratic && c.term.power != 1) continue;
      m.main_terms.push_back(c.term);
      m.term_names.push_back(term_label(dgm, c.term));
      m.prior_centers.push_back(c.value);
    }
  };

  if (preset == "correct") {
    add_dgm_terms(true);
  } else if (preset == "no_quad") {
    add_dgm_terms(false);
  } else if (preset == "correct_noise") {
    add_dgm_terms(true);
    for (std::size_t j = 0; j < dgm.covariates.size(); ++j) {
      if (dgm.covariates[j].role == CovariateRole::noise) {
        m.main_terms.push_back({static_cast<int>(j), 1});
        m.term_names.push_back(dgm.covariates[j].name);
        m.prior_centers.push_back(0.0);
      }
    }
  } else if (preset == "correct_prior") {
    add_dgm_terms(true);
    m.strength = PriorStrength::centered;
  } else if (preset == "correct_strong_prior") {
    add_dgm_terms(true);
    m.strength = PriorStrength::centered_strong;
  } else if (preset == "unadjusted") {
    // treatment indicator only
  } else {
    throw ConfigError("unknown adjustment model '" + preset + "'");
  }
  if (m.strength == PriorStrength::defaulted) {
    m.prior_centers.assign(m.main_terms.size(), 0.0);
  }
  m.validate();
  return m;
}

Eigen::MatrixXd build_design(const Eigen::VectorXd& treatment,
                             const Eigen::MatrixXd& covariates,
                             const ModelSpec& spec) {
  const int n = static_cast<int>(treatment.size());
  const int p = 1 + static_cast<int>(spec.main_terms.size()) +
                static_cast<int>(spec.interaction_terms.size());
  Eigen::MatrixXd w(n, p);
  w.col(0) = treatment;
  int j = 1;
  for (const auto& t : spec.main_terms) {
    const auto col = covariates.col(t.column);
    w.col(j++) = t.power == 2 ? col.cwiseProduct(col).eval() : col.eval();
  }
  for (const auto& t : spec.interaction_terms) {
    const auto col = covariates.col(t.column);
    const Eigen::VectorXd v =
        t.power == 2 ? col.cwiseProduct(col).eval() : col.eval();
    w.col(j++) = v.cwiseProduct(treatment);
  }
  return w;
}

Eigen::MatrixXd build_design(const TrialDataset& data, const ModelSpec& spec) {
  return build_design(data.treatment, data.covariates, spec);
}

PriorPlan autoscale_priors(const TrialDataset& data, const ModelSpec& spec,
                           const SamplerConfig& cfg) {
  if (data.n() < 2) throw FitError("autoscale_priors needs at least 2 observations");
  spec.validate();

  PriorPlan plan;
  if (spec.endpoint == Endpoint::continuous) {
    const double n = data.outcome.size();
    plan.ybar = data.outcome.mean();
    const double ss = (data.outcome.array() - plan.ybar).square().sum();
    plan.sy = std::sqrt(ss / (n - 1.0));
    if (!(plan.sy > 1e-12)) {
      plan.sy = 1.0;
      plan.constant_column = true;
    }
  } else {
    plan.ybar = 0.0;
    plan.sy = 1.0;
  }

  const Eigen::MatrixXd w = build_design(data, spec);
  const int p = static_cast<int>(w.cols());
  plan.col_mean.resize(p);
  plan.col_sd.resize(p);
  plan.coef_loc.resize(p);
  plan.coef_scale.resize(p);

  const double strong =
      spec.strength == PriorStrength::centered_strong ? 1.0 : 2.5;
  const int n_main = static_cast<int>(spec.main_terms.size());

  for (int j = 0; j < p; ++j) {
    const double mean = w.col(j).mean();
    double sd = std::sqrt((w.col(j).array() - mean).square().sum() /
                          (w.rows() - 1.0));
    if (!(sd > 1e-12)) {
      sd = 1.0;
      plan.constant_column = true;
    }
    plan.col_mean[j] = mean;
    plan.col_sd[j] = sd;

    double loc = 0.0;
    double mult = 2.5;
    if (j >= 1 && j <= n_main && spec.strength != PriorStrength::defaulted) {
      loc = spec.prior_centers[j - 1];
      mult = strong;
    }
    plan.coef_loc[j] = loc;
    plan.coef_scale[j] = cfg.prior_scale_multiplier * mult * plan.sy / sd;
  }

  plan.intercept_loc = plan.ybar;
  plan.intercept_scale = cfg.prior_scale_multiplier * 2.5 * plan.sy;
  plan.sigma_rate = 1.0 / plan.sy;
  plan.dirichlet_conc = cfg.dirichlet_concentration;
  return plan;
}

std::vector<std::string> parameter_names(const ModelSpec& spec) {
  std::vector<std::string> names;
  names.push_back("(Intercept)");
  names.push_back("A");
  for (const auto& nm : spec.term_names) names.push_back(nm);
  for (const auto& nm : spec.interaction_names) names.push_back("A:" + nm);
  return names;
}

}  // namespace cabat
