#include "cabat/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace cabat {

namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::string& path,
                const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (!allowed.contains(key)) {
      throw ConfigError("unknown key '" + path + key + "'");
    }
  }
}

double require_number(const json& obj, const std::string& path,
                      const std::string& key) {
  if (!obj.contains(key) || !obj[key].is_number()) {
    throw ConfigError("missing or non-numeric '" + path + key + "'");
  }
  return obj[key].get<double>();
}

double optional_number(const json& obj, const std::string& key, double dflt) {
  return obj.contains(key) ? obj[key].get<double>() : dflt;
}

Endpoint parse_endpoint(const std::string& s) {
  if (s == "continuous") return Endpoint::continuous;
  if (s == "binary") return Endpoint::binary;
  if (s == "time_to_event" || s == "tte") return Endpoint::time_to_event;
  throw ConfigError("unknown endpoint '" + s + "'");
}

CovariateSpec parse_covariate(const json& j, const std::string& path) {
  check_keys(j, path, {"name", "kind", "p", "role", "truncation"});
  CovariateSpec c;
  c.name = j.at("name").get<std::string>();
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "bernoulli") {
    c.kind = CovariateKind::bernoulli;
    c.bernoulli_p = require_number(j, path, "p");
  } else if (kind == "standard_normal") {
    c.kind = CovariateKind::standard_normal;
  } else if (kind == "truncated_normal") {
    c.kind = CovariateKind::truncated_normal;
    if (!j.contains("truncation")) {
      throw ConfigError("covariate '" + c.name + "' needs a truncation block");
    }
    const json& t = j["truncation"];
    const std::string tp = path + "truncation.";
    check_keys(t, tp, {"min", "max", "q1", "q2", "q3", "mu", "sigma", "xi", "tau"});
    c.trunc.min = require_number(t, tp, "min");
    c.trunc.max = require_number(t, tp, "max");
    c.trunc.q1 = require_number(t, tp, "q1");
    c.trunc.q3 = require_number(t, tp, "q3");
    c.trunc.q2 = optional_number(t, "q2", 0.5 * (c.trunc.q1 + c.trunc.q3));
    c.trunc.mu = require_number(t, tp, "mu");
    c.trunc.sigma = require_number(t, tp, "sigma");
    c.trunc.xi = optional_number(t, "xi", kNaN);
    c.trunc.tau = optional_number(t, "tau", kNaN);
  } else {
    throw ConfigError("unknown covariate kind '" + kind + "'");
  }
  if (j.contains("role")) {
    const std::string role = j["role"].get<std::string>();
    if (role == "prognostic") {
      c.role = CovariateRole::prognostic;
    } else if (role == "noise") {
      c.role = CovariateRole::noise;
    } else if (role == "filler") {
      c.role = CovariateRole::filler;
    } else {
      throw ConfigError("unknown covariate role '" + role + "'");
    }
  }
  return c;
}

Term parse_term(const json& j, const DgmSpec& dgm, const std::string& path) {
  check_keys(j, path, {"covariate", "power", "value"});
  Term t;
  t.column = dgm.covariate_index(j.at("covariate").get<std::string>());
  t.power = j.contains("power") ? j["power"].get<int>() : 1;
  return t;
}

ModelSpec parse_model(const json& j, const DgmSpec& dgm) {
  if (j.is_string()) return resolve_model(j.get<std::string>(), dgm);
  check_keys(j, "models[].", {"name", "terms", "interactions", "prior"});
  ModelSpec m;
  m.name = j.at("name").get<std::string>();
  m.endpoint = dgm.endpoint;
  if (j.contains("terms")) {
    for (const auto& tj : j["terms"]) {
      const Term t = parse_term(tj, dgm, "models[].terms[].");
      m.main_terms.push_back(t);
      const auto& nm = dgm.covariates[t.column].name;
      m.term_names.push_back(t.power == 2 ? nm + "^2" : nm);
      double center = 0.0;
      for (const auto& c : dgm.coefficients) {
        if (c.term == t) center = c.value;
      }
      m.prior_centers.push_back(center);
    }
  }
  if (j.contains("interactions")) {
    for (const auto& tj : j["interactions"]) {
      const Term t = parse_term(tj, dgm, "models[].interactions[].");
      m.interaction_terms.push_back(t);
      const auto& nm = dgm.covariates[t.column].name;
      m.interaction_names.push_back(t.power == 2 ? nm + "^2" : nm);
    }
  }
  if (j.contains("prior")) {
    const std::string p = j["prior"].get<std::string>();
    if (p == "default") {
      m.strength = PriorStrength::defaulted;
    } else if (p == "centered") {
      m.strength = PriorStrength::centered;
    } else if (p == "centered_strong") {
      m.strength = PriorStrength::centered_strong;
    } else {
      throw ConfigError("unknown prior strength '" + p + "'");
    }
  }
  if (m.strength == PriorStrength::defaulted) {
    m.prior_centers.assign(m.main_terms.size(), 0.0);
  }
  m.validate();
  return m;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (scenario_id.empty()) throw ConfigError("scenario_id must be set");
  if (replicates < 1) throw ConfigError("replicates must be >= 1");
  if (effects.empty()) throw ConfigError("at least one effect is required");
  if (models.empty()) throw ConfigError("at least one adjustment model is required");
  dgm.validate();
  design.validate(dgm.endpoint);
  for (const auto& m : models) {
    if (m.endpoint != dgm.endpoint) {
      throw ConfigError("model '" + m.name + "' endpoint does not match the DGM");
    }
  }
  for (const auto& e : effects) {
    if (!std::isfinite(e.gamma_true)) {
      throw ConfigError(
          "effects need gamma_true (run `ascertain` to obtain marginal values)");
    }
  }
  if (sampler.chains < 1 || sampler.iterations < 40) {
    throw ConfigError("sampler needs chains >= 1 and iterations >= 40");
  }
}

ScenarioConfig parse_config_text(const std::string& text,
                                 const std::string& source_name) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& err) {
    throw ConfigError(source_name + ": " + err.what());
  }

  check_keys(root, "",
             {"scenario_id", "endpoint", "dgm", "effects", "models", "design",
              "replicates", "seed", "sampler", "mc", "dump_draws"});

  ScenarioConfig cfg;
  cfg.scenario_id = root.at("scenario_id").get<std::string>();
  cfg.dgm.endpoint = parse_endpoint(root.at("endpoint").get<std::string>());

  const json& dj = root.at("dgm");
  check_keys(dj, "dgm.",
             {"beta0_star", "sigma", "p_ctr", "lambda", "coefficients",
              "covariates", "truncnorm_pool_factor"});
  cfg.dgm.beta0_star = optional_number(dj, "beta0_star", 0.0);
  cfg.dgm.sigma = optional_number(dj, "sigma", kNaN);
  cfg.dgm.p_ctr = optional_number(dj, "p_ctr", kNaN);
  cfg.dgm.lambda = optional_number(dj, "lambda", kNaN);
  cfg.dgm.truncnorm_pool_factor =
      static_cast<int>(optional_number(dj, "truncnorm_pool_factor", 250));
  for (const auto& cj : dj.at("covariates")) {
    cfg.dgm.covariates.push_back(parse_covariate(cj, "dgm.covariates[]."));
  }
  for (const auto& cj : dj.at("coefficients")) {
    DgmCoef c;
    c.term = parse_term(cj, cfg.dgm, "dgm.coefficients[].");
    c.value = require_number(cj, "dgm.coefficients[].", "value");
    cfg.dgm.coefficients.push_back(c);
  }

  for (const auto& ej : root.at("effects")) {
    check_keys(ej, "effects[].", {"phi_star", "gamma_true"});
    EffectSpec e;
    e.phi_star = require_number(ej, "effects[].", "phi_star");
    e.gamma_true = optional_number(ej, "gamma_true", kNaN);
    if (cfg.dgm.endpoint == Endpoint::continuous &&
        !std::isfinite(e.gamma_true)) {
      e.gamma_true = e.phi_star;  // collapsible
    }
    cfg.effects.push_back(e);
  }

  for (const auto& mj : root.at("models")) {
    cfg.models.push_back(parse_model(mj, cfg.dgm));
  }

  const json& gj = root.at("design");
  check_keys(gj, "design.",
             {"threshold", "direction", "gamma0", "schedule", "n_max",
              "tte_horizon", "tte_enroll_cutoff"});
  cfg.design.threshold_u = require_number(gj, "design.", "threshold");
  cfg.design.n_max = static_cast<int>(require_number(gj, "design.", "n_max"));
  cfg.design.gamma0 = optional_number(
      gj, "gamma0", cfg.dgm.endpoint == Endpoint::continuous ? 0.0 : 1.0);
  if (gj.contains("direction")) {
    const std::string d = gj["direction"].get<std::string>();
    if (d == "less") {
      cfg.design.direction = DesignSpec::Direction::less;
    } else if (d == "greater") {
      cfg.design.direction = DesignSpec::Direction::greater;
    } else {
      throw ConfigError("design.direction must be 'less' or 'greater'");
    }
  }
  const json& sj = gj.at("schedule");
  check_keys(sj, "design.schedule.", {"mode", "step"});
  const std::string mode = sj.at("mode").get<std::string>();
  if (mode == "per_enrollment") {
    cfg.design.schedule.mode = InterimSchedule::Mode::per_enrollment;
  } else if (mode == "per_events") {
    cfg.design.schedule.mode = InterimSchedule::Mode::per_events;
  } else {
    throw ConfigError("schedule.mode must be 'per_enrollment' or 'per_events'");
  }
  cfg.design.schedule.step =
      static_cast<int>(require_number(sj, "design.schedule.", "step"));
  cfg.design.tte_horizon = optional_number(gj, "tte_horizon", 75.0);
  cfg.design.tte_enroll_cutoff = optional_number(gj, "tte_enroll_cutoff", 50.0);

  cfg.replicates = static_cast<int>(require_number(root, "", "replicates"));
  cfg.seed = root.at("seed").get<std::uint64_t>();
  cfg.dgm.n_max = cfg.design.n_max;

  if (root.contains("sampler")) {
    const json& smp = root["sampler"];
    check_keys(smp, "sampler.",
               {"chains", "iterations", "target_accept", "max_leapfrog",
                "spline_degree", "spline_interior_knots"});
    cfg.sampler.chains =
        static_cast<int>(optional_number(smp, "chains", cfg.sampler.chains));
    cfg.sampler.iterations = static_cast<int>(
        optional_number(smp, "iterations", cfg.sampler.iterations));
    cfg.sampler.target_accept =
        optional_number(smp, "target_accept", cfg.sampler.target_accept);
    cfg.sampler.max_leapfrog = static_cast<int>(
        optional_number(smp, "max_leapfrog", cfg.sampler.max_leapfrog));
    cfg.sampler.spline_degree = static_cast<int>(
        optional_number(smp, "spline_degree", cfg.sampler.spline_degree));
    cfg.sampler.spline_interior_knots = static_cast<int>(optional_number(
        smp, "spline_interior_knots", cfg.sampler.spline_interior_knots));
  }

  if (root.contains("mc")) {
    const json& mc = root["mc"];
    check_keys(mc, "mc.",
               {"calibration_datasets", "calibration_size",
                "ascertain_datasets", "ascertain_size"});
    cfg.mc.calibration_datasets = static_cast<int>(
        optional_number(mc, "calibration_datasets", cfg.mc.calibration_datasets));
    cfg.mc.calibration_size = static_cast<int>(
        optional_number(mc, "calibration_size", cfg.mc.calibration_size));
    cfg.mc.ascertain_datasets = static_cast<int>(
        optional_number(mc, "ascertain_datasets", cfg.mc.ascertain_datasets));
    cfg.mc.ascertain_size = static_cast<int>(
        optional_number(mc, "ascertain_size", cfg.mc.ascertain_size));
  }

  if (root.contains("dump_draws")) cfg.dump_draws = root["dump_draws"].get<bool>();

  cfg.validate();
  return cfg;
}

ScenarioConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

}  // namespace cabat
