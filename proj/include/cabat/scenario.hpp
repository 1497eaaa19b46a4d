#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cabat/dgm.hpp"
#include "cabat/model_spec.hpp"
#include "cabat/trial.hpp"

namespace cabat {

struct EffectSpec {
  double phi_star = 0.0;
  double gamma_true = kNaN;
};

struct McSettings {
  int calibration_datasets = 5000;
  int calibration_size = 5000;
  int ascertain_datasets = 5000;
  int ascertain_size = 5000;
};

// Full description of one simulation scenario.
struct ScenarioConfig {
  std::string scenario_id;
  DgmSpec dgm;
  std::vector<EffectSpec> effects;
  std::vector<ModelSpec> models;
  DesignSpec design;
  int replicates = 1000;
  std::uint64_t seed = 0;
  SamplerConfig sampler;
  McSettings mc;
  bool dump_draws = false;

  void validate() const;
};

// Strict parse: unknown keys are rejected with the offending key path.
ScenarioConfig parse_config(const std::string& path);
ScenarioConfig parse_config_text(const std::string& text,
                                 const std::string& source_name);

}  // namespace cabat
