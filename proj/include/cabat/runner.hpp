#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cabat/opchar.hpp"
#include "cabat/scenario.hpp"
#include "cabat/trial.hpp"

namespace cabat {

inline constexpr const char* kVersion = "0.1.0";

struct ReplicateRecord {
  int replicate = 0;
  int effect_idx = 0;
  int model_idx = 0;
  bool failed = false;
  std::string reason;
  TrialResult result;
};

struct ScenarioRun {
  ScenarioConfig config;
  std::vector<ReplicateRecord> records;  // replicate-major, deterministic order
  std::vector<std::string> draw_dump;    // per-record CSV fragments (optional)
};

// Executes R replicate tasks on a worker pool.  Per-replicate streams are
// derived from (seed, replicate index), so results do not depend on worker
// count or completion order.  A failing record is retried once and then
// recorded as failed with the reason.
ScenarioRun run_scenario(const ScenarioConfig& cfg, int workers);

// Aggregation over a finished run (failed records excluded, counted).
std::vector<OperatingCharacteristics> scenario_opchar(const ScenarioRun& run);

void write_results_csv(const ScenarioRun& run, std::ostream& os);
void write_analyses_csv(const ScenarioRun& run, std::ostream& os);
void write_opchar_csv(const ScenarioConfig& cfg,
                      const std::vector<OperatingCharacteristics>& ocs,
                      std::ostream& os);
void write_report_power_csv(const ScenarioConfig& cfg,
                            const std::vector<OperatingCharacteristics>& ocs,
                            std::ostream& os);
void write_report_long_csv(const ScenarioRun& run, std::ostream& os);

// Reads results.csv back for re-aggregation (`opchar` / `report` commands).
ScenarioRun read_results_csv(const ScenarioConfig& cfg, std::istream& is);

// Writes results/analyses/opchar/report CSVs plus manifest.json into out_dir;
// returns the list of files written.  `config_bytes` feeds the manifest hash.
std::vector<std::string> write_outputs(const ScenarioRun& run,
                                       const std::string& out_dir,
                                       const std::string& config_bytes);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace cabat
