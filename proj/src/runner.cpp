#include "cabat/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>
#include <tuple>

#include <json.hpp>

namespace cabat {

namespace {

constexpr std::uint64_t kReplicateTag = 0x01;
constexpr std::uint64_t kModelTag = 0x20;

std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  out += '"';
  return out;
}

void dump_fit_draws(std::ostringstream& os, int replicate, int effect_idx,
                    int model_idx, int analysis_index, const FittedModel& fm) {
  const auto& d = fm.draws;
  for (int s = 0; s < d.S(); ++s) {
    const int chain = s / d.kept_per_chain;
    const int draw = s % d.kept_per_chain;
    for (std::size_t p = 0; p < d.names.size(); ++p) {
      os << replicate << ',' << effect_idx << ',' << model_idx << ','
         << analysis_index << ',' << chain + 1 << ',' << draw + 1 << ','
         << csv_escape(d.names[p]) << ',' << fmt(d.values(s, p)) << '\n';
    }
  }
}

}  // namespace

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ScenarioRun run_scenario(const ScenarioConfig& cfg, int workers) {
  cfg.validate();
  const int R = cfg.replicates;
  const int E = static_cast<int>(cfg.effects.size());
  const int M = static_cast<int>(cfg.models.size());

  ScenarioRun run;
  run.config = cfg;
  run.records.resize(static_cast<std::size_t>(R) * E * M);
  if (cfg.dump_draws) run.draw_dump.resize(run.records.size());

  std::vector<double> phis(E);
  for (int e = 0; e < E; ++e) phis[e] = cfg.effects[e].phi_star;

  const auto process_replicate = [&](int rep) {
    const std::uint64_t rep_stream =
        derive_stream(cfg.seed, kReplicateTag, static_cast<std::uint64_t>(rep));

    ReplicateData data;
    bool data_ok = false;
    std::string data_err;
    for (int attempt = 0; attempt < 2 && !data_ok; ++attempt) {
      try {
        data = generate_replicate_data(cfg.dgm, cfg.design, phis, rep_stream);
        data_ok = true;
      } catch (const std::exception& err) {
        data_err = err.what();
      }
    }

    for (int e = 0; e < E; ++e) {
      for (int m = 0; m < M; ++m) {
        const std::size_t idx =
            (static_cast<std::size_t>(rep) * E + e) * M + m;
        ReplicateRecord& rec = run.records[idx];
        rec.replicate = rep;
        rec.effect_idx = e;
        rec.model_idx = m;
        if (!data_ok) {
          rec.failed = true;
          rec.reason = "data generation failed: " + data_err;
          continue;
        }
        const TrialSetup setup{cfg.dgm, cfg.models[m], cfg.design, cfg.sampler,
                               cfg.effects[e].gamma_true};
        const std::uint64_t trial_stream = derive_stream(
            rep_stream, kModelTag, static_cast<std::uint64_t>(m));
        for (int attempt = 0; attempt < 2; ++attempt) {
          try {
            std::vector<FittedModel> fits;
            rec.result = run_trial(setup, data, e, trial_stream,
                                   cfg.dump_draws ? &fits : nullptr);
            rec.failed = false;
            if (cfg.dump_draws) {
              std::ostringstream os;
              for (std::size_t a = 0; a < fits.size(); ++a) {
                dump_fit_draws(os, rep, e, m, static_cast<int>(a) + 1,
                               fits[a]);
              }
              run.draw_dump[idx] = os.str();
            }
            break;
          } catch (const std::exception& err) {
            rec.failed = true;
            rec.reason = err.what();
          }
        }
      }
    }
  };

  if (workers <= 1) {
    for (int rep = 0; rep < R; ++rep) process_replicate(rep);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          const int rep = next.fetch_add(1);
          if (rep >= R) break;
          process_replicate(rep);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  return run;
}

std::vector<OperatingCharacteristics> scenario_opchar(const ScenarioRun& run) {
  const auto& cfg = run.config;
  const int E = static_cast<int>(cfg.effects.size());
  const int M = static_cast<int>(cfg.models.size());
  std::vector<OperatingCharacteristics> out;
  for (int e = 0; e < E; ++e) {
    for (int m = 0; m < M; ++m) {
      std::vector<TrialResult> results;
      int failed = 0;
      for (int rep = 0; rep < cfg.replicates; ++rep) {
        const auto& rec =
            run.records[(static_cast<std::size_t>(rep) * E + e) * M + m];
        if (rec.failed) {
          ++failed;
        } else {
          results.push_back(rec.result);
        }
      }
      OperatingCharacteristics oc =
          aggregate_opchar(results, cfg.models[m].name,
                           cfg.effects[e].gamma_true, cfg.design.gamma0);
      oc.n_failed = failed;
      out.push_back(std::move(oc));
    }
  }
  return out;
}

void write_results_csv(const ScenarioRun& run, std::ostream& os) {
  const auto& cfg = run.config;
  os << "scenario,endpoint,n_max,model,gamma_true,phi_star,replicate,status,"
        "reason,decision,stopped_at_analysis,n_enrolled,analyses_run,"
        "posterior_median,bias,rmse,any_nonconverged,any_invalid\n";
  for (const auto& rec : run.records) {
    const auto& model = cfg.models[rec.model_idx];
    const auto& eff = cfg.effects[rec.effect_idx];
    os << cfg.scenario_id << ',' << endpoint_name(cfg.dgm.endpoint) << ','
       << cfg.design.n_max << ',' << csv_escape(model.name) << ','
       << fmt(eff.gamma_true) << ',' << fmt(eff.phi_star) << ','
       << rec.replicate << ',' << (rec.failed ? "failed" : "ok") << ','
       << csv_escape(rec.reason) << ',';
    if (rec.failed) {
      os << ",,,,,,,\n";
      continue;
    }
    const auto& r = rec.result;
    os << decision_name(r.decision) << ',' << r.stopped_at_analysis << ','
       << r.n_enrolled << ',' << r.analyses_run << ','
       << fmt(r.posterior_median_at_stop) << ',' << fmt(r.bias_at_stop) << ','
       << fmt(r.rmse_at_stop) << ',' << (r.any_nonconverged ? 1 : 0) << ','
       << (r.any_invalid_analysis ? 1 : 0) << '\n';
  }
}

void write_analyses_csv(const ScenarioRun& run, std::ostream& os) {
  const auto& cfg = run.config;
  os << "scenario,model,gamma_true,replicate,analysis,is_final,n_enrolled,"
        "events,calendar_time,t_stat,posterior_median,max_rhat,converged,"
        "excluded_frac,valid\n";
  for (const auto& rec : run.records) {
    if (rec.failed) continue;
    const auto& model = cfg.models[rec.model_idx];
    const auto& eff = cfg.effects[rec.effect_idx];
    for (const auto& a : rec.result.analyses) {
      os << cfg.scenario_id << ',' << csv_escape(model.name) << ','
         << fmt(eff.gamma_true) << ',' << rec.replicate << ',' << a.index
         << ',' << (a.is_final ? 1 : 0) << ',' << a.n_enrolled << ','
         << a.events << ',' << fmt(a.calendar_time) << ',' << fmt(a.t_stat)
         << ',' << fmt(a.posterior_median) << ',' << fmt(a.max_rhat) << ','
         << (a.converged ? 1 : 0) << ',' << fmt(a.excluded_frac) << ','
         << (a.valid ? 1 : 0) << '\n';
    }
  }
}

void write_opchar_csv(const ScenarioConfig& cfg,
                      const std::vector<OperatingCharacteristics>& ocs,
                      std::ostream& os) {
  os << "endpoint,n_max,model,gamma_true,metric,estimate,mc_se,n_replicates\n";
  const auto row = [&](const OperatingCharacteristics& oc,
                       const std::string& metric, double est, double se) {
    os << endpoint_name(cfg.dgm.endpoint) << ',' << cfg.design.n_max << ','
       << csv_escape(oc.model) << ',' << fmt(oc.gamma_true) << ',' << metric
       << ',' << fmt(est) << ',' << fmt(se) << ',' << oc.n_replicates << '\n';
  };
  for (const auto& oc : ocs) {
    row(oc, oc.is_null ? "alpha" : "power", oc.rejection.estimate,
        oc.rejection.mc_se);
    row(oc, "stop_early", oc.stop_early.estimate, oc.stop_early.mc_se);
    row(oc, "expected_n", oc.expected_n.estimate, oc.expected_n.mc_se);
    row(oc, "bias", oc.bias.estimate, oc.bias.mc_se);
    row(oc, "rmse_mean", oc.rmse.estimate, oc.rmse.mc_se);
    row(oc, "nonconverged_frac", oc.nonconverged_frac, kNaN);
    row(oc, "invalid_analysis_frac", oc.invalid_analysis_frac, kNaN);
    row(oc, "failed_replicates", oc.n_failed, kNaN);
  }
}

void write_report_power_csv(const ScenarioConfig& cfg,
                            const std::vector<OperatingCharacteristics>& ocs,
                            std::ostream& os) {
  os << "endpoint,n_max,model,gamma_true,is_null,rejection_rate,rejection_se,"
        "stop_early,stop_early_se,expected_n,expected_n_se,n_replicates\n";
  for (const auto& oc : ocs) {
    os << endpoint_name(cfg.dgm.endpoint) << ',' << cfg.design.n_max << ','
       << csv_escape(oc.model) << ',' << fmt(oc.gamma_true) << ','
       << (oc.is_null ? 1 : 0) << ',' << fmt(oc.rejection.estimate) << ','
       << fmt(oc.rejection.mc_se) << ',' << fmt(oc.stop_early.estimate) << ','
       << fmt(oc.stop_early.mc_se) << ',' << fmt(oc.expected_n.estimate) << ','
       << fmt(oc.expected_n.mc_se) << ',' << oc.n_replicates << '\n';
  }
}

void write_report_long_csv(const ScenarioRun& run, std::ostream& os) {
  const auto& cfg = run.config;
  os << "endpoint,n_max,model,gamma_true,replicate,rmse,posterior_median,bias,"
        "decision,n_enrolled\n";
  for (const auto& rec : run.records) {
    if (rec.failed) continue;
    const auto& r = rec.result;
    os << endpoint_name(cfg.dgm.endpoint) << ',' << cfg.design.n_max << ','
       << csv_escape(cfg.models[rec.model_idx].name) << ','
       << fmt(cfg.effects[rec.effect_idx].gamma_true) << ',' << rec.replicate
       << ',' << fmt(r.rmse_at_stop) << ',' << fmt(r.posterior_median_at_stop)
       << ',' << fmt(r.bias_at_stop) << ',' << decision_name(r.decision) << ','
       << r.n_enrolled << '\n';
  }
}

ScenarioRun read_results_csv(const ScenarioConfig& cfg, std::istream& is) {
  ScenarioRun run;
  run.config = cfg;
  std::string line;
  if (!std::getline(is, line)) {
    throw RuntimeFailure("results csv is empty");
  }
  std::map<std::string, int> model_index;
  for (std::size_t m = 0; m < cfg.models.size(); ++m) {
    model_index[cfg.models[m].name] = static_cast<int>(m);
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (char c : line) {
      if (c == '"') {
        quoted = !quoted;
      } else if (c == ',' && !quoted) {
        fields.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    fields.push_back(cur);
    if (fields.size() != 18) {
      throw RuntimeFailure("results csv: malformed row '" + line + "'");
    }
    ReplicateRecord rec;
    const auto it = model_index.find(fields[3]);
    if (it == model_index.end()) {
      throw RuntimeFailure("results csv references unknown model '" + fields[3] + "'");
    }
    rec.model_idx = it->second;
    const double gamma = std::stod(fields[4]);
    rec.effect_idx = -1;
    for (std::size_t e = 0; e < cfg.effects.size(); ++e) {
      if (cfg.effects[e].gamma_true == gamma) {
        rec.effect_idx = static_cast<int>(e);
      }
    }
    if (rec.effect_idx < 0) {
      throw RuntimeFailure("results csv references unknown gamma_true");
    }
    rec.replicate = std::stoi(fields[6]);
    rec.failed = fields[7] == "failed";
    rec.reason = fields[8];
    if (!rec.failed) {
      TrialResult& r = rec.result;
      const std::string& dec = fields[9];
      r.decision = dec == "superior_at_interim" ? Decision::superior_at_interim
                   : dec == "superior_at_final" ? Decision::superior_at_final
                                                : Decision::not_superior;
      r.stopped_at_analysis = std::stoi(fields[10]);
      r.n_enrolled = std::stoi(fields[11]);
      r.analyses_run = std::stoi(fields[12]);
      const auto num = [](const std::string& s) {
        return s == "NA" ? kNaN : std::stod(s);
      };
      r.posterior_median_at_stop = num(fields[13]);
      r.bias_at_stop = num(fields[14]);
      r.rmse_at_stop = num(fields[15]);
      r.any_nonconverged = fields[16] == "1";
      r.any_invalid_analysis = fields[17] == "1";
    }
    run.records.push_back(std::move(rec));
  }
  // deterministic order: replicate-major as written by run_scenario
  std::sort(run.records.begin(), run.records.end(),
            [&](const ReplicateRecord& a, const ReplicateRecord& b) {
              return std::tuple(a.replicate, a.effect_idx, a.model_idx) <
                     std::tuple(b.replicate, b.effect_idx, b.model_idx);
            });
  return run;
}

std::vector<std::string> write_outputs(const ScenarioRun& run,
                                       const std::string& out_dir,
                                       const std::string& config_bytes) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::vector<std::pair<std::string, std::string>> files;
  const auto emit = [&](const std::string& name, auto writer) {
    std::ostringstream os;
    writer(os);
    files.emplace_back(name, os.str());
  };

  const auto ocs = scenario_opchar(run);
  emit("results.csv", [&](std::ostream& os) { write_results_csv(run, os); });
  emit("analyses.csv", [&](std::ostream& os) { write_analyses_csv(run, os); });
  emit("opchar.csv",
       [&](std::ostream& os) { write_opchar_csv(run.config, ocs, os); });
  emit("report_power.csv",
       [&](std::ostream& os) { write_report_power_csv(run.config, ocs, os); });
  emit("report_rmse_bias.csv",
       [&](std::ostream& os) { write_report_long_csv(run, os); });
  if (!run.draw_dump.empty()) {
    std::ostringstream os;
    os << "replicate,effect,model,analysis,chain,draw,parameter,value\n";
    for (const auto& chunk : run.draw_dump) os << chunk;
    files.emplace_back("draws.csv", os.str());
  }

  nlohmann::ordered_json manifest;
  manifest["scenario_id"] = run.config.scenario_id;
  manifest["version"] = kVersion;
  manifest["seed"] = run.config.seed;
  manifest["replicates"] = run.config.replicates;
  char hash[24];
  std::snprintf(hash, sizeof(hash), "%016" PRIx64, fnv1a64(config_bytes));
  manifest["config_hash"] = hash;
  nlohmann::ordered_json outputs = nlohmann::ordered_json::object();

  std::vector<std::string> written;
  for (const auto& [name, bytes] : files) {
    const std::string path = out_dir + "/" + name;
    std::ofstream of(path, std::ios::binary);
    if (!of) throw RuntimeFailure("cannot write output file '" + path + "'");
    of << bytes;
    std::snprintf(hash, sizeof(hash), "%016" PRIx64, fnv1a64(bytes));
    outputs[name] = hash;
    written.push_back(path);
  }
  manifest["outputs"] = outputs;
  const std::string mpath = out_dir + "/manifest.json";
  std::ofstream mf(mpath, std::ios::binary);
  mf << manifest.dump(2) << '\n';
  written.push_back(mpath);
  return written;
}

}  // namespace cabat
