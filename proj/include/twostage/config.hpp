#pragma once

#include <string>

#include "json.hpp"
#include "twostage/dataset.hpp"
#include "twostage/harness.hpp"
#include "twostage/mccv.hpp"

namespace twostage {

struct AdjustSpec {
  std::string name;
  double reference = 0.0;  // numeric covariates; categorical pin to their schema reference
  bool has_reference = false;
};

struct AnalyzeJob {
  std::string data_path;
  DatasetSchema schema;
  MccvConfig mccv;  // adjust_cols / reference_levels resolved after encoding
  std::vector<AdjustSpec> adjust;
};

struct OracleJob {
  DgpScenario scenario;
  SubgroupingRule rule;
  long n_mc = 1000000;
  uint64_t seed = 1;
};

struct DiagnosticsJob {
  DgpScenario scenario;
  int n = 500;
  double design_fraction = 0.5;
  BartHyper bart;
  int ppc_replicates = 200;
  uint64_t seed = 1;
};

nlohmann::json load_json_file(const std::string& path);

SimConfig parse_sim_config(const nlohmann::json& j);
AnalyzeJob parse_analyze_config(const nlohmann::json& j);
OracleJob parse_oracle_config(const nlohmann::json& j);
DiagnosticsJob parse_diagnostics_config(const nlohmann::json& j);

// Resolved-config echoes; parsing an echo reproduces the job.
nlohmann::json sim_config_json(const SimConfig& c);
nlohmann::json analyze_config_json(const AnalyzeJob& job);
nlohmann::json oracle_config_json(const OracleJob& job);
nlohmann::json diagnostics_config_json(const DiagnosticsJob& job);

nlohmann::json rule_json(const SubgroupingRule& rule);
SubgroupingRule parse_rule(const nlohmann::json& j);
nlohmann::json scenario_json(const DgpScenario& s);
DgpScenario parse_scenario(const nlohmann::json& j);

std::string outcome_name(Outcome o);
std::string covariate_kind_name(CovariateKind c);
std::string link_name(Link l);

}  // namespace twostage
