#include "twostage/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace twostage {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw std::runtime_error(where + ": expected an object");
  for (const auto& item : j.items())
    if (allowed.count(item.key()) == 0)
      throw std::runtime_error(where + ": unknown key '" + item.key() + "'");
}

Outcome parse_outcome(const std::string& s) {
  if (s == "binary") return Outcome::Binary;
  if (s == "continuous") return Outcome::Continuous;
  throw std::runtime_error("outcome must be 'binary' or 'continuous', got '" + s + "'");
}

CovariateKind parse_covariate_kind(const std::string& s) {
  if (s == "gaussian10") return CovariateKind::Gaussian10;
  if (s == "mixed10") return CovariateKind::Mixed10;
  throw std::runtime_error("covariates must be 'gaussian10' or 'mixed10', got '" + s + "'");
}

Link parse_link(const std::string& s) {
  if (s == "logit") return Link::Logit;
  if (s == "identity") return Link::Identity;
  throw std::runtime_error("link must be 'logit' or 'identity', got '" + s + "'");
}

std::vector<Method> parse_methods(const json& j) {
  std::vector<Method> out;
  if (!j.is_array()) throw std::runtime_error("methods: expected an array of names");
  for (const auto& item : j) out.push_back(method_from_name(item.get<std::string>()));
  if (out.empty()) throw std::runtime_error("methods: empty");
  return out;
}

json methods_json(const std::vector<Method>& methods) {
  json out = json::array();
  for (Method m : methods) out.push_back(method_name(m));
  return out;
}

BartHyper parse_bart(const json& j) {
  check_keys(j, {"m", "alpha", "beta", "k", "nu", "q", "n_burn", "n_keep", "n_cutpoints"},
             "bart");
  BartHyper h;
  if (j.contains("m")) h.m = j["m"].get<int>();
  if (j.contains("alpha")) h.alpha = j["alpha"].get<double>();
  if (j.contains("beta")) h.beta = j["beta"].get<double>();
  if (j.contains("k")) h.k = j["k"].get<double>();
  if (j.contains("nu")) h.nu = j["nu"].get<double>();
  if (j.contains("q")) h.q = j["q"].get<double>();
  if (j.contains("n_burn")) h.n_burn = j["n_burn"].get<int>();
  if (j.contains("n_keep")) h.n_keep = j["n_keep"].get<int>();
  if (j.contains("n_cutpoints")) h.n_cutpoints = j["n_cutpoints"].get<int>();
  return h;
}

json bart_json(const BartHyper& h) {
  return json{{"m", h.m},           {"alpha", h.alpha},   {"beta", h.beta},
              {"k", h.k},           {"nu", h.nu},         {"q", h.q},
              {"n_burn", h.n_burn}, {"n_keep", h.n_keep}, {"n_cutpoints", h.n_cutpoints}};
}

GbmHyper parse_gbm(const json& j) {
  check_keys(j, {"eta", "max_depth", "colsample", "lambda", "gamma", "n_rounds"}, "gbm");
  GbmHyper h;
  if (j.contains("eta")) h.eta = j["eta"].get<double>();
  if (j.contains("max_depth")) h.max_depth = j["max_depth"].get<int>();
  if (j.contains("colsample")) h.colsample = j["colsample"].get<double>();
  if (j.contains("lambda")) h.lambda = j["lambda"].get<double>();
  if (j.contains("gamma")) h.gamma = j["gamma"].get<double>();
  if (j.contains("n_rounds")) h.n_rounds = j["n_rounds"].get<int>();
  return h;
}

json gbm_json(const GbmHyper& h) {
  return json{{"eta", h.eta},       {"max_depth", h.max_depth}, {"colsample", h.colsample},
              {"lambda", h.lambda}, {"gamma", h.gamma},         {"n_rounds", h.n_rounds}};
}

DatasetSchema parse_schema(const json& j) {
  check_keys(j, {"covariates", "treatment", "outcome"}, "schema");
  DatasetSchema schema;
  if (!j.contains("covariates") || !j["covariates"].is_array() || j["covariates"].empty())
    throw std::runtime_error("schema: 'covariates' must be a non-empty array");
  for (const auto& cov : j["covariates"]) {
    check_keys(cov, {"name", "type", "reference"}, "schema covariate");
    CovariateSpec spec;
    spec.name = cov.at("name").get<std::string>();
    const std::string type = cov.contains("type") ? cov["type"].get<std::string>() : "numeric";
    if (type == "categorical") {
      spec.categorical = true;
      if (!cov.contains("reference"))
        throw std::runtime_error("schema: categorical covariate '" + spec.name +
                                 "' needs a reference level");
      spec.reference = cov["reference"].get<std::string>();
    } else if (type != "numeric") {
      throw std::runtime_error("schema: covariate type must be 'numeric' or 'categorical'");
    } else if (cov.contains("reference")) {
      throw std::runtime_error("schema: numeric covariate '" + spec.name +
                               "' cannot declare a reference level");
    }
    schema.covariates.push_back(std::move(spec));
  }
  if (j.contains("treatment")) schema.treatment = j["treatment"].get<std::string>();
  if (j.contains("outcome")) schema.outcome = j["outcome"].get<std::string>();
  return schema;
}

json schema_json(const DatasetSchema& schema) {
  json covs = json::array();
  for (const CovariateSpec& spec : schema.covariates) {
    json c{{"name", spec.name}, {"type", spec.categorical ? "categorical" : "numeric"}};
    if (spec.categorical) c["reference"] = spec.reference;
    covs.push_back(std::move(c));
  }
  return json{{"covariates", std::move(covs)},
              {"treatment", schema.treatment},
              {"outcome", schema.outcome}};
}

}  // namespace

std::string outcome_name(Outcome o) { return o == Outcome::Binary ? "binary" : "continuous"; }

std::string covariate_kind_name(CovariateKind c) {
  return c == CovariateKind::Gaussian10 ? "gaussian10" : "mixed10";
}

std::string link_name(Link l) { return l == Link::Logit ? "logit" : "identity"; }

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config file " + path + ": " + e.what());
  }
}

DgpScenario parse_scenario(const nlohmann::json& j) {
  check_keys(j, {"outcome", "covariates"}, "scenario");
  return DgpScenario::standard(parse_outcome(j.at("outcome").get<std::string>()),
                               parse_covariate_kind(j.at("covariates").get<std::string>()));
}

nlohmann::json scenario_json(const DgpScenario& s) {
  return json{{"outcome", outcome_name(s.outcome)},
              {"covariates", covariate_kind_name(s.covariates)}};
}

SubgroupingRule parse_rule(const nlohmann::json& j) {
  check_keys(j, {"cutpoints", "labels", "direction"}, "rule");
  SubgroupingRule rule;
  rule.cutpoints = j.at("cutpoints").get<std::vector<double>>();
  rule.labels = j.at("labels").get<std::vector<std::string>>();
  if (j.contains("direction")) {
    const std::string d = j["direction"].get<std::string>();
    if (d == "higher_is_last")
      rule.direction = Direction::HigherScoreIsLastLabel;
    else if (d == "higher_is_first")
      rule.direction = Direction::HigherScoreIsFirstLabel;
    else
      throw std::runtime_error("rule direction must be 'higher_is_last' or 'higher_is_first'");
  }
  rule.validate();
  return rule;
}

nlohmann::json rule_json(const SubgroupingRule& rule) {
  return json{{"cutpoints", rule.cutpoints},
              {"labels", rule.labels},
              {"direction", rule.direction == Direction::HigherScoreIsLastLabel
                                ? "higher_is_last"
                                : "higher_is_first"}};
}

SimConfig parse_sim_config(const nlohmann::json& j) {
  check_keys(j,
             {"scenario", "n_total", "replications", "methods", "rule", "design_fraction",
              "seed", "oracle_n_mc", "bart", "gbm", "gbm_tune", "threads"},
             "simulate config");
  SimConfig c;
  c.scenario = parse_scenario(j.at("scenario"));
  if (j.contains("n_total")) c.n_total = j["n_total"].get<int>();
  if (j.contains("replications")) c.replications = j["replications"].get<int>();
  if (j.contains("methods")) c.methods = parse_methods(j["methods"]);
  c.rule = parse_rule(j.at("rule"));
  if (j.contains("design_fraction")) c.design_fraction = j["design_fraction"].get<double>();
  if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
  if (j.contains("oracle_n_mc")) c.oracle_n_mc = j["oracle_n_mc"].get<long>();
  if (j.contains("bart")) c.bart = parse_bart(j["bart"]);
  if (j.contains("gbm")) c.gbm = parse_gbm(j["gbm"]);
  if (j.contains("gbm_tune")) c.gbm_tune = j["gbm_tune"].get<bool>();
  if (j.contains("threads")) c.threads = j["threads"].get<int>();
  return c;
}

nlohmann::json sim_config_json(const SimConfig& c) {
  return json{{"scenario", scenario_json(c.scenario)},
              {"n_total", c.n_total},
              {"replications", c.replications},
              {"methods", methods_json(c.methods)},
              {"rule", rule_json(c.rule)},
              {"design_fraction", c.design_fraction},
              {"seed", c.seed},
              {"oracle_n_mc", c.oracle_n_mc},
              {"bart", bart_json(c.bart)},
              {"gbm", gbm_json(c.gbm)},
              {"gbm_tune", c.gbm_tune}};
}

AnalyzeJob parse_analyze_config(const nlohmann::json& j) {
  check_keys(j,
             {"data", "schema", "link", "rule", "repetitions", "design_fraction", "adjust",
              "methods", "seed", "bart", "gbm", "gbm_tune", "threads"},
             "analyze config");
  AnalyzeJob job;
  job.data_path = j.at("data").get<std::string>();
  job.schema = parse_schema(j.at("schema"));
  if (j.contains("link")) job.mccv.link = parse_link(j["link"].get<std::string>());
  job.mccv.rule = parse_rule(j.at("rule"));
  if (j.contains("repetitions")) job.mccv.repetitions = j["repetitions"].get<int>();
  if (j.contains("design_fraction"))
    job.mccv.design_fraction = j["design_fraction"].get<double>();
  if (j.contains("adjust")) {
    if (!j["adjust"].is_array()) throw std::runtime_error("adjust: expected an array");
    for (const auto& a : j["adjust"]) {
      check_keys(a, {"name", "reference"}, "adjust entry");
      AdjustSpec spec;
      spec.name = a.at("name").get<std::string>();
      if (a.contains("reference")) {
        spec.reference = a["reference"].get<double>();
        spec.has_reference = true;
      }
      job.adjust.push_back(std::move(spec));
    }
  }
  if (j.contains("methods")) job.mccv.methods = parse_methods(j["methods"]);
  if (j.contains("seed")) job.mccv.seed = j["seed"].get<uint64_t>();
  if (j.contains("bart")) job.mccv.bart = parse_bart(j["bart"]);
  if (j.contains("gbm")) job.mccv.gbm = parse_gbm(j["gbm"]);
  if (j.contains("gbm_tune")) job.mccv.gbm_tune = j["gbm_tune"].get<bool>();
  if (j.contains("threads")) job.mccv.threads = j["threads"].get<int>();
  return job;
}

nlohmann::json analyze_config_json(const AnalyzeJob& job) {
  json adjust = json::array();
  for (const AdjustSpec& spec : job.adjust) {
    json a{{"name", spec.name}};
    if (spec.has_reference) a["reference"] = spec.reference;
    adjust.push_back(std::move(a));
  }
  return json{{"data", job.data_path},
              {"schema", schema_json(job.schema)},
              {"link", link_name(job.mccv.link)},
              {"rule", rule_json(job.mccv.rule)},
              {"repetitions", job.mccv.repetitions},
              {"design_fraction", job.mccv.design_fraction},
              {"adjust", std::move(adjust)},
              {"methods", methods_json(job.mccv.methods)},
              {"seed", job.mccv.seed},
              {"bart", bart_json(job.mccv.bart)},
              {"gbm", gbm_json(job.mccv.gbm)},
              {"gbm_tune", job.mccv.gbm_tune}};
}

OracleJob parse_oracle_config(const nlohmann::json& j) {
  check_keys(j, {"scenario", "rule", "n_mc", "seed"}, "oracle config");
  OracleJob job;
  job.scenario = parse_scenario(j.at("scenario"));
  job.rule = parse_rule(j.at("rule"));
  if (j.contains("n_mc")) job.n_mc = j["n_mc"].get<long>();
  if (j.contains("seed")) job.seed = j["seed"].get<uint64_t>();
  return job;
}

nlohmann::json oracle_config_json(const OracleJob& job) {
  return json{{"scenario", scenario_json(job.scenario)},
              {"rule", rule_json(job.rule)},
              {"n_mc", job.n_mc},
              {"seed", job.seed}};
}

DiagnosticsJob parse_diagnostics_config(const nlohmann::json& j) {
  check_keys(j, {"scenario", "n", "design_fraction", "bart", "ppc_replicates", "seed"},
             "diagnostics config");
  DiagnosticsJob job;
  job.scenario = parse_scenario(j.at("scenario"));
  if (j.contains("n")) job.n = j["n"].get<int>();
  if (j.contains("design_fraction")) job.design_fraction = j["design_fraction"].get<double>();
  if (j.contains("bart")) job.bart = parse_bart(j["bart"]);
  if (j.contains("ppc_replicates")) job.ppc_replicates = j["ppc_replicates"].get<int>();
  if (j.contains("seed")) job.seed = j["seed"].get<uint64_t>();
  return job;
}

nlohmann::json diagnostics_config_json(const DiagnosticsJob& job) {
  return json{{"scenario", scenario_json(job.scenario)},
              {"n", job.n},
              {"design_fraction", job.design_fraction},
              {"bart", bart_json(job.bart)},
              {"ppc_replicates", job.ppc_replicates},
              {"seed", job.seed}};
}

}  // namespace twostage
