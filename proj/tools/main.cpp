#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "twostage/config.hpp"
#include "twostage/csv.hpp"
#include "twostage/rng.hpp"

namespace {

using nlohmann::json;
using namespace twostage;

struct CommonFlags {
  std::string config_path;
  std::string out_dir = ".";
  bool strict = false;
  uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool threads_set = false;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON configuration file")->required();
  cmd->add_option("--out-dir", flags.out_dir, "output directory");
  cmd->add_flag("--strict", flags.strict, "exit 2 on flagged-quality results");
  cmd->add_option("--seed", flags.seed, "override the base seed")
      ->each([&flags](const std::string&) { flags.seed_set = true; });
  cmd->add_option("--threads", flags.threads, "override the worker count")
      ->each([&flags](const std::string&) { flags.threads_set = true; });
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

std::string out_path(const CommonFlags& flags, const std::string& name) {
  std::filesystem::create_directories(flags.out_dir);
  return (std::filesystem::path(flags.out_dir) / name).string();
}

// CSV outputs carry their provenance as leading comment lines.
std::string provenance_header(const std::string& command, const json& config) {
  return "# command: " + command + "\n# config: " + config.dump() + "\n";
}

int cmd_simulate(const CommonFlags& flags) {
  SimConfig config = parse_sim_config(load_json_file(flags.config_path));
  if (flags.seed_set) config.seed = flags.seed;
  if (flags.threads_set) config.threads = flags.threads;
  const json echo = sim_config_json(config);

  const SimResult result = run_simulation(config);

  write_text(out_path(flags, "metrics.csv"),
             provenance_header("simulate", echo) + sim_metrics_csv(result));

  json cells = json::array();
  for (const SimRow& row : result.rows)
    cells.push_back(json{{"method", method_name(row.method)},
                         {"label", row.label},
                         {"coverage", row.metrics.coverage},
                         {"mcse_coverage", row.metrics.mcse_coverage},
                         {"mcse_bias", row.metrics.mcse_bias},
                         {"n_used", row.metrics.n_used},
                         {"n_excluded", row.metrics.n_excluded}});
  json oracle = json::object();
  for (const auto& [label, truth] : result.oracle.per_label)
    oracle[label] = json{{"delta", truth.delta},
                         {"mc_se", truth.mc_se},
                         {"delta_link_avg", truth.delta_link_avg},
                         {"n", truth.n}};
  const json prov{{"command", "simulate"}, {"config", echo},
                  {"seed", config.seed},   {"threads", config.threads},
                  {"oracle", oracle},      {"cells", cells},
                  {"flagged", result.flagged}, {"notes", result.notes}};
  write_text(out_path(flags, "provenance.json"), prov.dump(2) + "\n");

  std::cout << "wrote " << out_path(flags, "metrics.csv") << "\n";
  for (const std::string& note : result.notes) std::cerr << "note: " << note << "\n";
  if (result.flagged && flags.strict) {
    std::cerr << "flagged: exclusions above 20% in at least one cell\n";
    return 2;
  }
  return 0;
}

int cmd_analyze(const CommonFlags& flags) {
  AnalyzeJob job = parse_analyze_config(load_json_file(flags.config_path));
  if (flags.seed_set) job.mccv.seed = flags.seed;
  if (flags.threads_set) job.mccv.threads = flags.threads;
  const json echo = analyze_config_json(job);

  const Outcome outcome =
      job.mccv.link == Link::Logit ? Outcome::Binary : Outcome::Continuous;
  const EncodedDataset encoded = encode_dataset(read_csv(job.data_path), job.schema, outcome);

  for (const AdjustSpec& spec : job.adjust) {
    const auto it = encoded.cols_of.find(spec.name);
    if (it == encoded.cols_of.end())
      throw std::runtime_error("adjust covariate '" + spec.name + "' is not in the schema");
    bool categorical = false;
    for (const CovariateSpec& cov : job.schema.covariates)
      if (cov.name == spec.name) categorical = cov.categorical;
    if (categorical) {
      // The schema reference level is the all-zero dummy row.
      for (int c : it->second) {
        job.mccv.adjust_cols.push_back(c);
        job.mccv.reference_levels.push_back(0.0);
      }
    } else {
      if (!spec.has_reference)
        throw std::runtime_error("adjust covariate '" + spec.name +
                                 "' needs a numeric reference value");
      job.mccv.adjust_cols.push_back(it->second.front());
      job.mccv.reference_levels.push_back(spec.reference);
    }
  }

  const MccvResult result = run_mccv(encoded.data, job.mccv);

  write_text(out_path(flags, "effects.csv"),
             provenance_header("analyze", echo) + mccv_effects_csv(result));
  write_text(out_path(flags, "subgroups.csv"),
             provenance_header("analyze", echo) + mccv_subgroups_csv(result));

  bool flagged = false;
  json cells = json::array();
  for (const auto& [method, label, cell] : result.cells) {
    cells.push_back(json{{"method", method_name(method)},
                         {"label", label},
                         {"n_valid", cell.n_valid},
                         {"n_total", cell.n_total}});
    if (cell.n_valid * 5 < cell.n_total * 4) flagged = true;
  }
  const json prov{{"command", "analyze"},
                  {"config", echo},
                  {"seed", job.mccv.seed},
                  {"threads", job.mccv.threads},
                  {"n_rows_used", encoded.data.n()},
                  {"n_rows_dropped", encoded.n_dropped},
                  {"encoded_columns", encoded.col_names},
                  {"cells", cells},
                  {"flagged", flagged}};
  write_text(out_path(flags, "provenance.json"), prov.dump(2) + "\n");

  std::cout << "wrote " << out_path(flags, "effects.csv") << " ("
            << encoded.n_dropped << " rows dropped)\n";
  if (flagged && flags.strict) {
    std::cerr << "flagged: over 20% of repetitions failed in at least one cell\n";
    return 2;
  }
  return 0;
}

int cmd_oracle(const CommonFlags& flags) {
  OracleJob job = parse_oracle_config(load_json_file(flags.config_path));
  if (flags.seed_set) job.seed = flags.seed;
  const json echo = oracle_config_json(job);

  const OracleEstimand result = oracle_estimand(job.scenario, job.rule, job.n_mc, job.seed);

  json labels = json::object();
  for (const auto& [label, truth] : result.per_label)
    labels[label] = json{{"delta", truth.delta},
                         {"mc_se", truth.mc_se},
                         {"delta_link_avg", truth.delta_link_avg},
                         {"n", truth.n}};
  const json out{{"command", "oracle"}, {"config", echo},
                 {"seed", job.seed},    {"n_mc", result.n_mc},
                 {"labels", labels}};
  const std::string text = out.dump(2) + "\n";
  write_text(out_path(flags, "oracle.json"), text);
  std::cout << text;
  return 0;
}

int cmd_diagnostics(const CommonFlags& flags) {
  DiagnosticsJob job = parse_diagnostics_config(load_json_file(flags.config_path));
  if (flags.seed_set) job.seed = flags.seed;
  const json echo = diagnostics_config_json(job);

  const TrialDataset trial = gen_trial(job.scenario, job.n, derive_seed(job.seed, "trial"));
  const SplitResult split = split_design_eval(
      trial, SplitSpec{job.design_fraction, derive_seed(job.seed, "split")});
  const TrialDataset design = trial.rows(split.design_idx);
  const BartChain chain = fit_bart(design.x, design.y, job.scenario.outcome, job.bart,
                                   derive_seed(job.seed, "bart"));

  const VipSummary importances = vip(chain);
  std::string vip_csv = provenance_header("diagnostics", echo) + "feature,mean,lo,hi\n";
  for (size_t f = 0; f < importances.mean.size(); ++f)
    vip_csv += "x" + std::to_string(f + 1) + "," + format_double(importances.mean[f]) + "," +
               format_double(importances.lo[f]) + "," + format_double(importances.hi[f]) + "\n";
  write_text(out_path(flags, "vip.csv"), vip_csv);

  const ScoreDrawMatrix draws = predict_posterior(chain, trial.x);
  const OverlapExport overlap = export_overlap_data(draws.posterior_mean(), trial.t);
  write_text(out_path(flags, "overlap_samples.csv"),
             provenance_header("diagnostics", echo) + overlap_samples_csv(overlap));
  write_text(out_path(flags, "overlap_ecdf.csv"),
             provenance_header("diagnostics", echo) + overlap_ecdf_csv(overlap));

  json prov{{"command", "diagnostics"},
            {"config", echo},
            {"seed", job.seed},
            {"ks_statistic", ks_statistic(overlap)},
            {"bart_accept_rate", chain.accept_rate}};
  if (job.scenario.outcome == Outcome::Binary) {
    const double p = posterior_predictive_pvalue(chain, design.y, job.ppc_replicates,
                                                 derive_seed(job.seed, "ppc"));
    const json ppc{{"command", "diagnostics"},
                   {"config", echo},
                   {"seed", job.seed},
                   {"p_value", p},
                   {"n_rep", job.ppc_replicates}};
    write_text(out_path(flags, "ppc.json"), ppc.dump(2) + "\n");
    prov["ppc_p_value"] = p;
  }
  write_text(out_path(flags, "provenance.json"), prov.dump(2) + "\n");

  std::cout << "wrote " << out_path(flags, "vip.csv") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stage subgroup treatment-effect estimation"};
  app.require_subcommand(1);

  CommonFlags sim_flags, analyze_flags, oracle_flags, diag_flags;
  CLI::App* sim = app.add_subcommand("simulate", "run the simulation study");
  add_common(sim, sim_flags);
  CLI::App* analyze = app.add_subcommand("analyze", "repeated-split analysis of a dataset");
  add_common(analyze, analyze_flags);
  CLI::App* oracle = app.add_subcommand("oracle", "ground-truth subgroup effects");
  add_common(oracle, oracle_flags);
  CLI::App* diag = app.add_subcommand("diagnostics", "stage-1 model diagnostics");
  add_common(diag, diag_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_flags);
    if (analyze->parsed()) return cmd_analyze(analyze_flags);
    if (oracle->parsed()) return cmd_oracle(oracle_flags);
    if (diag->parsed()) return cmd_diagnostics(diag_flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
