#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "twostage/bart.hpp"
#include "twostage/dgp.hpp"
#include "twostage/gbm.hpp"
#include "twostage/twostage.hpp"

namespace twostage {

enum class Method { NaiveGBM, NaiveBART, CorrectedBART };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct SimConfig {
  DgpScenario scenario;
  int n_total = 1500;
  int replications = 100;
  std::vector<Method> methods = {Method::NaiveBART, Method::CorrectedBART};
  SubgroupingRule rule;
  double design_fraction = 0.5;
  uint64_t seed = 1;
  long oracle_n_mc = 1000000;
  BartHyper bart;
  GbmHyper gbm;          // fixed configuration when gbm_tune is off
  bool gbm_tune = true;
  int threads = 1;
};

struct CellMetrics {
  double bias = 0.0;
  double var = 0.0;
  double mse = 0.0;
  double mean_se = 0.0;
  double coverage = 0.0;
  double mcse_coverage = 0.0;
  double mcse_bias = 0.0;
  int n_used = 0;
  int n_excluded = 0;
};

struct SimRow {
  Method method;
  std::string label;
  CellMetrics metrics;
};

struct SimResult {
  std::vector<SimRow> rows;  // config method order x rule label order
  OracleEstimand oracle;
  bool flagged = false;  // some cell lost more than 20% of replications
  std::vector<std::string> notes;
};

SimResult run_simulation(const SimConfig& config);

double mcse_coverage(double p_hat, long r);

// One row per method x label; stable float formatting for byte comparison.
std::string sim_metrics_csv(const SimResult& result);

struct OverlapExport {
  std::vector<double> treated_scores;
  std::vector<double> control_scores;
  std::vector<double> grid;  // sorted union of both arms' scores
  std::vector<double> ecdf_treated;
  std::vector<double> ecdf_control;
};

OverlapExport export_overlap_data(const std::vector<double>& scores, const std::vector<int>& t);

double ks_statistic(const OverlapExport& overlap);

std::string overlap_samples_csv(const OverlapExport& overlap);
std::string overlap_ecdf_csv(const OverlapExport& overlap);

std::string format_double(double v);

}  // namespace twostage
