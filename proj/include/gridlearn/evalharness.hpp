#pragma once

// Metric computation (optimality loss, feasibility rate, violation degrees,
// speedup) and experiment orchestration: synthesize or load a realistic set,
// fit/sample/label per scheme, train, evaluate, emit a report row.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gridlearn/mlp.hpp"
#include "gridlearn/netmodel.hpp"
#include "gridlearn/scenarios.hpp"

namespace gridlearn::eval {

/// Average relative cost deviation in percent over the supplied pairs.
/// Callers pass only comparable pairs (feasible predictions).
double optimality_loss(const std::vector<double>& model_costs,
                       const std::vector<double>& oracle_costs);

double feasibility_rate(const std::vector<opf::ViolationReport>& reports);

enum class DeltaConvention { VIOLATED_ONLY, ALL_SAMPLES };

struct DeviationSummary {
  double dp_g = 0.0;
  double dq_g = 0.0;
  double dv = 0.0;
  double ds = 0.0;
};

/// Mean violation distance per class. VIOLATED_ONLY averages each class over
/// the samples violating it (0 when none do); ALL_SAMPLES averages over all.
DeviationSummary deviation_summary(const std::vector<opf::ViolationReport>& reports,
                                   DeltaConvention convention = DeltaConvention::VIOLATED_ONLY,
                                   double tol = 1e-6);

/// Mean of elementwise t0/tm (not the ratio of means).
double speedup(const std::vector<double>& t0_samples,
               const std::vector<double>& tm_samples);

struct MetricsReport {
  std::string name;
  std::string scheme;
  int n_train = 0;
  int n_test = 0;
  double eta_opt = 0.0;  // percent
  double eta_fea = 0.0;  // percent
  double delta_pg = 0.0;  // per-unit
  double delta_qg = 0.0;
  double delta_v = 0.0;
  double delta_s = 0.0;
  double t0_ms = 0.0;
  double tm_ms = 0.0;
  double eta_sp = 0.0;
  int n_infeasible_pred = 0;
  int n_excluded_oracle = 0;  // realistic samples the reference solver failed on
  int n_excluded_train = 0;   // synthetic training draws that failed labeling
  std::uint64_t seed = 0;
};

std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);
std::string report_csv_header();
std::string report_csv_row(const MetricsReport& report);

/// Hidden-MVN "realistic" fixture: a one-factor model over the PQ loads,
/// linear in Gaussians (hence exactly multivariate normal), with bus-to-bus
/// correlation rho_bus and P-Q coupling rho_pq around the nominal point.
std::vector<LoadScenario> synth_realistic(const LoadScenario& nominal, int n,
                                          double spread, double rho_bus,
                                          double rho_pq, std::uint64_t seed);

enum class Scheme { UNIFORM_INDEP, NORMAL_INDEP, MVN, REALISTIC };

std::string to_string(Scheme scheme);
Scheme scheme_from(const std::string& s);

struct ExperimentSpec {
  std::string name;
  std::uint64_t seed = 0;
  std::string case_path;

  // realistic test data: a CSV of scenarios, or the synthetic generator
  std::string realistic_csv;
  int realistic_n = 2000;
  double spread = 0.10;
  double rho_bus = 0.7;
  double rho_pq = 0.9;
  LoadScenario nominal;      // per-unit, canonical PQ order (when set directly)
  std::string nominal_json;  // raw {"p_mw": {...}, "q_mvar": {...}} document

  Scheme scheme = Scheme::MVN;
  int train_samples = 20000;
  scen::SplitPolicy split = scen::SplitPolicy::ALL;

  mlp::TrainConfig train;
  double feas_tol = 1e-4;
  int timing_samples = 50;
  unsigned jobs = 0;
};

/// Parses the declarative experiment document; `case`, nominal loads and all
/// stage parameters live in the file. Paths are resolved against the spec's
/// directory.
ExperimentSpec load_experiment_spec(const std::string& path);

struct ExperimentArtifacts {
  MetricsReport report;
  mlp::MlpModel model;
  scen::LabeledDataset test_set;
};

ExperimentArtifacts run_experiment(const ExperimentSpec& spec, const net::Network& net);

}  // namespace gridlearn::eval
