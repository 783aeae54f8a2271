// gridlearn: case preparation, geographic load assignment, power flow, OPF
// ground truths, scenario synthesis, training, prediction and evaluation.
//
// Every run prints the resolved master seed and a digest of its configuration
// so artifacts can be reproduced exactly. GRIDLEARN_SEED overrides seeds from
// files and flags.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridlearn/caseprep.hpp"
#include "gridlearn/evalharness.hpp"
#include "gridlearn/geoassign.hpp"
#include "gridlearn/mlp.hpp"
#include "gridlearn/netmodel.hpp"
#include "gridlearn/parallel.hpp"
#include "gridlearn/powerflow.hpp"
#include "gridlearn/rng.hpp"
#include "gridlearn/scenarios.hpp"

using namespace gridlearn;
using nlohmann::json;

namespace {

std::uint64_t resolve_seed(std::uint64_t from_config) {
  if (const char* env = std::getenv("GRIDLEARN_SEED"))
    return std::strtoull(env, nullptr, 10);
  return from_config;
}

void announce(const std::string& stage, std::uint64_t seed,
              const std::string& config_text) {
  std::cout << stage << ": seed " << seed << ", config digest " << std::hex
            << rng::fnv1a64(config_text) << std::dec << "\n";
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream oss;
  oss << in.rdbuf();
  return oss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

std::vector<double> read_max_flows(const std::string& path, std::size_t n_branches) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open max-flows file '" + path + "'");
  std::string line;
  std::getline(in, line);  // header: branch_index,max_flow_pu
  std::vector<double> flows(n_branches, 0.0);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string idx, value;
    std::getline(row, idx, ',');
    std::getline(row, value, ',');
    const auto k = static_cast<std::size_t>(std::stoul(idx));
    if (k >= n_branches)
      throw std::runtime_error("max-flows row for unknown branch " + idx);
    flows[k] = std::stod(value);
  }
  return flows;
}

pf::PfSetpoint setpoint_from_json(const net::Network& net, const json& doc) {
  pf::PfSetpoint sp;
  const auto& gen_buses = net.gen_bus_indices();
  sp.v_set.resize(static_cast<Eigen::Index>(gen_buses.size()));
  for (std::size_t k = 0; k < gen_buses.size(); ++k) {
    const int id = net.buses()[static_cast<std::size_t>(gen_buses[k])].id;
    sp.v_set[static_cast<Eigen::Index>(k)] =
        doc.at("v_set_by_bus").at(std::to_string(id)).get<double>();
  }
  const auto& nonslack = net.nonslack_gen_indices();
  sp.p_set.resize(static_cast<Eigen::Index>(nonslack.size()));
  // per-bus totals distributed over the bus's generators by capacity share
  std::map<int, double> by_bus;
  for (const auto& [key, value] : doc.at("p_set_by_bus").items())
    by_bus[std::stoi(key)] = value.get<double>();
  for (std::size_t k = 0; k < nonslack.size(); ++k) {
    const auto& gen = net.generators()[static_cast<std::size_t>(nonslack[k])];
    const auto it = by_bus.find(gen.bus_id);
    if (it == by_bus.end())
      throw std::runtime_error("setpoint misses PV bus " + std::to_string(gen.bus_id));
    const auto& bus_gens = net.generators_at(net.index_of(gen.bus_id));
    double bus_range = 0.0;
    for (int g : bus_gens)
      bus_range += net.generators()[static_cast<std::size_t>(g)].p_max -
                   net.generators()[static_cast<std::size_t>(g)].p_min;
    const double share = bus_range > 0
                             ? (gen.p_max - gen.p_min) / bus_range
                             : 1.0 / static_cast<double>(bus_gens.size());
    sp.p_set[static_cast<Eigen::Index>(k)] = it->second * share;
  }
  return sp;
}

json pf_solution_to_json(const net::Network& net, const pf::PfSolution& sol) {
  json doc{{"converged", sol.converged},
           {"iterations", sol.iterations},
           {"mismatch", sol.mismatch},
           {"p_slack", sol.p_slack}};
  json v = json::object(), th = json::object();
  for (int b = 0; b < net.n_buses(); ++b) {
    const std::string id = std::to_string(net.buses()[static_cast<std::size_t>(b)].id);
    v[id] = sol.v_mag[b];
    th[id] = sol.theta[b];
  }
  doc["v_mag_by_bus"] = v;
  doc["theta_by_bus"] = th;
  json q = json::array();
  for (Eigen::Index g = 0; g < sol.q_gen.size(); ++g) q.push_back(sol.q_gen[g]);
  doc["q_gen"] = q;
  return doc;
}

pf::PfInit init_from_dataset(const scen::LabeledDataset& dataset) {
  std::vector<pf::PfSolution> states;
  states.reserve(dataset.size());
  for (const auto& sol : dataset.solutions) {
    pf::PfSolution s;
    s.v_mag = sol.v_mag;
    s.theta = sol.theta;
    states.push_back(std::move(s));
  }
  return pf::mean_init(states);
}

int cmd_case_validate(const std::string& case_path) {
  const json doc = json::parse(read_file(case_path));
  // reconstruct without load_case so invariant violations are reported, not thrown
  net::Network net;
  try {
    net = net::load_case(doc.dump());
  } catch (const net::CaseError& e) {
    std::cout << e.what() << "\n";
    return 1;
  }
  const auto report = net::validate(net);
  for (const auto& line : report) std::cout << line << "\n";
  if (report.empty()) std::cout << "case is well-formed\n";
  return report.empty() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"power-grid optimization and learning toolkit"};
  app.require_subcommand(1);
  unsigned jobs = default_jobs();
  app.add_option("--jobs", jobs, "worker threads for batch stages");

  // ---- case ----
  auto* case_cmd = app.add_subcommand("case", "case-file utilities");
  case_cmd->require_subcommand(1);
  std::string case_path, prep_config_path, out_path, max_flows_path;

  auto* validate_cmd =
      case_cmd->add_subcommand("validate", "report invariant violations");
  validate_cmd->add_option("--case", case_path)->required();

  auto* prep_cmd = case_cmd->add_subcommand("prep", "estimate missing OPF parameters");
  prep_cmd->add_option("--case", case_path)->required();
  prep_cmd->add_option("--caseprep-config", prep_config_path)->required();
  prep_cmd->add_option("--out", out_path)->required();
  prep_cmd->add_option("--max-flows", max_flows_path,
                       "per-branch maxima from relaxed runs (csv)");

  // ---- geo ----
  auto* geo_cmd = app.add_subcommand("geo", "geographic load assignment");
  geo_cmd->require_subcommand(1);
  auto* geo_assign_cmd = geo_cmd->add_subcommand("assign", "regions to buses");
  std::string layout_path, loads_path;
  geo_assign_cmd->add_option("--layout", layout_path)->required();
  geo_assign_cmd->add_option("--loads", loads_path)->required();
  geo_assign_cmd->add_option("--out", out_path)->required();

  // ---- pf ----
  auto* pf_cmd = app.add_subcommand("pf", "Newton power flow");
  std::string setpoint_path;
  double pf_tol = 1e-8;
  int pf_max_iter = 30;
  pf_cmd->add_option("--case", case_path)->required();
  pf_cmd->add_option("--loads", loads_path)->required();
  pf_cmd->add_option("--setpoint", setpoint_path)->required();
  pf_cmd->add_option("--tol", pf_tol);
  pf_cmd->add_option("--max-iter", pf_max_iter);
  pf_cmd->add_option("--out", out_path);

  // ---- opf ----
  auto* opf_cmd = app.add_subcommand("opf", "interior-point optimal power flow");
  std::string warm_path;
  double relax_level = 0.0;
  bool batch = false;
  opf_cmd->add_option("--case", case_path)->required();
  opf_cmd->add_option("--loads", loads_path)->required();
  opf_cmd->add_option("--warm", warm_path, "warm-start solution json");
  opf_cmd->add_option("--relax", relax_level, "relax all branch limits to this level");
  opf_cmd->add_flag("--batch", batch, "one json line per scenario");
  opf_cmd->add_option("--max-flows-out", max_flows_path,
                      "write per-branch maximum |S| over the batch");
  opf_cmd->add_option("--out", out_path);

  // ---- scenarios ----
  auto* scen_cmd =
      app.add_subcommand("scenarios", "distribution fit/sample/label/split");
  scen_cmd->require_subcommand(1);
  std::string family_name = "MVN", spec_path, policy_name = "BASE";
  std::string split_policy = "FIRST_HALF_TRAIN", out_train, out_test, dataset_path;
  int sample_n = 0;
  std::uint64_t seed = 0;

  auto* fit_cmd = scen_cmd->add_subcommand("fit", "fit a family to historical data");
  fit_cmd->add_option("--family", family_name, "UNIFORM_INDEP|NORMAL_INDEP|MVN");
  fit_cmd->add_option("--case", case_path)->required();
  fit_cmd->add_option("--in", loads_path)->required();
  fit_cmd->add_option("--out", out_path)->required();

  auto* sample_cmd = scen_cmd->add_subcommand("sample", "draw scenarios from a spec");
  sample_cmd->add_option("--spec", spec_path)->required();
  sample_cmd->add_option("--n", sample_n)->required();
  sample_cmd->add_option("--seed", seed);
  sample_cmd->add_option("--out", out_path)->required();

  auto* label_cmd = scen_cmd->add_subcommand("label", "OPF ground truths per scenario");
  label_cmd->add_option("--case", case_path)->required();
  label_cmd->add_option("--loads", loads_path)->required();
  label_cmd->add_option("--warm-policy", policy_name, "FLAT|BASE");
  label_cmd->add_option("--out", out_path)->required();

  auto* split_cmd = scen_cmd->add_subcommand("split", "chronological train/test split");
  split_cmd->add_option("--in", dataset_path)->required();
  split_cmd->add_option("--case", case_path)->required();
  split_cmd->add_option("--policy", split_policy, "ALL|FIRST_HALF_TRAIN");
  split_cmd->add_option("--out-train", out_train)->required();
  split_cmd->add_option("--out-test", out_test)->required();

  // ---- train / predict / eval / experiment ----
  auto* train_cmd = app.add_subcommand("train", "train the dispatch predictor");
  std::string train_config_path, model_path;
  train_cmd->add_option("--case", case_path)->required();
  train_cmd->add_option("--dataset", dataset_path)->required();
  train_cmd->add_option("--config", train_config_path)->required();
  train_cmd->add_option("--out-model", model_path)->required();

  auto* predict_cmd = app.add_subcommand("predict", "NN + power-flow dispatch");
  std::string init_dataset_path;
  predict_cmd->add_option("--model", model_path)->required();
  predict_cmd->add_option("--case", case_path)->required();
  predict_cmd->add_option("--loads", loads_path)->required();
  predict_cmd->add_option("--init-from", init_dataset_path,
                          "dataset whose labels give the power-flow init");
  predict_cmd->add_option("--out", out_path);

  auto* eval_cmd = app.add_subcommand("eval", "metrics against OPF ground truths");
  std::string test_csv, test_labeled;
  double feas_tol = 1e-4;
  int timing_samples = 50;
  eval_cmd->add_option("--model", model_path)->required();
  eval_cmd->add_option("--case", case_path)->required();
  eval_cmd->add_option("--test", test_csv, "scenario csv (labeled on the fly)");
  eval_cmd->add_option("--test-labeled", test_labeled, "pre-labeled dataset");
  eval_cmd->add_option("--feas-tol", feas_tol);
  eval_cmd->add_option("--timing-samples", timing_samples);
  eval_cmd->add_option("--out", out_path)->required();

  auto* exp_cmd = app.add_subcommand("experiment", "declarative experiment runs");
  exp_cmd->require_subcommand(1);
  auto* exp_run_cmd = exp_cmd->add_subcommand("run", "run one experiment spec");
  std::string exp_spec_path, out_dir = ".";
  exp_run_cmd->add_option("--spec", exp_spec_path)->required();
  exp_run_cmd->add_option("--out-dir", out_dir);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*validate_cmd) return cmd_case_validate(case_path);

    if (*prep_cmd) {
      const auto net = net::load_case_file(case_path);
      const auto config = caseprep::load_prep_config(prep_config_path);
      announce("case prep", resolve_seed(0), read_file(prep_config_path));
      std::vector<double> max_flows;
      if (!max_flows_path.empty())
        max_flows = read_max_flows(max_flows_path, net.branches().size());
      const auto prepared = caseprep::prepare_case(net, config, max_flows);
      if (!max_flows.empty()) {
        std::vector<double> limits;
        for (const auto& br : prepared.branches()) limits.push_back(br.s_max);
        for (std::size_t k : caseprep::uncovered_branches(max_flows, limits))
          std::cerr << "warning: branch " << k
                    << " limit below its observed maximum flow\n";
      }
      net::save_case_file(prepared, out_path);
      return 0;
    }

    if (*geo_assign_cmd) {
      auto layout = geoassign::load_layout_file(layout_path);
      std::map<std::string, geoassign::SeriesPq> by_region;
      geoassign::read_loads_csv(loads_path, layout.timestamps, by_region);
      layout.region_loads = std::move(by_region);
      announce("geo assign", resolve_seed(0), read_file(layout_path));
      const auto series = geoassign::assign_series(layout);
      geoassign::write_loads_csv(out_path, series);
      return 0;
    }

    if (*pf_cmd) {
      const auto net = net::load_case_file(case_path);
      const auto scenarios = scen::read_scenarios_csv(loads_path, net.pq_bus_ids());
      const json spj = json::parse(read_file(setpoint_path));
      const auto setpoint = setpoint_from_json(net, spj);
      announce("pf", resolve_seed(0), spj.dump());
      json out = json::array();
      for (const auto& s : scenarios) {
        const auto sol = pf::solve_pf(net, s, setpoint, pf::flat_init(net),
                                      pf::PfOptions{pf_tol, pf_max_iter});
        out.push_back(pf_solution_to_json(net, sol));
      }
      const std::string text = out.dump(2) + "\n";
      if (out_path.empty())
        std::cout << text;
      else
        write_file(out_path, text);
      return 0;
    }

    if (*opf_cmd) {
      auto net = net::load_case_file(case_path);
      if (relax_level > 0.0) net = opf::relax_branch_limits(net, relax_level);
      const auto scenarios = scen::read_scenarios_csv(loads_path, net.pq_bus_ids());
      announce("opf", resolve_seed(0),
               case_path + loads_path + std::to_string(relax_level));
      opf::WarmStart warm;
      if (!warm_path.empty())
        warm.solution = scen::solution_from_json(read_file(warm_path));

      std::vector<opf::DispatchSolution> solutions(scenarios.size());
      parallel_for(scenarios.size(), jobs, [&](std::size_t i) {
        solutions[i] = opf::solve_opf(net, scenarios[i], warm);
      });

      std::ostringstream body;
      if (batch || scenarios.size() > 1) {
        for (const auto& sol : solutions) body << scen::solution_to_json(sol) << "\n";
      } else {
        body << scen::solution_to_json(solutions.front()) << "\n";
      }
      if (out_path.empty())
        std::cout << body.str();
      else
        write_file(out_path, body.str());

      if (!max_flows_path.empty()) {
        std::vector<double> running(net.branches().size(), 0.0);
        for (const auto& sol : solutions) {
          if (sol.status != opf::SolveStatus::OPTIMAL) continue;
          const auto flows = pf::branch_flows(net, sol.v_mag, sol.theta);
          for (std::size_t k = 0; k < flows.size(); ++k)
            running[k] =
                std::max(running[k], std::max(std::abs(flows[k].s_from),
                                              std::abs(flows[k].s_to)));
        }
        std::ostringstream csv;
        csv << "branch_index,max_flow_pu\n";
        csv.precision(17);
        for (std::size_t k = 0; k < running.size(); ++k)
          csv << k << ',' << running[k] << "\n";
        write_file(max_flows_path, csv.str());
      }
      int failures = 0;
      for (const auto& sol : solutions)
        if (sol.status != opf::SolveStatus::OPTIMAL) ++failures;
      if (failures > 0)
        std::cerr << failures << " of " << solutions.size()
                  << " scenarios did not reach OPTIMAL\n";
      return 0;
    }

    if (*fit_cmd) {
      const auto net = net::load_case_file(case_path);
      const auto historical = scen::read_scenarios_csv(loads_path, net.pq_bus_ids());
      announce("scenarios fit", resolve_seed(0), family_name + loads_path);
      const auto spec = scen::fit(scen::family_from(family_name), historical,
                                  net.pq_bus_ids());
      scen::save_spec(spec, out_path);
      return 0;
    }

    if (*sample_cmd) {
      const auto spec = scen::load_spec(spec_path);
      const std::uint64_t resolved = resolve_seed(seed);
      announce("scenarios sample", resolved, read_file(spec_path));
      const auto draws = scen::sample(spec, sample_n, resolved);
      scen::write_scenarios_csv(out_path, draws, spec.pq_bus_ids);
      return 0;
    }

    if (*label_cmd) {
      const auto net = net::load_case_file(case_path);
      const auto scenarios = scen::read_scenarios_csv(loads_path, net.pq_bus_ids());
      announce("scenarios label", resolve_seed(0), policy_name + loads_path);
      const auto policy = policy_name == "FLAT" ? scen::WarmPolicy::FLAT
                                                : scen::WarmPolicy::BASE;
      const auto labeled = scen::label(scenarios, net, policy, jobs);
      scen::save_dataset(labeled, out_path, net.pq_bus_ids());
      std::cout << "labeled " << labeled.size() << " scenarios, excluded "
                << labeled.excluded.size() << "\n";
      return 0;
    }

    if (*split_cmd) {
      const auto net = net::load_case_file(case_path);
      const auto dataset = scen::load_dataset(dataset_path);
      announce("scenarios split", resolve_seed(0), split_policy + dataset_path);
      const auto policy = split_policy == "ALL" ? scen::SplitPolicy::ALL
                                                : scen::SplitPolicy::FIRST_HALF_TRAIN;
      const auto [train_part, test_part] = scen::split(dataset, policy);
      scen::save_dataset(train_part, out_train, net.pq_bus_ids());
      scen::save_dataset(test_part, out_test, net.pq_bus_ids());
      return 0;
    }

    if (*train_cmd) {
      const auto net = net::load_case_file(case_path);
      const auto dataset = scen::load_dataset(dataset_path);
      const json cfg = json::parse(read_file(train_config_path));
      mlp::TrainConfig config;
      config.hidden = cfg.value("hidden", config.hidden);
      config.epochs = cfg.value("epochs", config.epochs);
      config.lr_start = cfg.value("lr_start", config.lr_start);
      config.lr_end = cfg.value("lr_end", config.lr_end);
      config.penalty_start_epoch =
          cfg.value("penalty_start_epoch", config.penalty_start_epoch);
      config.penalty_weight = cfg.value("penalty_weight", config.penalty_weight);
      config.zo_delta = cfg.value("zo_delta", config.zo_delta);
      config.batch_size = cfg.value("batch_size", config.batch_size);
      config.seed = resolve_seed(cfg.value("seed", std::uint64_t{0}));
      config.jobs = jobs;
      announce("train", config.seed, cfg.dump());
      const auto [model, history] = mlp::train(dataset, net, config);
      mlp::save_model(model, model_path, config.seed);
      std::cout << "final prediction loss " << history.pred_loss.back() << "\n";
      return 0;
    }

    if (*predict_cmd) {
      const auto net = net::load_case_file(case_path);
      const auto model = mlp::load_model(model_path);
      const auto scenarios = scen::read_scenarios_csv(loads_path, net.pq_bus_ids());
      announce("predict", resolve_seed(0), model_path + loads_path);
      pf::PfInit init = pf::flat_init(net);
      if (!init_dataset_path.empty())
        init = init_from_dataset(scen::load_dataset(init_dataset_path));
      std::ostringstream body;
      for (const auto& s : scenarios) {
        const auto pred = mlp::predict_dispatch(model, net, s, init);
        json line = json::parse(scen::solution_to_json(pred.solution));
        line["elapsed_ms"] = pred.elapsed_ms;
        body << line.dump() << "\n";
      }
      if (out_path.empty())
        std::cout << body.str();
      else
        write_file(out_path, body.str());
      return 0;
    }

    if (*eval_cmd) {
      const auto net = net::load_case_file(case_path);
      const auto model = mlp::load_model(model_path);
      if (test_csv.empty() == test_labeled.empty())
        throw std::runtime_error("pass exactly one of --test / --test-labeled");
      announce("eval", resolve_seed(0), model_path + test_csv + test_labeled);

      scen::LabeledDataset test_set;
      if (!test_labeled.empty()) {
        test_set = scen::load_dataset(test_labeled);
      } else {
        const auto scenarios = scen::read_scenarios_csv(test_csv, net.pq_bus_ids());
        test_set = scen::label(scenarios, net, scen::WarmPolicy::BASE, jobs);
      }
      if (test_set.size() == 0) throw std::runtime_error("empty test set");

      const pf::PfInit init = init_from_dataset(test_set);
      const std::size_t n = test_set.size();
      std::vector<opf::ViolationReport> reports(n);
      std::vector<double> model_costs(n, 0.0);
      std::vector<char> usable(n, 0);
      parallel_for(n, jobs, [&](std::size_t i) {
        const auto pred =
            mlp::predict_dispatch(model, net, test_set.scenarios[i], init);
        if (pred.solution.status == opf::SolveStatus::OPTIMAL) {
          reports[i] = opf::check_feasibility(net, test_set.scenarios[i],
                                              pred.solution, feas_tol);
          model_costs[i] = pred.solution.objective;
          usable[i] = 1;
        }
      });
      std::vector<double> cm, co;
      for (std::size_t i = 0; i < n; ++i)
        if (usable[i] && reports[i].feasible) {
          cm.push_back(model_costs[i]);
          co.push_back(test_set.solutions[i].objective);
        }

      eval::MetricsReport report;
      report.name = std::filesystem::path(model_path).stem().string();
      report.scheme = "EVAL";
      report.n_test = static_cast<int>(n);
      report.eta_fea = eval::feasibility_rate(reports);
      if (!cm.empty()) report.eta_opt = eval::optimality_loss(cm, co);
      report.n_infeasible_pred = static_cast<int>(n - cm.size());
      const auto dev = eval::deviation_summary(
          reports, eval::DeltaConvention::VIOLATED_ONLY, feas_tol);
      report.delta_pg = dev.dp_g;
      report.delta_qg = dev.dq_g;
      report.delta_v = dev.dv;
      report.delta_s = dev.ds;

      const std::size_t n_time = std::min<std::size_t>(
          static_cast<std::size_t>(std::max(timing_samples, 1)), n);
      std::vector<double> t0s, tms;
      for (std::size_t i = 0; i < n_time; ++i) {
        const auto start = std::chrono::steady_clock::now();
        (void)opf::solve_opf(net, test_set.scenarios[i]);
        t0s.push_back(std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start)
                          .count());
        tms.push_back(
            mlp::predict_dispatch(model, net, test_set.scenarios[i], init)
                .elapsed_ms);
      }
      report.eta_sp = eval::speedup(t0s, tms);
      report.t0_ms =
          std::accumulate(t0s.begin(), t0s.end(), 0.0) / double(t0s.size());
      report.tm_ms =
          std::accumulate(tms.begin(), tms.end(), 0.0) / double(tms.size());

      write_file(out_path, eval::report_to_json(report) + "\n");
      std::cout << eval::report_csv_header() << "\n"
                << eval::report_csv_row(report) << "\n";
      return 0;
    }

    if (*exp_run_cmd) {
      auto spec = eval::load_experiment_spec(exp_spec_path);
      spec.seed = resolve_seed(spec.seed);
      spec.jobs = jobs;
      announce("experiment run", spec.seed, read_file(exp_spec_path));
      const auto net = net::load_case_file(spec.case_path);
      const auto artifacts = eval::run_experiment(spec, net);

      std::filesystem::create_directories(out_dir);
      const auto base = (std::filesystem::path(out_dir) / spec.name).string();
      write_file(base + "-report.json",
                 eval::report_to_json(artifacts.report) + "\n");
      write_file(base + "-report.csv",
                 eval::report_csv_header() + "\n" +
                     eval::report_csv_row(artifacts.report) + "\n");
      mlp::save_model(artifacts.model, base + "-model.bin", spec.seed);
      std::cout << eval::report_csv_header() << "\n"
                << eval::report_csv_row(artifacts.report) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "gridlearn: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
