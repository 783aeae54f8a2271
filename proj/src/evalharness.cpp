#include "gridlearn/evalharness.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "gridlearn/parallel.hpp"
#include "gridlearn/rng.hpp"

namespace gridlearn::eval {

using nlohmann::json;

double optimality_loss(const std::vector<double>& model_costs,
                       const std::vector<double>& oracle_costs) {
  if (model_costs.size() != oracle_costs.size())
    throw std::invalid_argument("cost vectors must have equal length");
  if (model_costs.empty())
    throw std::invalid_argument("no comparable cost pairs");
  double acc = 0.0;
  for (std::size_t i = 0; i < model_costs.size(); ++i) {
    if (!(oracle_costs[i] > 0))
      throw std::invalid_argument("oracle costs must be positive");
    acc += std::abs(model_costs[i] - oracle_costs[i]) / oracle_costs[i];
  }
  return 100.0 * acc / static_cast<double>(model_costs.size());
}

double feasibility_rate(const std::vector<opf::ViolationReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("no feasibility reports");
  std::size_t feasible = 0;
  for (const auto& r : reports) feasible += r.feasible ? 1 : 0;
  return 100.0 * static_cast<double>(feasible) / static_cast<double>(reports.size());
}

DeviationSummary deviation_summary(const std::vector<opf::ViolationReport>& reports,
                                   DeltaConvention convention, double tol) {
  if (reports.empty()) throw std::invalid_argument("no violation reports");
  DeviationSummary out;
  auto mean_of = [&](auto select) {
    double acc = 0.0;
    std::size_t count = 0;
    for (const auto& r : reports) {
      const double v = select(r);
      if (convention == DeltaConvention::ALL_SAMPLES) {
        acc += v;
        ++count;
      } else if (v > tol) {
        acc += v;
        ++count;
      }
    }
    return count > 0 ? acc / static_cast<double>(count) : 0.0;
  };
  out.dp_g = mean_of([](const opf::ViolationReport& r) { return r.dp_g; });
  out.dq_g = mean_of([](const opf::ViolationReport& r) { return r.dq_g; });
  out.dv = mean_of([](const opf::ViolationReport& r) { return r.dv; });
  out.ds = mean_of([](const opf::ViolationReport& r) { return r.ds; });
  return out;
}

double speedup(const std::vector<double>& t0_samples,
               const std::vector<double>& tm_samples) {
  if (t0_samples.size() != tm_samples.size() || t0_samples.empty())
    throw std::invalid_argument("timing vectors must be non-empty and equal length");
  double acc = 0.0;
  for (std::size_t i = 0; i < t0_samples.size(); ++i) {
    if (!(t0_samples[i] > 0) || !(tm_samples[i] > 0))
      throw std::invalid_argument("timing samples must be positive");
    acc += t0_samples[i] / tm_samples[i];
  }
  return acc / static_cast<double>(t0_samples.size());
}

std::string to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::UNIFORM_INDEP: return "UNIFORM_INDEP";
    case Scheme::NORMAL_INDEP: return "NORMAL_INDEP";
    case Scheme::MVN: return "MVN";
    case Scheme::REALISTIC: return "REALISTIC";
  }
  return "MVN";
}

Scheme scheme_from(const std::string& s) {
  if (s == "UNIFORM_INDEP") return Scheme::UNIFORM_INDEP;
  if (s == "NORMAL_INDEP") return Scheme::NORMAL_INDEP;
  if (s == "MVN") return Scheme::MVN;
  if (s == "REALISTIC") return Scheme::REALISTIC;
  throw std::invalid_argument("unknown scheme '" + s + "'");
}

std::string report_to_json(const MetricsReport& r) {
  json doc{{"name", r.name},
           {"scheme", r.scheme},
           {"n_train", r.n_train},
           {"n_test", r.n_test},
           {"eta_opt_pct", r.eta_opt},
           {"eta_fea_pct", r.eta_fea},
           {"delta_pg_pu", r.delta_pg},
           {"delta_qg_pu", r.delta_qg},
           {"delta_v_pu", r.delta_v},
           {"delta_s_pu", r.delta_s},
           {"t0_ms", r.t0_ms},
           {"tm_ms", r.tm_ms},
           {"eta_sp", r.eta_sp},
           {"n_infeasible_pred", r.n_infeasible_pred},
           {"n_excluded_oracle", r.n_excluded_oracle},
           {"n_excluded_train", r.n_excluded_train},
           {"seed", r.seed}};
  return doc.dump(2);
}

MetricsReport report_from_json(const std::string& text) {
  const json doc = json::parse(text);
  MetricsReport r;
  r.name = doc.at("name").get<std::string>();
  r.scheme = doc.at("scheme").get<std::string>();
  r.n_train = doc.at("n_train").get<int>();
  r.n_test = doc.at("n_test").get<int>();
  r.eta_opt = doc.at("eta_opt_pct").get<double>();
  r.eta_fea = doc.at("eta_fea_pct").get<double>();
  r.delta_pg = doc.at("delta_pg_pu").get<double>();
  r.delta_qg = doc.at("delta_qg_pu").get<double>();
  r.delta_v = doc.at("delta_v_pu").get<double>();
  r.delta_s = doc.at("delta_s_pu").get<double>();
  r.t0_ms = doc.at("t0_ms").get<double>();
  r.tm_ms = doc.at("tm_ms").get<double>();
  r.eta_sp = doc.at("eta_sp").get<double>();
  r.n_infeasible_pred = doc.at("n_infeasible_pred").get<int>();
  r.n_excluded_oracle = doc.at("n_excluded_oracle").get<int>();
  r.n_excluded_train = doc.at("n_excluded_train").get<int>();
  r.seed = doc.at("seed").get<std::uint64_t>();
  return r;
}

std::string report_csv_header() {
  return "name,scheme,n_train,n_test,eta_opt_pct,eta_fea_pct,delta_pg_pu,"
         "delta_qg_pu,delta_v_pu,delta_s_pu,t0_ms,tm_ms,eta_sp";
}

std::string report_csv_row(const MetricsReport& r) {
  std::ostringstream oss;
  oss.precision(10);
  oss << r.name << ',' << r.scheme << ',' << r.n_train << ',' << r.n_test << ','
      << r.eta_opt << ',' << r.eta_fea << ',' << r.delta_pg << ',' << r.delta_qg
      << ',' << r.delta_v << ',' << r.delta_s << ',' << r.t0_ms << ',' << r.tm_ms
      << ',' << r.eta_sp;
  return oss.str();
}

std::vector<LoadScenario> synth_realistic(const LoadScenario& nominal, int n,
                                          double spread, double rho_bus,
                                          double rho_pq, std::uint64_t seed) {
  if (rho_bus < 0 || rho_bus > 1 || rho_pq < 0 || rho_pq > 1)
    throw std::invalid_argument("correlations must lie in [0, 1]");
  rng::Engine eng(seed);
  const Eigen::Index d = nominal.p_load.size();
  std::vector<LoadScenario> out;
  out.reserve(static_cast<std::size_t>(n));
  const double a = std::sqrt(rho_bus), b = std::sqrt(1.0 - rho_bus);
  const double c = rho_pq, e = std::sqrt(1.0 - rho_pq * rho_pq);
  for (int k = 0; k < n; ++k) {
    const double common = rng::normal01(eng);
    LoadScenario s;
    s.p_load.resize(d);
    s.q_load.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
      const double own = rng::normal01(eng);
      const double own_q = rng::normal01(eng);
      const double u = a * common + b * own;
      const double w = c * u + e * (a * common + b * own_q);
      s.p_load[i] = nominal.p_load[i] * (1.0 + spread * u);
      s.q_load[i] = nominal.q_load[i] * (1.0 + spread * w);
    }
    char tag[16];
    std::snprintf(tag, sizeof tag, "t%06d", k);
    s.tag = tag;
    out.push_back(std::move(s));
  }
  return out;
}

ExperimentSpec load_experiment_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open experiment spec '" + path + "'");
  const json doc = json::parse(in);
  const auto dir = std::filesystem::path(path).parent_path();

  ExperimentSpec spec;
  spec.name = doc.value("name", "experiment");
  spec.seed = doc.value("seed", std::uint64_t{0});
  spec.case_path = (dir / doc.at("case").get<std::string>()).string();

  const json& real = doc.at("realistic");
  if (real.contains("csv")) {
    spec.realistic_csv = (dir / real.at("csv").get<std::string>()).string();
  } else {
    const json& synth = real.at("synthetic");
    spec.realistic_n = synth.at("n").get<int>();
    spec.spread = synth.value("spread", 0.10);
    spec.rho_bus = synth.value("rho_bus", 0.7);
    spec.rho_pq = synth.value("rho_pq", 0.9);
  }

  const json& scheme = doc.at("scheme");
  spec.scheme = scheme_from(scheme.at("family").get<std::string>());
  spec.train_samples = scheme.value("train_samples", 0);
  spec.split = doc.value("split", std::string("ALL")) == "FIRST_HALF_TRAIN"
                   ? scen::SplitPolicy::FIRST_HALF_TRAIN
                   : scen::SplitPolicy::ALL;

  if (doc.contains("train")) {
    const json& t = doc["train"];
    spec.train.hidden = t.value("hidden", spec.train.hidden);
    spec.train.epochs = t.value("epochs", spec.train.epochs);
    spec.train.lr_start = t.value("lr_start", spec.train.lr_start);
    spec.train.lr_end = t.value("lr_end", spec.train.lr_end);
    spec.train.penalty_start_epoch =
        t.value("penalty_start_epoch", spec.train.penalty_start_epoch);
    spec.train.penalty_weight = t.value("penalty_weight", spec.train.penalty_weight);
    spec.train.zo_delta = t.value("zo_delta", spec.train.zo_delta);
    spec.train.batch_size = t.value("batch_size", spec.train.batch_size);
    spec.train.nonconverged_penalty =
        t.value("nonconverged_penalty", spec.train.nonconverged_penalty);
  }
  if (doc.contains("eval")) {
    spec.feas_tol = doc["eval"].value("feas_tol", spec.feas_tol);
    spec.timing_samples = doc["eval"].value("timing_samples", spec.timing_samples);
  }

  // nominal loads in MW/MVAr keyed by bus id; converted against the case later
  if (doc.contains("nominal")) spec.nominal_json = doc["nominal"].dump();
  return spec;
}

namespace {

LoadScenario resolve_nominal(const ExperimentSpec& spec, const net::Network& net) {
  LoadScenario nominal;
  const auto pq_ids = net.pq_bus_ids();
  nominal.p_load = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pq_ids.size()));
  nominal.q_load = Eigen::VectorXd::Zero(nominal.p_load.size());
  if (spec.nominal_json.empty()) {
    if (spec.nominal.p_load.size() == nominal.p_load.size()) return spec.nominal;
    throw std::runtime_error("experiment spec lacks nominal loads");
  }
  const json nom = json::parse(spec.nominal_json);
  const double base = net.base_mva();
  for (const auto& [key, value] : nom.at("p_mw").items()) {
    const int bus = std::stoi(key);
    const auto it = std::find(pq_ids.begin(), pq_ids.end(), bus);
    if (it == pq_ids.end())
      throw std::runtime_error("nominal load names non-PQ bus " + key);
    nominal.p_load[it - pq_ids.begin()] = value.get<double>() / base;
  }
  for (const auto& [key, value] : nom.at("q_mvar").items()) {
    const int bus = std::stoi(key);
    const auto it = std::find(pq_ids.begin(), pq_ids.end(), bus);
    if (it == pq_ids.end())
      throw std::runtime_error("nominal load names non-PQ bus " + key);
    nominal.q_load[it - pq_ids.begin()] = value.get<double>() / base;
  }
  return nominal;
}

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start)
        .count();
  }
};

double median3(double a, double b, double c) {
  return std::max(std::min(a, b), std::min(std::max(a, b), c));
}

}  // namespace

ExperimentArtifacts run_experiment(const ExperimentSpec& spec, const net::Network& net) {
  // 1. realistic samples
  std::vector<LoadScenario> realistic;
  if (!spec.realistic_csv.empty()) {
    realistic = scen::read_scenarios_csv(spec.realistic_csv, net.pq_bus_ids());
  } else {
    realistic = synth_realistic(resolve_nominal(spec, net), spec.realistic_n,
                                spec.spread, spec.rho_bus, spec.rho_pq,
                                rng::derive_seed(spec.seed, "realistic"));
  }

  // 2. reference labels for the realistic set
  const scen::LabeledDataset labeled_realistic =
      scen::label(realistic, net, scen::WarmPolicy::BASE, spec.jobs);

  MetricsReport report;
  report.name = spec.name;
  report.scheme = to_string(spec.scheme);
  report.seed = spec.seed;
  report.n_excluded_oracle = static_cast<int>(labeled_realistic.excluded.size());

  // 3. training data per scheme
  scen::LabeledDataset train_set, test_set;
  if (spec.scheme == Scheme::REALISTIC) {
    auto [train, test] = scen::split(labeled_realistic,
                                     scen::SplitPolicy::FIRST_HALF_TRAIN);
    train_set = std::move(train);
    test_set = std::move(test);
  } else {
    const scen::Family family = spec.scheme == Scheme::UNIFORM_INDEP
                                    ? scen::Family::UNIFORM_INDEP
                                    : spec.scheme == Scheme::NORMAL_INDEP
                                          ? scen::Family::NORMAL_INDEP
                                          : scen::Family::MVN;
    const auto fitted =
        scen::fit(family, labeled_realistic.scenarios, net.pq_bus_ids());
    const auto synthetic = scen::sample(fitted, spec.train_samples,
                                        rng::derive_seed(spec.seed, "train-sample"));
    train_set = scen::label(synthetic, net, scen::WarmPolicy::BASE, spec.jobs);
    test_set = scen::split(labeled_realistic, spec.split).second;
  }
  report.n_excluded_train = static_cast<int>(train_set.excluded.size());
  report.n_train = static_cast<int>(train_set.size());
  report.n_test = static_cast<int>(test_set.size());
  if (train_set.size() == 0) throw std::runtime_error("no labeled training samples");
  if (test_set.size() == 0) throw std::runtime_error("no labeled test samples");

  // 4. train
  mlp::TrainConfig train_config = spec.train;
  train_config.seed = rng::derive_seed(spec.seed, "train");
  train_config.jobs = spec.jobs;
  auto [model, history] = mlp::train(train_set, net, train_config);

  // embedded power-flow init: mean dependent variables of the training labels
  std::vector<pf::PfSolution> train_states;
  train_states.reserve(train_set.size());
  for (const auto& sol : train_set.solutions) {
    pf::PfSolution s;
    s.v_mag = sol.v_mag;
    s.theta = sol.theta;
    train_states.push_back(std::move(s));
  }
  const pf::PfInit init = pf::mean_init(train_states);

  // 5. evaluate
  const std::size_t n_test = test_set.size();
  std::vector<opf::ViolationReport> reports(n_test);
  std::vector<double> model_costs(n_test, 0.0);
  std::vector<char> usable(n_test, 0);
  parallel_for(n_test, spec.jobs, [&](std::size_t i) {
    const auto pred =
        mlp::predict_dispatch(model, net, test_set.scenarios[i], init);
    if (pred.solution.status == opf::SolveStatus::OPTIMAL) {
      reports[i] = opf::check_feasibility(net, test_set.scenarios[i], pred.solution,
                                          spec.feas_tol);
      model_costs[i] = pred.solution.objective;
      usable[i] = 1;
    } else {
      reports[i].feasible = false;  // embedded power flow failed
    }
  });

  std::vector<double> comparable_model, comparable_oracle;
  for (std::size_t i = 0; i < n_test; ++i) {
    if (!usable[i] || !reports[i].feasible) continue;
    comparable_model.push_back(model_costs[i]);
    comparable_oracle.push_back(test_set.solutions[i].objective);
  }
  report.n_infeasible_pred = static_cast<int>(n_test - comparable_model.size());
  report.eta_fea = feasibility_rate(reports);
  if (!comparable_model.empty())
    report.eta_opt = optimality_loss(comparable_model, comparable_oracle);
  const DeviationSummary dev = deviation_summary(reports,
                                                 DeltaConvention::VIOLATED_ONLY,
                                                 spec.feas_tol);
  report.delta_pg = dev.dp_g;
  report.delta_qg = dev.dq_g;
  report.delta_v = dev.dv;
  report.delta_s = dev.ds;

  // 6. timing on a deterministic subsample, serial, median of 3
  const std::size_t n_time =
      std::min<std::size_t>(static_cast<std::size_t>(std::max(spec.timing_samples, 1)),
                            n_test);
  std::vector<double> t0_samples, tm_samples;
  opf::WarmStart warm;
  {
    LoadScenario mean_scenario;
    mean_scenario.p_load =
        Eigen::VectorXd::Zero(test_set.scenarios.front().p_load.size());
    mean_scenario.q_load = Eigen::VectorXd::Zero(mean_scenario.p_load.size());
    for (const auto& s : test_set.scenarios) {
      mean_scenario.p_load += s.p_load;
      mean_scenario.q_load += s.q_load;
    }
    mean_scenario.p_load /= static_cast<double>(n_test);
    mean_scenario.q_load /= static_cast<double>(n_test);
    const auto base = opf::solve_opf(net, mean_scenario);
    if (base.status == opf::SolveStatus::OPTIMAL) warm.solution = base;
  }
  for (std::size_t i = 0; i < n_time; ++i) {
    double t0[3], tm[3];
    for (int rep = 0; rep < 3; ++rep) {
      Timer timer;
      (void)opf::solve_opf(net, test_set.scenarios[i], warm);
      t0[rep] = timer.ms();
    }
    for (int rep = 0; rep < 3; ++rep)
      tm[rep] = mlp::predict_dispatch(model, net, test_set.scenarios[i], init)
                    .elapsed_ms;
    t0_samples.push_back(median3(t0[0], t0[1], t0[2]));
    tm_samples.push_back(median3(tm[0], tm[1], tm[2]));
  }
  report.eta_sp = speedup(t0_samples, tm_samples);
  report.t0_ms = std::accumulate(t0_samples.begin(), t0_samples.end(), 0.0) /
                 static_cast<double>(t0_samples.size());
  report.tm_ms = std::accumulate(tm_samples.begin(), tm_samples.end(), 0.0) /
                 static_cast<double>(tm_samples.size());

  return ExperimentArtifacts{std::move(report), std::move(model), std::move(test_set)};
}

}  // namespace gridlearn::eval
