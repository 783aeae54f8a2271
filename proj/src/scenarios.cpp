#include "gridlearn/scenarios.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "gridlearn/parallel.hpp"
#include "gridlearn/rng.hpp"

namespace gridlearn::scen {

using nlohmann::json;

std::string to_string(Family family) {
  switch (family) {
    case Family::UNIFORM_INDEP: return "UNIFORM_INDEP";
    case Family::NORMAL_INDEP: return "NORMAL_INDEP";
    case Family::MVN: return "MVN";
  }
  return "MVN";
}

Family family_from(const std::string& s) {
  if (s == "UNIFORM_INDEP") return Family::UNIFORM_INDEP;
  if (s == "NORMAL_INDEP") return Family::NORMAL_INDEP;
  if (s == "MVN") return Family::MVN;
  throw std::invalid_argument("unknown distribution family '" + s + "'");
}

Eigen::Index DistributionSpec::dims() const {
  switch (family) {
    case Family::UNIFORM_INDEP: return lo.size();
    case Family::NORMAL_INDEP: return mean.size();
    case Family::MVN: return mvn_mean.size();
  }
  return 0;
}

namespace {

Eigen::MatrixXd stack_samples(const std::vector<LoadScenario>& historical) {
  const Eigen::Index n = static_cast<Eigen::Index>(historical.size());
  const Eigen::Index d = historical.front().p_load.size();
  Eigen::MatrixXd x(n, 2 * d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& s = historical[static_cast<std::size_t>(i)];
    if (s.p_load.size() != d || s.q_load.size() != d)
      throw std::invalid_argument("inconsistent scenario dimensions");
    x.row(i).head(d) = s.p_load;
    x.row(i).tail(d) = s.q_load;
  }
  return x;
}

// Lower Cholesky factor with the jitter schedule: 1e-10*trace/d on the
// diagonal, escalated tenfold up to 1e-6*trace/d if factorization fails.
Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& cov) {
  const Eigen::Index d = cov.rows();
  const double trace = cov.trace();
  if (trace <= 0.0) return Eigen::MatrixXd::Zero(d, d);
  double jitter = 1e-10 * trace / static_cast<double>(d);
  const double cap = 1e-6 * trace / static_cast<double>(d);
  for (;;) {
    Eigen::MatrixXd work = cov;
    work.diagonal().array() += jitter;
    const Eigen::LLT<Eigen::MatrixXd> llt(work);
    if (llt.info() == Eigen::Success) return llt.matrixL();
    if (jitter >= cap)
      throw std::runtime_error("covariance factorization failed at maximum jitter");
    jitter *= 10.0;
  }
}

LoadScenario vector_to_scenario(const Eigen::VectorXd& v) {
  const Eigen::Index d = v.size() / 2;
  LoadScenario s;
  s.p_load = v.head(d);
  s.q_load = v.tail(d);
  return s;
}

}  // namespace

DistributionSpec fit(Family family, const std::vector<LoadScenario>& historical,
                     const std::vector<int>& pq_bus_ids) {
  if (historical.size() < 2)
    throw std::invalid_argument("fit needs at least 2 historical samples");

  const Eigen::MatrixXd x = stack_samples(historical);
  const Eigen::Index n = x.rows(), d = x.cols();

  DistributionSpec spec;
  spec.family = family;
  spec.pq_bus_ids = pq_bus_ids;
  switch (family) {
    case Family::UNIFORM_INDEP:
      spec.lo = x.colwise().minCoeff();
      spec.hi = x.colwise().maxCoeff();
      break;
    case Family::NORMAL_INDEP: {
      spec.mean = x.colwise().mean();
      Eigen::MatrixXd centered = x.rowwise() - spec.mean.transpose();
      spec.sdev = (centered.array().square().colwise().sum() /
                   static_cast<double>(n - 1))
                      .sqrt();
      break;
    }
    case Family::MVN: {
      spec.mvn_mean = x.colwise().mean();
      const Eigen::MatrixXd centered = x.rowwise() - spec.mvn_mean.transpose();
      spec.cov = centered.transpose() * centered / static_cast<double>(n - 1);
      spec.chol = jittered_cholesky(spec.cov);
      (void)d;
      break;
    }
  }
  return spec;
}

std::vector<LoadScenario> sample(const DistributionSpec& spec, int n,
                                 std::uint64_t seed) {
  rng::Engine eng(seed);
  const Eigen::Index d = spec.dims();
  std::vector<LoadScenario> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd v(d);
    switch (spec.family) {
      case Family::UNIFORM_INDEP:
        for (Eigen::Index i = 0; i < d; ++i)
          v[i] = rng::uniform(eng, spec.lo[i], spec.hi[i]);
        break;
      case Family::NORMAL_INDEP:
        for (Eigen::Index i = 0; i < d; ++i)
          v[i] = spec.mean[i] + spec.sdev[i] * rng::normal01(eng);
        break;
      case Family::MVN:
        v = spec.mvn_mean + spec.chol * rng::normal_vector(eng, d);
        break;
    }
    LoadScenario s = vector_to_scenario(v);
    s.tag = "s" + std::to_string(k);
    out.push_back(std::move(s));
  }
  return out;
}

double correlation(const std::vector<LoadScenario>& historical, int dim_i, int dim_j) {
  if (historical.size() < 2)
    throw std::invalid_argument("correlation needs at least 2 samples");
  const Eigen::Index n = static_cast<Eigen::Index>(historical.size());
  Eigen::VectorXd a(n), b(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    a[k] = historical[static_cast<std::size_t>(k)].p_load[dim_i];
    b[k] = historical[static_cast<std::size_t>(k)].p_load[dim_j];
  }
  const double ma = a.mean(), mb = b.mean();
  const double va = (a.array() - ma).square().sum();
  const double vb = (b.array() - mb).square().sum();
  if (va == 0.0 || vb == 0.0)
    throw std::invalid_argument("zero variance in correlation input");
  return ((a.array() - ma) * (b.array() - mb)).sum() / std::sqrt(va * vb);
}

LabeledDataset label(const std::vector<LoadScenario>& scenarios,
                     const net::Network& net, WarmPolicy policy, unsigned jobs) {
  LabeledDataset out;
  if (scenarios.empty()) return out;

  opf::WarmStart warm;
  if (policy == WarmPolicy::BASE) {
    LoadScenario mean_scenario;
    mean_scenario.p_load = Eigen::VectorXd::Zero(scenarios.front().p_load.size());
    mean_scenario.q_load = Eigen::VectorXd::Zero(scenarios.front().q_load.size());
    for (const auto& s : scenarios) {
      mean_scenario.p_load += s.p_load;
      mean_scenario.q_load += s.q_load;
    }
    mean_scenario.p_load /= static_cast<double>(scenarios.size());
    mean_scenario.q_load /= static_cast<double>(scenarios.size());
    const auto base = opf::solve_opf(net, mean_scenario);
    if (base.status == opf::SolveStatus::OPTIMAL) warm.solution = base;
  }

  std::vector<opf::DispatchSolution> solutions(scenarios.size());
  parallel_for(scenarios.size(), jobs, [&](std::size_t i) {
    solutions[i] = opf::solve_opf(net, scenarios[i], warm);
  });

  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    if (solutions[i].status == opf::SolveStatus::OPTIMAL) {
      out.scenarios.push_back(scenarios[i]);
      out.solutions.push_back(std::move(solutions[i]));
    } else {
      out.excluded.push_back(static_cast<int>(i));
    }
  }
  return out;
}

std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset,
                                                SplitPolicy policy) {
  if (policy == SplitPolicy::ALL) return {dataset, dataset};

  for (const auto& s : dataset.scenarios)
    if (s.tag.empty())
      throw std::invalid_argument("chronological split requires time-tagged data");

  const std::size_t n = dataset.size();
  const std::size_t n_train = (n + 1) / 2;
  LabeledDataset train, test;
  for (std::size_t i = 0; i < n; ++i) {
    auto& side = i < n_train ? train : test;
    side.scenarios.push_back(dataset.scenarios[i]);
    side.solutions.push_back(dataset.solutions[i]);
  }
  return {train, test};
}

// --- persistence -----------------------------------------------------------

void write_scenarios_csv(const std::string& path,
                         const std::vector<LoadScenario>& scenarios,
                         const std::vector<int>& pq_bus_ids) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "tag";
  for (int id : pq_bus_ids) out << ",p_" << id;
  for (int id : pq_bus_ids) out << ",q_" << id;
  out << '\n';
  out.precision(17);
  for (const auto& s : scenarios) {
    out << s.tag;
    for (Eigen::Index i = 0; i < s.p_load.size(); ++i) out << ',' << s.p_load[i];
    for (Eigen::Index i = 0; i < s.q_load.size(); ++i) out << ',' << s.q_load[i];
    out << '\n';
  }
}

std::vector<LoadScenario> read_scenarios_csv(const std::string& path,
                                             const std::vector<int>& expected_pq_ids) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("scenario csv '" + path + "' is empty");

  std::vector<std::string> header;
  {
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) header.push_back(cell);
  }
  const std::size_t d = expected_pq_ids.size();
  if (header.size() != 1 + 2 * d || header[0] != "tag")
    throw std::runtime_error("scenario csv header does not match the PQ bus set");
  for (std::size_t k = 0; k < d; ++k) {
    if (header[1 + k] != "p_" + std::to_string(expected_pq_ids[k]))
      throw std::runtime_error("scenario csv column '" + header[1 + k] +
                               "' does not match bus " +
                               std::to_string(expected_pq_ids[k]));
    if (header[1 + d + k] != "q_" + std::to_string(expected_pq_ids[k]))
      throw std::runtime_error("scenario csv column '" + header[1 + d + k] +
                               "' does not match bus " +
                               std::to_string(expected_pq_ids[k]));
  }

  std::vector<LoadScenario> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    LoadScenario s;
    s.p_load.resize(static_cast<Eigen::Index>(d));
    s.q_load.resize(static_cast<Eigen::Index>(d));
    if (!std::getline(row, cell, ','))
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": short row");
    s.tag = cell;
    for (std::size_t k = 0; k < 2 * d; ++k) {
      if (!std::getline(row, cell, ','))
        throw std::runtime_error(path + ":" + std::to_string(line_no) + ": short row");
      const double value = std::stod(cell);
      if (k < d)
        s.p_load[static_cast<Eigen::Index>(k)] = value;
      else
        s.q_load[static_cast<Eigen::Index>(k - d)] = value;
    }
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

json vector_to_json(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i)
    v[i] = arr[static_cast<std::size_t>(i)].get<double>();
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& rows) {
  const Eigen::Index r = static_cast<Eigen::Index>(rows.size());
  const Eigen::Index c = r > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j)
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]
                    .get<double>();
  return m;
}

json solution_to_json_obj(const opf::DispatchSolution& sol) {
  return json{{"p_gen", vector_to_json(sol.p_gen)},
              {"q_gen", vector_to_json(sol.q_gen)},
              {"v_mag", vector_to_json(sol.v_mag)},
              {"theta", vector_to_json(sol.theta)},
              {"objective", sol.objective},
              {"status", opf::to_string(sol.status)},
              {"iterations", sol.iterations}};
}

opf::DispatchSolution solution_from_json_obj(const json& j) {
  opf::DispatchSolution sol;
  sol.p_gen = vector_from_json(j.at("p_gen"));
  sol.q_gen = vector_from_json(j.at("q_gen"));
  sol.v_mag = vector_from_json(j.at("v_mag"));
  sol.theta = vector_from_json(j.at("theta"));
  sol.objective = j.at("objective").get<double>();
  sol.status = opf::solve_status_from(j.at("status").get<std::string>());
  sol.iterations = j.value("iterations", 0);
  return sol;
}

}  // namespace

void save_spec(const DistributionSpec& spec, const std::string& path) {
  json doc{{"family", to_string(spec.family)}, {"pq_bus_ids", spec.pq_bus_ids}};
  switch (spec.family) {
    case Family::UNIFORM_INDEP:
      doc["lo"] = vector_to_json(spec.lo);
      doc["hi"] = vector_to_json(spec.hi);
      break;
    case Family::NORMAL_INDEP:
      doc["mean"] = vector_to_json(spec.mean);
      doc["sdev"] = vector_to_json(spec.sdev);
      break;
    case Family::MVN:
      doc["mean"] = vector_to_json(spec.mvn_mean);
      doc["cov"] = matrix_to_json(spec.cov);
      doc["chol"] = matrix_to_json(spec.chol);
      break;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << doc.dump(2) << '\n';
}

DistributionSpec load_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  json doc = json::parse(in);
  DistributionSpec spec;
  spec.family = family_from(doc.at("family").get<std::string>());
  spec.pq_bus_ids = doc.value("pq_bus_ids", std::vector<int>{});
  switch (spec.family) {
    case Family::UNIFORM_INDEP:
      spec.lo = vector_from_json(doc.at("lo"));
      spec.hi = vector_from_json(doc.at("hi"));
      break;
    case Family::NORMAL_INDEP:
      spec.mean = vector_from_json(doc.at("mean"));
      spec.sdev = vector_from_json(doc.at("sdev"));
      break;
    case Family::MVN:
      spec.mvn_mean = vector_from_json(doc.at("mean"));
      spec.cov = matrix_from_json(doc.at("cov"));
      spec.chol = matrix_from_json(doc.at("chol"));
      break;
  }
  return spec;
}

void save_dataset(const LabeledDataset& dataset, const std::string& path,
                  const std::vector<int>& pq_bus_ids) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << json{{"type", "gridlearn-dataset"},
              {"pq_bus_ids", pq_bus_ids},
              {"excluded", dataset.excluded}}
             .dump()
      << '\n';
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    out << json{{"tag", dataset.scenarios[i].tag},
                {"p_load", vector_to_json(dataset.scenarios[i].p_load)},
                {"q_load", vector_to_json(dataset.scenarios[i].q_load)},
                {"solution", solution_to_json_obj(dataset.solutions[i])}}
               .dump()
        << '\n';
  }
}

LabeledDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("dataset '" + path + "' is empty");
  const json header = json::parse(line);
  if (header.value("type", "") != "gridlearn-dataset")
    throw std::runtime_error("'" + path + "' is not a dataset file");

  LabeledDataset out;
  out.excluded = header.value("excluded", std::vector<int>{});
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    LoadScenario s;
    s.tag = j.value("tag", "");
    s.p_load = vector_from_json(j.at("p_load"));
    s.q_load = vector_from_json(j.at("q_load"));
    out.scenarios.push_back(std::move(s));
    out.solutions.push_back(solution_from_json_obj(j.at("solution")));
  }
  return out;
}

std::string solution_to_json(const opf::DispatchSolution& sol) {
  return solution_to_json_obj(sol).dump();
}

opf::DispatchSolution solution_from_json(const std::string& text) {
  return solution_from_json_obj(json::parse(text));
}

}  // namespace gridlearn::scen
