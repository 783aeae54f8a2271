#pragma once

// Load-distribution fitting and scenario synthesis for the three sampling
// families (independent uniform, independent normal, multivariate normal over
// the concatenated P‖Q vector), plus ground-truth labeling and chronological
// splits. Randomness: mt19937_64 with in-repo uniform/Box-Muller transforms
// (see docs), reproducible bit-for-bit for a fixed seed.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridlearn/acopf.hpp"
#include "gridlearn/loadscenario.hpp"
#include "gridlearn/netmodel.hpp"

namespace gridlearn::scen {

enum class Family { UNIFORM_INDEP, NORMAL_INDEP, MVN };

std::string to_string(Family family);
Family family_from(const std::string& s);

/// Parameters over the 2*|PQ| concatenated load vector [P ‖ Q].
struct DistributionSpec {
  Family family = Family::MVN;
  std::vector<int> pq_bus_ids;  // dimension labels, canonical PQ order

  Eigen::VectorXd lo, hi;      // UNIFORM_INDEP
  Eigen::VectorXd mean, sdev;  // NORMAL_INDEP
  Eigen::VectorXd mvn_mean;    // MVN
  Eigen::MatrixXd cov;
  Eigen::MatrixXd chol;        // lower-triangular factor of the jittered cov

  Eigen::Index dims() const;
};

DistributionSpec fit(Family family, const std::vector<LoadScenario>& historical,
                     const std::vector<int>& pq_bus_ids = {});

std::vector<LoadScenario> sample(const DistributionSpec& spec, int n,
                                 std::uint64_t seed);

/// Pearson correlation between the active loads at two PQ positions.
double correlation(const std::vector<LoadScenario>& historical, int dim_i, int dim_j);

enum class WarmPolicy { FLAT, BASE };

struct LabeledDataset {
  std::vector<LoadScenario> scenarios;          // only successfully labeled
  std::vector<opf::DispatchSolution> solutions;  // aligned with scenarios
  std::vector<int> excluded;                     // input indices that failed

  std::size_t size() const { return scenarios.size(); }
};

/// Pairs each scenario with its OPTIMAL dispatch; failures are excluded and
/// their input indices reported. BASE warm-starts every solve from the
/// solution of the mean scenario, keeping results schedule-independent.
LabeledDataset label(const std::vector<LoadScenario>& scenarios,
                     const net::Network& net, WarmPolicy policy = WarmPolicy::BASE,
                     unsigned jobs = 0);

enum class SplitPolicy { ALL, FIRST_HALF_TRAIN };

/// ALL: test = the full set (train likewise). FIRST_HALF_TRAIN: chronological
/// ceil(n/2) / floor(n/2) split; every pair must carry a tag.
std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& dataset,
                                                SplitPolicy policy);

// --- persistence -----------------------------------------------------------

/// CSV with header tag,p_<id>...,q_<id>... , one row per scenario.
void write_scenarios_csv(const std::string& path,
                         const std::vector<LoadScenario>& scenarios,
                         const std::vector<int>& pq_bus_ids);
std::vector<LoadScenario> read_scenarios_csv(const std::string& path,
                                             const std::vector<int>& expected_pq_ids);

void save_spec(const DistributionSpec& spec, const std::string& path);
DistributionSpec load_spec(const std::string& path);

/// JSON lines: a header record, then one {scenario, solution} pair per line.
void save_dataset(const LabeledDataset& dataset, const std::string& path,
                  const std::vector<int>& pq_bus_ids);
LabeledDataset load_dataset(const std::string& path);

std::string solution_to_json(const opf::DispatchSolution& sol);
opf::DispatchSolution solution_from_json(const std::string& text);

}  // namespace gridlearn::scen
