#pragma once

// Network data model and per-unit case format. A Network is immutable after
// construction and safe to share across concurrent readers.

#include <array>
#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

namespace gridlearn::net {

enum class BusKind { PQ, PV, SLACK };
enum class Fuel { HYDRO, GAS, WIND, OTHER };

std::string to_string(BusKind kind);
std::string to_string(Fuel fuel);
BusKind bus_kind_from(const std::string& s);
Fuel fuel_from(const std::string& s);

/// Polynomial generation cost c0 + c1*P + c2*P^2 with P in MW.
struct CostFunction {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;

  double value(double p_mw) const { return c0 + p_mw * (c1 + c2 * p_mw); }
  double gradient(double p_mw) const { return c1 + 2.0 * c2 * p_mw; }
};

struct Bus {
  int id = 0;
  BusKind kind = BusKind::PQ;
  double v_min = 0.0;  // per-unit voltage magnitude bounds
  double v_max = 0.0;
  double base_kv = 0.0;
  std::optional<std::array<double, 2>> coord;  // planar (x, y)
};

struct Generator {
  int bus_id = 0;
  double p_min = 0.0;  // per-unit
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  CostFunction cost;  // evaluated on MW
  Fuel fuel = Fuel::OTHER;
};

struct Branch {
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;      // per-unit series resistance
  double x = 0.0;      // per-unit series reactance
  double b_sh = 0.0;   // total per-unit charging susceptance
  double s_max = 0.0;  // per-unit apparent-power limit, 0 = unlimited
  double tap = 1.0;    // off-nominal ratio on the from side
};

struct CaseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Immutable bus/branch/generator container with a dense index over
/// arbitrary integer bus ids. Canonical orderings used throughout the
/// toolkit are defined here: PQ buses, PV buses and generator buses are
/// listed in ascending dense-index (i.e. file) order.
class Network {
 public:
  Network() = default;
  Network(std::vector<Bus> buses, std::vector<Generator> generators,
          std::vector<Branch> branches, double base_mva);

  const std::vector<Bus>& buses() const { return buses_; }
  const std::vector<Generator>& generators() const { return generators_; }
  const std::vector<Branch>& branches() const { return branches_; }
  double base_mva() const { return base_mva_; }
  int n_buses() const { return static_cast<int>(buses_.size()); }

  bool has_bus(int bus_id) const { return index_.count(bus_id) != 0; }
  /// Dense index of a bus id; throws CaseError on unknown ids.
  int index_of(int bus_id) const;
  /// Index of the unique slack bus; throws CaseError unless exactly one exists.
  int slack_index() const;

  const std::vector<int>& pq_indices() const { return pq_; }
  const std::vector<int>& pv_indices() const { return pv_; }  // excludes slack
  /// PV and slack buses, ascending. Voltage-setpoint order for the pipeline.
  const std::vector<int>& gen_bus_indices() const { return gen_bus_; }
  /// Generators whose bus is PV (not slack), in generator-list order.
  /// Active-setpoint order for the pipeline.
  const std::vector<int>& nonslack_gen_indices() const { return nonslack_gens_; }
  /// Generator-list positions of generators attached to a bus (dense index).
  const std::vector<int>& generators_at(int bus_index) const;

  /// Bus ids of PQ buses in canonical order (load-vector layout).
  std::vector<int> pq_bus_ids() const;

 private:
  std::vector<Bus> buses_;
  std::vector<Generator> generators_;
  std::vector<Branch> branches_;
  double base_mva_ = 100.0;

  std::unordered_map<int, int> index_;  // first occurrence wins on duplicates
  std::vector<int> pq_, pv_, gen_bus_, nonslack_gens_, slack_all_;
  std::vector<std::vector<int>> gens_at_;

  friend std::vector<std::string> validate(const Network&);
};

/// Parse a JSON case document. All quantities are per-unit on return.
/// Throws CaseError naming the offending field or element.
Network load_case(const std::string& text);
Network load_case_file(const std::string& path);

/// Serialize to the JSON case format; load_case(save_case(n)) == n.
std::string save_case(const Network& net);
void save_case_file(const Network& net, const std::string& path);

/// Structural invariant violations, one entry per problem. Empty iff the
/// network is well formed.
std::vector<std::string> validate(const Network& net);

/// Bus admittance matrix; pi-model branches with the tap on the from side.
Eigen::MatrixXcd build_ybus(const Network& net);

}  // namespace gridlearn::net
