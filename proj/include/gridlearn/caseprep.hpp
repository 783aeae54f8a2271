#pragma once

// Parameter-estimation heuristics that complete a topology-only case into an
// OPF-ready one: cost functions by fuel and size, reactive limits as a
// fraction of active capacity, branch limits by quantile matching against a
// reference network, and point capacity boosts.

#include <map>
#include <string>
#include <vector>

#include "gridlearn/netmodel.hpp"

namespace gridlearn::caseprep {

// Linear hydro cost coefficients (currency per MWh); small units cost 1.5x.
inline constexpr double kHydroCostLarge = 6.724778;
inline constexpr double kHydroCostSmall = 10.087167;
inline constexpr double kDefaultHydroThresholdMw = 100.0;

struct GasCostEntry {
  double capacity_mw = 0.0;
  net::CostFunction cost;
};

/// HYDRO generators get the fixed linear cost (large or small tier by the
/// capacity threshold); GAS generators copy the nearest-capacity entry from
/// the reference table. Other fuels are left untouched. Idempotent.
std::vector<net::Generator> assign_cost_functions(
    std::vector<net::Generator> gens, double threshold_mw,
    const std::vector<GasCostEntry>& gas_table, double base_mva);

/// q_min = -fraction * p_max, q_max = +fraction * p_max, then per-bus
/// multipliers from `overrides` widen selected buses.
std::vector<net::Generator> estimate_reactive_limits(
    std::vector<net::Generator> gens, double fraction,
    const std::map<int, double>& overrides);

/// Rank-matched limits: the branch whose maximum experienced flow sits at
/// empirical quantile q receives the q-th quantile of `reference_limits`.
/// Ties get the mean rank. Returns one s_max per entry of `max_flows`.
std::vector<double> estimate_branch_limits_by_quantile(
    const std::vector<double>& max_flows,
    const std::vector<double>& reference_limits);

/// Entries of `limits` that fail to cover the observed flow (positions where
/// limits[i] < max_flows[i]).
std::vector<std::size_t> uncovered_branches(const std::vector<double>& max_flows,
                                            const std::vector<double>& limits);

/// Adds delta_p (MW) to the capacity of the first generator at the bus.
net::Network boost_capacity(const net::Network& net, int bus_id, double delta_p_mw);

/// Sidecar configuration for the `case prep` pipeline.
struct PrepConfig {
  double hydro_threshold_mw = kDefaultHydroThresholdMw;
  std::vector<GasCostEntry> gas_cost_table;
  double q_fraction = 0.5;
  std::map<int, double> q_overrides;           // bus id -> extra multiplier
  std::vector<double> reference_limits;        // per-unit, for quantile matching
  std::vector<std::pair<int, double>> boosts;  // (bus id, delta MW)
};

PrepConfig load_prep_config(const std::string& path);

/// Applies cost assignment, reactive-limit estimation and boosts in order.
/// Branch limits are only touched when `max_flows` is non-empty.
net::Network prepare_case(const net::Network& net, const PrepConfig& config,
                          const std::vector<double>& max_flows = {});

}  // namespace gridlearn::caseprep
