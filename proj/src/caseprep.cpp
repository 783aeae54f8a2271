#include "gridlearn/caseprep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace gridlearn::caseprep {

using nlohmann::json;

std::vector<net::Generator> assign_cost_functions(
    std::vector<net::Generator> gens, double threshold_mw,
    const std::vector<GasCostEntry>& gas_table, double base_mva) {
  for (auto& g : gens) {
    const double capacity_mw = g.p_max * base_mva;
    switch (g.fuel) {
      case net::Fuel::HYDRO:
        g.cost = {0.0,
                  capacity_mw >= threshold_mw ? kHydroCostLarge : kHydroCostSmall,
                  0.0};
        break;
      case net::Fuel::GAS: {
        if (gas_table.empty())
          throw std::runtime_error("gas generator on bus " +
                                   std::to_string(g.bus_id) +
                                   " but the gas cost table is empty");
        const auto nearest = std::min_element(
            gas_table.begin(), gas_table.end(),
            [capacity_mw](const GasCostEntry& a, const GasCostEntry& b) {
              return std::abs(a.capacity_mw - capacity_mw) <
                     std::abs(b.capacity_mw - capacity_mw);
            });
        g.cost = nearest->cost;
        break;
      }
      default:
        break;  // WIND/OTHER keep whatever they have
    }
  }
  return gens;
}

std::vector<net::Generator> estimate_reactive_limits(
    std::vector<net::Generator> gens, double fraction,
    const std::map<int, double>& overrides) {
  if (!(fraction > 0)) throw std::invalid_argument("fraction must be positive");
  for (auto& g : gens) {
    double span = fraction * g.p_max;
    if (auto it = overrides.find(g.bus_id); it != overrides.end())
      span *= it->second;
    g.q_min = -span;
    g.q_max = span;
  }
  return gens;
}

namespace {

// Empirical quantile with linear interpolation over the sorted sample.
double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("empty reference limits");
  if (sorted.size() == 1) return sorted[0];
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// 1-based ranks with ties assigned the mean rank of their group.
std::vector<double> mean_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double mean = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mean;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

std::vector<double> estimate_branch_limits_by_quantile(
    const std::vector<double>& max_flows,
    const std::vector<double>& reference_limits) {
  if (reference_limits.empty())
    throw std::invalid_argument("empty reference limits");
  const std::size_t n = max_flows.size();
  std::vector<double> sorted_ref = reference_limits;
  std::sort(sorted_ref.begin(), sorted_ref.end());

  const std::vector<double> ranks = mean_ranks(max_flows);
  std::vector<double> limits(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double q = n > 1 ? (ranks[k] - 1.0) / static_cast<double>(n - 1) : 0.5;
    limits[k] = quantile_sorted(sorted_ref, q);
  }
  return limits;
}

std::vector<std::size_t> uncovered_branches(const std::vector<double>& max_flows,
                                            const std::vector<double>& limits) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < max_flows.size() && k < limits.size(); ++k)
    if (limits[k] < max_flows[k]) out.push_back(k);
  return out;
}

net::Network boost_capacity(const net::Network& net, int bus_id, double delta_p_mw) {
  const int bus_index = net.index_of(bus_id);  // throws on unknown bus
  const auto& gen_positions = net.generators_at(bus_index);
  if (gen_positions.empty())
    throw std::runtime_error("bus " + std::to_string(bus_id) + " has no generator");
  auto gens = net.generators();
  gens[static_cast<std::size_t>(gen_positions.front())].p_max +=
      delta_p_mw / net.base_mva();
  return net::Network(net.buses(), std::move(gens), net.branches(), net.base_mva());
}

PrepConfig load_prep_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open caseprep config '" + path + "'");
  json doc = json::parse(in);

  PrepConfig cfg;
  cfg.hydro_threshold_mw = doc.value("hydro_threshold_mw", kDefaultHydroThresholdMw);
  cfg.q_fraction = doc.value("q_fraction", 0.5);
  if (doc.contains("gas_cost_table")) {
    for (const auto& je : doc["gas_cost_table"]) {
      GasCostEntry e;
      e.capacity_mw = je.at("capacity_mw").get<double>();
      const auto& jc = je.at("cost");
      if (jc.size() > 0) e.cost.c0 = jc[0].get<double>();
      if (jc.size() > 1) e.cost.c1 = jc[1].get<double>();
      if (jc.size() > 2) e.cost.c2 = jc[2].get<double>();
      cfg.gas_cost_table.push_back(e);
    }
  }
  if (doc.contains("q_overrides"))
    for (const auto& [key, value] : doc["q_overrides"].items())
      cfg.q_overrides[std::stoi(key)] = value.get<double>();
  if (doc.contains("reference_limits"))
    cfg.reference_limits = doc["reference_limits"].get<std::vector<double>>();
  if (doc.contains("boosts"))
    for (const auto& jb : doc["boosts"])
      cfg.boosts.emplace_back(jb.at("bus").get<int>(), jb.at("delta_mw").get<double>());
  return cfg;
}

net::Network prepare_case(const net::Network& net, const PrepConfig& config,
                          const std::vector<double>& max_flows) {
  auto gens = assign_cost_functions(net.generators(), config.hydro_threshold_mw,
                                    config.gas_cost_table, net.base_mva());
  gens = estimate_reactive_limits(std::move(gens), config.q_fraction,
                                  config.q_overrides);

  auto branches = net.branches();
  if (!max_flows.empty()) {
    if (max_flows.size() != branches.size())
      throw std::invalid_argument("max_flows must have one entry per branch");
    const auto limits =
        estimate_branch_limits_by_quantile(max_flows, config.reference_limits);
    for (std::size_t k = 0; k < branches.size(); ++k) branches[k].s_max = limits[k];
  }

  net::Network out(net.buses(), std::move(gens), std::move(branches), net.base_mva());
  for (const auto& [bus, delta] : config.boosts) out = boost_capacity(out, bus, delta);
  return out;
}

}  // namespace gridlearn::caseprep
