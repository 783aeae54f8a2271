#include "gridlearn/netmodel.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace gridlearn::net {

using nlohmann::json;

std::string to_string(BusKind kind) {
  switch (kind) {
    case BusKind::PQ: return "PQ";
    case BusKind::PV: return "PV";
    case BusKind::SLACK: return "SLACK";
  }
  return "PQ";
}

std::string to_string(Fuel fuel) {
  switch (fuel) {
    case Fuel::HYDRO: return "HYDRO";
    case Fuel::GAS: return "GAS";
    case Fuel::WIND: return "WIND";
    case Fuel::OTHER: return "OTHER";
  }
  return "OTHER";
}

BusKind bus_kind_from(const std::string& s) {
  if (s == "PQ") return BusKind::PQ;
  if (s == "PV") return BusKind::PV;
  if (s == "SLACK") return BusKind::SLACK;
  throw CaseError("unknown bus kind '" + s + "'");
}

Fuel fuel_from(const std::string& s) {
  if (s == "HYDRO") return Fuel::HYDRO;
  if (s == "GAS") return Fuel::GAS;
  if (s == "WIND") return Fuel::WIND;
  if (s == "OTHER") return Fuel::OTHER;
  throw CaseError("unknown fuel '" + s + "'");
}

Network::Network(std::vector<Bus> buses, std::vector<Generator> generators,
                 std::vector<Branch> branches, double base_mva)
    : buses_(std::move(buses)),
      generators_(std::move(generators)),
      branches_(std::move(branches)),
      base_mva_(base_mva) {
  const int n = n_buses();
  gens_at_.assign(n, {});
  for (int i = 0; i < n; ++i) {
    index_.emplace(buses_[i].id, i);  // emplace keeps the first occurrence
    switch (buses_[i].kind) {
      case BusKind::PQ: pq_.push_back(i); break;
      case BusKind::PV: pv_.push_back(i); break;
      case BusKind::SLACK: slack_all_.push_back(i); break;
    }
    if (buses_[i].kind != BusKind::PQ) gen_bus_.push_back(i);
  }
  for (int g = 0; g < static_cast<int>(generators_.size()); ++g) {
    auto it = index_.find(generators_[g].bus_id);
    if (it != index_.end()) {
      gens_at_[it->second].push_back(g);
      if (buses_[it->second].kind == BusKind::PV) nonslack_gens_.push_back(g);
    }
  }
}

int Network::index_of(int bus_id) const {
  auto it = index_.find(bus_id);
  if (it == index_.end())
    throw CaseError("unknown bus id " + std::to_string(bus_id));
  return it->second;
}

int Network::slack_index() const {
  if (slack_all_.size() != 1)
    throw CaseError(slack_all_.empty() ? "no slack bus"
                                       : "multiple slack buses");
  return slack_all_[0];
}

const std::vector<int>& Network::generators_at(int bus_index) const {
  return gens_at_.at(static_cast<std::size_t>(bus_index));
}

std::vector<int> Network::pq_bus_ids() const {
  std::vector<int> ids;
  ids.reserve(pq_.size());
  for (int i : pq_) ids.push_back(buses_[i].id);
  return ids;
}

namespace {

double require_number(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key))
    throw CaseError(where + ": missing field '" + key + "'");
  if (!obj[key].is_number())
    throw CaseError(where + ": field '" + key + "' must be a number");
  return obj[key].get<double>();
}

int require_int(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key))
    throw CaseError(where + ": missing field '" + key + "'");
  if (!obj[key].is_number_integer())
    throw CaseError(where + ": field '" + key + "' must be an integer");
  return obj[key].get<int>();
}

std::string require_string(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key))
    throw CaseError(where + ": missing field '" + key + "'");
  if (!obj[key].is_string())
    throw CaseError(where + ": field '" + key + "' must be a string");
  return obj[key].get<std::string>();
}

double optional_number(const json& obj, const char* key, double fallback,
                       const std::string& where) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number())
    throw CaseError(where + ": field '" + key + "' must be a number");
  return obj[key].get<double>();
}

}  // namespace

Network load_case(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CaseError(std::string("case document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw CaseError("case document must be a JSON object");

  const double base_mva = require_number(doc, "base_mva", "case");
  if (!(base_mva > 0)) throw CaseError("case: base_mva must be positive");

  if (!doc.contains("buses") || !doc["buses"].is_array())
    throw CaseError("case: missing array 'buses'");
  if (!doc.contains("generators") || !doc["generators"].is_array())
    throw CaseError("case: missing array 'generators'");
  if (!doc.contains("branches") || !doc["branches"].is_array())
    throw CaseError("case: missing array 'branches'");

  std::vector<Bus> buses;
  for (std::size_t k = 0; k < doc["buses"].size(); ++k) {
    const json& jb = doc["buses"][k];
    const std::string where = "bus[" + std::to_string(k) + "]";
    Bus b;
    b.id = require_int(jb, "id", where);
    b.kind = bus_kind_from(require_string(jb, "kind", where));
    b.v_min = require_number(jb, "v_min", where);
    b.v_max = require_number(jb, "v_max", where);
    b.base_kv = require_number(jb, "base_kv", where);
    const bool has_x = jb.contains("x"), has_y = jb.contains("y");
    if (has_x != has_y)
      throw CaseError(where + ": coordinate needs both 'x' and 'y'");
    if (has_x)
      b.coord = {{require_number(jb, "x", where), require_number(jb, "y", where)}};
    buses.push_back(b);
  }

  std::vector<Generator> gens;
  for (std::size_t k = 0; k < doc["generators"].size(); ++k) {
    const json& jg = doc["generators"][k];
    const std::string where = "generator[" + std::to_string(k) + "]";
    Generator g;
    g.bus_id = require_int(jg, "bus", where);
    g.p_min = require_number(jg, "p_min", where) / base_mva;  // MW -> pu
    g.p_max = require_number(jg, "p_max", where) / base_mva;
    g.q_min = require_number(jg, "q_min", where) / base_mva;  // MVAr -> pu
    g.q_max = require_number(jg, "q_max", where) / base_mva;
    g.fuel = fuel_from(require_string(jg, "fuel", where));
    if (!jg.contains("cost") || !jg["cost"].is_array() || jg["cost"].size() > 3)
      throw CaseError(where + ": 'cost' must be an array [c0, c1, c2] (trailing terms optional)");
    const auto& jc = jg["cost"];
    for (const auto& c : jc)
      if (!c.is_number()) throw CaseError(where + ": cost coefficients must be numbers");
    if (jc.size() > 0) g.cost.c0 = jc[0].get<double>();
    if (jc.size() > 1) g.cost.c1 = jc[1].get<double>();
    if (jc.size() > 2) g.cost.c2 = jc[2].get<double>();
    gens.push_back(g);
  }

  std::vector<Branch> branches;
  for (std::size_t k = 0; k < doc["branches"].size(); ++k) {
    const json& jb = doc["branches"][k];
    const std::string where = "branch[" + std::to_string(k) + "]";
    Branch br;
    br.from_bus = require_int(jb, "from", where);
    br.to_bus = require_int(jb, "to", where);
    br.r = require_number(jb, "r", where);
    br.x = require_number(jb, "x", where);
    br.b_sh = optional_number(jb, "b_sh", 0.0, where);
    br.s_max = optional_number(jb, "s_max", 0.0, where);
    br.tap = optional_number(jb, "tap", 1.0, where);
    branches.push_back(br);
  }

  Network net(std::move(buses), std::move(gens), std::move(branches), base_mva);
  const auto report = validate(net);
  if (!report.empty()) {
    std::ostringstream oss;
    oss << "invalid case:";
    for (const auto& line : report) oss << "\n  " << line;
    throw CaseError(oss.str());
  }
  return net;
}

Network load_case_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CaseError("cannot open case file '" + path + "'");
  std::ostringstream oss;
  oss << in.rdbuf();
  return load_case(oss.str());
}

std::string save_case(const Network& net) {
  json doc;
  doc["base_mva"] = net.base_mva();
  doc["buses"] = json::array();
  for (const Bus& b : net.buses()) {
    json jb{{"id", b.id},
            {"kind", to_string(b.kind)},
            {"v_min", b.v_min},
            {"v_max", b.v_max},
            {"base_kv", b.base_kv}};
    if (b.coord) {
      jb["x"] = (*b.coord)[0];
      jb["y"] = (*b.coord)[1];
    }
    doc["buses"].push_back(jb);
  }
  doc["generators"] = json::array();
  const double base = net.base_mva();
  for (const Generator& g : net.generators()) {
    doc["generators"].push_back(json{{"bus", g.bus_id},
                                     {"p_min", g.p_min * base},
                                     {"p_max", g.p_max * base},
                                     {"q_min", g.q_min * base},
                                     {"q_max", g.q_max * base},
                                     {"fuel", to_string(g.fuel)},
                                     {"cost", {g.cost.c0, g.cost.c1, g.cost.c2}}});
  }
  doc["branches"] = json::array();
  for (const Branch& br : net.branches()) {
    doc["branches"].push_back(json{{"from", br.from_bus},
                                   {"to", br.to_bus},
                                   {"r", br.r},
                                   {"x", br.x},
                                   {"b_sh", br.b_sh},
                                   {"s_max", br.s_max},
                                   {"tap", br.tap}});
  }
  return doc.dump(2);
}

void save_case_file(const Network& net, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw CaseError("cannot write case file '" + path + "'");
  out << save_case(net) << "\n";
}

std::vector<std::string> validate(const Network& net) {
  std::vector<std::string> report;
  const auto& buses = net.buses();
  const int n = net.n_buses();

  // Bus-level invariants and id uniqueness.
  std::unordered_map<int, int> seen;
  for (int i = 0; i < n; ++i) {
    const Bus& b = buses[i];
    auto [it, inserted] = seen.emplace(b.id, i);
    if (!inserted)
      report.push_back("duplicate bus id " + std::to_string(b.id));
    if (!(b.v_min > 0))
      report.push_back("bus " + std::to_string(b.id) + ": v_min must be positive");
    if (!(b.v_min <= b.v_max))
      report.push_back("bus " + std::to_string(b.id) + ": v_min > v_max");
  }

  if (net.slack_all_.empty())
    report.push_back("no slack bus");
  else if (net.slack_all_.size() > 1)
    report.push_back("multiple slack buses");

  for (std::size_t g = 0; g < net.generators().size(); ++g) {
    const Generator& gen = net.generators()[g];
    const std::string where = "generator " + std::to_string(g);
    if (!net.has_bus(gen.bus_id)) {
      report.push_back(where + ": unknown bus " + std::to_string(gen.bus_id));
      continue;
    }
    const Bus& b = buses[static_cast<std::size_t>(net.index_of(gen.bus_id))];
    if (b.kind == BusKind::PQ)
      report.push_back(where + ": on PQ bus " + std::to_string(gen.bus_id));
    if (!(gen.p_min <= gen.p_max))
      report.push_back(where + ": p_min > p_max");
    if (!(gen.q_min <= gen.q_max))
      report.push_back(where + ": q_min > q_max");
    if (gen.cost.c2 < 0)
      report.push_back(where + ": negative quadratic cost coefficient");
  }

  for (std::size_t k = 0; k < net.branches().size(); ++k) {
    const Branch& br = net.branches()[k];
    const std::string where = "branch " + std::to_string(k);
    bool ends_ok = true;
    if (!net.has_bus(br.from_bus)) {
      report.push_back(where + ": unknown from bus " + std::to_string(br.from_bus));
      ends_ok = false;
    }
    if (!net.has_bus(br.to_bus)) {
      report.push_back(where + ": unknown to bus " + std::to_string(br.to_bus));
      ends_ok = false;
    }
    if (ends_ok && br.from_bus == br.to_bus)
      report.push_back(where + ": from and to are the same bus");
    if (br.r < 0) report.push_back(where + ": negative resistance");
    if (br.x == 0.0) report.push_back("zero reactance on branch " + std::to_string(k));
    if (!(br.tap > 0)) report.push_back(where + ": tap must be positive");
    if (br.s_max < 0) report.push_back(where + ": negative flow limit");
  }

  // Every PV/slack bus carries at least one generator.
  for (int i = 0; i < n; ++i) {
    if (buses[i].kind == BusKind::PQ) continue;
    if (net.generators_at(i).empty())
      report.push_back("bus " + std::to_string(buses[i].id) +
                       ": " + to_string(buses[i].kind) + " bus without generator");
  }

  // Connectivity over all buses via branches with known endpoints.
  if (n > 0) {
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (const Branch& br : net.branches()) {
      if (!net.has_bus(br.from_bus) || !net.has_bus(br.to_bus)) continue;
      const int i = net.index_of(br.from_bus), j = net.index_of(br.to_bus);
      adj[static_cast<std::size_t>(i)].push_back(j);
      adj[static_cast<std::size_t>(j)].push_back(i);
    }
    std::vector<char> visited(static_cast<std::size_t>(n), 0);
    std::deque<int> queue{0};
    visited[0] = 1;
    while (!queue.empty()) {
      const int i = queue.front();
      queue.pop_front();
      for (int j : adj[static_cast<std::size_t>(i)])
        if (!visited[static_cast<std::size_t>(j)]) {
          visited[static_cast<std::size_t>(j)] = 1;
          queue.push_back(j);
        }
    }
    for (int i = 0; i < n; ++i)
      if (!visited[static_cast<std::size_t>(i)])
        report.push_back("bus " + std::to_string(buses[static_cast<std::size_t>(i)].id) +
                         ": not connected to bus " + std::to_string(buses[0].id));
  }

  return report;
}

Eigen::MatrixXcd build_ybus(const Network& net) {
  const int n = net.n_buses();
  Eigen::MatrixXcd Y = Eigen::MatrixXcd::Zero(n, n);
  for (const Branch& br : net.branches()) {
    const int i = net.index_of(br.from_bus);
    const int j = net.index_of(br.to_bus);
    const std::complex<double> y = 1.0 / std::complex<double>(br.r, br.x);
    const std::complex<double> half_shunt(0.0, br.b_sh / 2.0);
    const double t = br.tap;
    Y(i, i) += (y + half_shunt) / (t * t);
    Y(j, j) += y + half_shunt;
    Y(i, j) -= y / t;
    Y(j, i) -= y / t;
  }
  return Y;
}

}  // namespace gridlearn::net
