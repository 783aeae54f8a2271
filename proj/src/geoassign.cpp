#include "gridlearn/geoassign.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "gridlearn/rng.hpp"

namespace gridlearn::geoassign {

using nlohmann::json;

void check_series(const LoadSeries& series) {
  const std::size_t n = series.timestamps.size();
  if (n >= 2) {
    const std::int64_t step = series.timestamps[1] - series.timestamps[0];
    if (step <= 0) throw std::invalid_argument("timestamps must be strictly increasing");
    for (std::size_t i = 1; i < n; ++i)
      if (series.timestamps[i] - series.timestamps[i - 1] != step)
        throw std::invalid_argument("timestamps must be uniformly spaced");
  }
  for (const auto& [bus, pq] : series.by_bus) {
    if (pq.p.size() != n || pq.q.size() != n)
      throw std::invalid_argument("bus " + std::to_string(bus) +
                                  ": series length does not match timestamps");
    for (std::size_t i = 0; i < n; ++i)
      if (!std::isfinite(pq.p[i]) || !std::isfinite(pq.q[i]))
        throw std::invalid_argument("bus " + std::to_string(bus) +
                                    ": non-finite load value");
  }
}

AreaRatios area_ratios(const std::map<int, geo::Polygon>& cells,
                       const std::vector<std::pair<std::string, geo::Polygon>>& regions) {
  AreaRatios ratios;
  for (const auto& [bus, cell] : cells) {
    auto& row = ratios[bus];
    for (const auto& [region_id, region] : regions) {
      const double a = geo::intersection_area(cell, region);
      if (a > 0.0) row[region_id] = a / region.area();
    }
  }
  return ratios;
}

std::map<int, Pq> assign_loads(const AreaRatios& ratios, const GeoLayout& layout,
                               std::size_t t_index) {
  if (t_index >= layout.timestamps.size())
    throw std::out_of_range("time index beyond layout series");
  std::map<int, Pq> out;
  for (const auto& [bus, row] : ratios) {
    Pq acc;
    for (const auto& [region_id, r] : row) {
      const auto it = layout.region_loads.find(region_id);
      if (it == layout.region_loads.end())
        throw std::invalid_argument("region '" + region_id + "' has no load series");
      acc.p += r * it->second.p[t_index];
      acc.q += r * it->second.q[t_index];
    }
    out[bus] = acc;
  }
  return out;
}

LoadSeries assign_series(const GeoLayout& layout) {
  const auto cells = geo::compute_voronoi(layout.sites, layout.bounding);
  const auto ratios = area_ratios(cells, layout.regions);
  LoadSeries out;
  out.timestamps = layout.timestamps;
  for (const auto& [bus, cell] : cells) {
    (void)cell;
    out.by_bus[bus] = SeriesPq{std::vector<double>(layout.timestamps.size(), 0.0),
                               std::vector<double>(layout.timestamps.size(), 0.0)};
  }
  for (std::size_t t = 0; t < layout.timestamps.size(); ++t) {
    const auto loads = assign_loads(ratios, layout, t);
    for (const auto& [bus, pq] : loads) {
      out.by_bus[bus].p[t] = pq.p;
      out.by_bus[bus].q[t] = pq.q;
    }
  }
  return out;
}

SeriesPq impute_missing(const std::map<std::string, SeriesPq>& sources,
                        const std::string& missing,
                        const std::vector<std::string>& neighbors) {
  if (neighbors.empty())
    throw std::invalid_argument("no neighbors to impute '" + missing + "' from");
  std::size_t len = 0;
  bool first = true;
  for (const auto& name : neighbors) {
    const auto it = sources.find(name);
    if (it == sources.end())
      throw std::invalid_argument("neighbor series '" + name + "' not found");
    if (first) {
      len = it->second.p.size();
      first = false;
    } else if (it->second.p.size() != len) {
      throw std::invalid_argument("neighbor series lengths differ");
    }
  }
  SeriesPq out{std::vector<double>(len, 0.0), std::vector<double>(len, 0.0)};
  for (const auto& name : neighbors) {
    const SeriesPq& s = sources.at(name);
    for (std::size_t i = 0; i < len; ++i) {
      out.p[i] += s.p[i];
      out.q[i] += s.q[i];
    }
  }
  const double inv = 1.0 / static_cast<double>(neighbors.size());
  for (std::size_t i = 0; i < len; ++i) {
    out.p[i] *= inv;
    out.q[i] *= inv;
  }
  return out;
}

SeriesPq wind_to_negative_pq(const std::vector<double>& gen_mw,
                             const std::vector<std::vector<double>>& qp_ratio_pools,
                             std::uint64_t seed) {
  if (qp_ratio_pools.size() != gen_mw.size())
    throw std::invalid_argument("one Q/P ratio pool per generation step required");
  rng::Engine eng(seed);
  SeriesPq out;
  out.p.reserve(gen_mw.size());
  out.q.reserve(gen_mw.size());
  for (std::size_t t = 0; t < gen_mw.size(); ++t) {
    const auto& pool = qp_ratio_pools[t];
    if (pool.empty()) throw std::invalid_argument("empty Q/P ratio pool");
    double mean = 0.0;
    for (double v : pool) mean += v;
    mean /= static_cast<double>(pool.size());
    double var = 0.0;
    for (double v : pool) var += (v - mean) * (v - mean);
    // sample std; a single-entry or constant pool gives a deterministic rho
    const double sd = pool.size() > 1
                          ? std::sqrt(var / static_cast<double>(pool.size() - 1))
                          : 0.0;
    const double rho = mean + sd * rng::normal01(eng);
    out.p.push_back(-gen_mw[t]);
    out.q.push_back(-gen_mw[t] * rho);
  }
  return out;
}

std::vector<double> smooth(const std::vector<double>& series, int window) {
  if (window <= 0 || window % 2 == 0)
    throw std::invalid_argument("smoothing window must be odd and positive");
  if (static_cast<std::size_t>(window) > series.size())
    throw std::invalid_argument("smoothing window longer than series");
  const std::size_t out_len = series.size() - static_cast<std::size_t>(window - 1);
  std::vector<double> out(out_len);
  double acc = 0.0;
  for (int i = 0; i < window; ++i) acc += series[static_cast<std::size_t>(i)];
  out[0] = acc / window;
  for (std::size_t i = 1; i < out_len; ++i) {
    acc += series[i + static_cast<std::size_t>(window) - 1] - series[i - 1];
    out[i] = acc / window;
  }
  return out;
}

LoadSeries smooth(const LoadSeries& series, int window) {
  check_series(series);
  LoadSeries out;
  const std::size_t half = static_cast<std::size_t>(window / 2);
  if (series.timestamps.size() < static_cast<std::size_t>(window))
    throw std::invalid_argument("smoothing window longer than series");
  out.timestamps.assign(series.timestamps.begin() + static_cast<std::ptrdiff_t>(half),
                        series.timestamps.end() - static_cast<std::ptrdiff_t>(half));
  for (const auto& [bus, pq] : series.by_bus)
    out.by_bus[bus] = SeriesPq{smooth(pq.p, window), smooth(pq.q, window)};
  return out;
}

std::map<int, Pq> scale_to_regional_total(const std::map<int, Pq>& bus_loads,
                                          double regional_total_p) {
  double current = 0.0;
  for (const auto& [bus, pq] : bus_loads) current += pq.p;
  if (current == 0.0)
    throw std::invalid_argument("current total active load is zero; cannot scale");
  const double s = regional_total_p / current;
  std::map<int, Pq> out;
  for (const auto& [bus, pq] : bus_loads) out[bus] = Pq{pq.p * s, pq.q * s};
  return out;
}

namespace {

geo::Polygon polygon_from_json(const json& ring) {
  std::vector<geo::Point> pts;
  for (const auto& v : ring) pts.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
  return geo::Polygon(std::move(pts));
}

}  // namespace

GeoLayout load_layout_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open layout file '" + path + "'");
  json doc = json::parse(in);

  GeoLayout layout;
  for (const auto& [key, value] : doc.at("sites").items())
    layout.sites[std::stoi(key)] = {value.at(0).get<double>(), value.at(1).get<double>()};
  layout.bounding = polygon_from_json(doc.at("bounding"));
  for (const auto& jr : doc.at("regions"))
    layout.regions.emplace_back(jr.at("id").get<std::string>(),
                                polygon_from_json(jr.at("ring")));
  return layout;
}

void read_loads_csv(const std::string& path, std::vector<std::int64_t>& timestamps,
                    std::map<std::string, SeriesPq>& by_source) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open loads csv '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("loads csv '" + path + "' is empty");

  std::map<std::string, std::map<std::int64_t, Pq>> table;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string ts, source, p, q;
    if (!std::getline(row, ts, ',') || !std::getline(row, source, ',') ||
        !std::getline(row, p, ',') || !std::getline(row, q, ','))
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": expected timestamp,source_id,p_mw,q_mvar");
    table[source][std::stoll(ts)] = Pq{std::stod(p), std::stod(q)};
  }
  if (table.empty()) throw std::runtime_error("loads csv '" + path + "' has no rows");

  // All sources must cover the same timestamp set.
  timestamps.clear();
  for (const auto& [ts, pq] : table.begin()->second) {
    (void)pq;
    timestamps.push_back(ts);
  }
  by_source.clear();
  for (const auto& [source, rows] : table) {
    if (rows.size() != timestamps.size())
      throw std::runtime_error("source '" + source + "' misses timestamps");
    SeriesPq s;
    for (const auto& ts : timestamps) {
      const auto it = rows.find(ts);
      if (it == rows.end())
        throw std::runtime_error("source '" + source + "' misses timestamp " +
                                 std::to_string(ts));
      s.p.push_back(it->second.p);
      s.q.push_back(it->second.q);
    }
    by_source[source] = std::move(s);
  }
}

void write_loads_csv(const std::string& path, const LoadSeries& series) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write loads csv '" + path + "'");
  out << "timestamp,source_id,p_mw,q_mvar\n";
  out.precision(17);
  for (std::size_t t = 0; t < series.timestamps.size(); ++t)
    for (const auto& [bus, pq] : series.by_bus)
      out << series.timestamps[t] << ',' << bus << ',' << pq.p[t] << ',' << pq.q[t]
          << '\n';
}

}  // namespace gridlearn::geoassign
