#pragma once

// Geographic load disaggregation: postal-area loads are apportioned to bus
// Voronoi cells by intersection-area ratios, missing sources imputed from
// neighbors, wind generation converted to negative load, series smoothed and
// rescaled to a regional total.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gridlearn/geometry.hpp"

namespace gridlearn::geoassign {

/// Active/reactive pair in MW / MVAr.
struct Pq {
  double p = 0.0;
  double q = 0.0;
};

/// Time series of (P, Q) values for one source (substation, region or bus).
struct SeriesPq {
  std::vector<double> p;
  std::vector<double> q;
};

/// Uniformly spaced, strictly increasing timestamps with per-bus series.
struct LoadSeries {
  std::vector<std::int64_t> timestamps;
  std::map<int, SeriesPq> by_bus;
};

/// Bus sites, region polygons and per-region load series; the input to the
/// load-assignment loop.
struct GeoLayout {
  std::map<int, geo::Point> sites;                     // bus id -> coordinates
  std::vector<std::pair<std::string, geo::Polygon>> regions;
  std::vector<std::int64_t> timestamps;
  std::map<std::string, SeriesPq> region_loads;        // keyed by region id
  geo::Polygon bounding;                               // Voronoi clip window
};

/// Checks LoadSeries invariants; throws std::invalid_argument on violation.
void check_series(const LoadSeries& series);

/// r_k = area(cell_i ∩ region_k) / area(region_k) for every pair, r_k in [0,1].
using AreaRatios = std::map<int, std::map<std::string, double>>;
AreaRatios area_ratios(const std::map<int, geo::Polygon>& cells,
                       const std::vector<std::pair<std::string, geo::Polygon>>& regions);

/// One time step of the assignment loop: bus i receives sum over regions of
/// r_k * (P_k, Q_k).
std::map<int, Pq> assign_loads(const AreaRatios& ratios, const GeoLayout& layout,
                               std::size_t t_index);

/// Convenience wrapper: Voronoi over layout.sites, ratios, then every step.
LoadSeries assign_series(const GeoLayout& layout);

/// Elementwise mean of the neighbor series.
SeriesPq impute_missing(const std::map<std::string, SeriesPq>& sources,
                        const std::string& missing,
                        const std::vector<std::string>& neighbors);

/// Wind generation as negative load: P = -gen, Q = -gen * rho with rho drawn
/// per step from a normal distribution fitted to that step's Q/P ratio pool.
SeriesPq wind_to_negative_pq(const std::vector<double>& gen_mw,
                             const std::vector<std::vector<double>>& qp_ratio_pools,
                             std::uint64_t seed);

/// Centered moving average; output length = input length - (window - 1).
std::vector<double> smooth(const std::vector<double>& series, int window);
LoadSeries smooth(const LoadSeries& series, int window);

/// Scales every P and every Q by regional_total_p / (current sum of P).
std::map<int, Pq> scale_to_regional_total(const std::map<int, Pq>& bus_loads,
                                          double regional_total_p);

/// Layout document (JSON: sites, bounding, regions as coordinate rings).
GeoLayout load_layout_file(const std::string& path);
/// CSV `timestamp,source_id,p_mw,q_mvar` grouped by source.
void read_loads_csv(const std::string& path, std::vector<std::int64_t>& timestamps,
                    std::map<std::string, SeriesPq>& by_source);
void write_loads_csv(const std::string& path, const LoadSeries& series);

}  // namespace gridlearn::geoassign
