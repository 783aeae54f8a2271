#pragma once

// Planar geometry for load disaggregation: simple polygons, half-plane
// clipping, bounded Voronoi cells and polygon intersection areas. All
// coordinates are projected planar units.

#include <map>
#include <vector>

namespace gridlearn::geo {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Simple polygon with >= 3 vertices and nonzero area; the constructor
/// enforces all three invariants.
class Polygon {
 public:
  Polygon() = default;
  explicit Polygon(std::vector<Point> vertices);

  const std::vector<Point>& vertices() const { return vertices_; }
  bool empty() const { return vertices_.empty(); }

  double signed_area() const;
  double area() const;
  /// Even-odd rule; points on the boundary count as inside.
  bool contains(const Point& p) const;
  bool is_convex() const;

 private:
  std::vector<Point> vertices_;
};

double signed_area(const std::vector<Point>& ring);

/// Keeps the part of `ring` with (p - origin) . normal <= 0
/// (one Sutherland-Hodgman pass). May return fewer than 3 points.
std::vector<Point> clip_half_plane(const std::vector<Point>& ring, Point origin,
                                   Point normal);

/// Voronoi cells clipped to a convex bounding polygon, one per site. Cells
/// are convex, interior-disjoint and partition the bounding polygon.
/// Throws on duplicate sites, a non-convex bounding polygon, or sites
/// outside it.
std::map<int, Polygon> compute_voronoi(const std::map<int, Point>& sites,
                                       const Polygon& bounding);

/// Area of cell ∩ region; cell must be convex, region simple (possibly
/// non-convex).
double intersection_area(const Polygon& cell, const Polygon& region);

}  // namespace gridlearn::geo
