#include "gridlearn/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace gridlearn::geo {

namespace {

constexpr double kEps = 1e-12;

bool segments_properly_intersect(Point a, Point b, Point c, Point d) {
  auto cross = [](Point o, Point p, Point q) {
    return (p.x - o.x) * (q.y - o.y) - (p.y - o.y) * (q.x - o.x);
  };
  const double d1 = cross(a, b, c);
  const double d2 = cross(a, b, d);
  const double d3 = cross(c, d, a);
  const double d4 = cross(c, d, b);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) &&
         std::abs(d1) > kEps && std::abs(d2) > kEps && std::abs(d3) > kEps &&
         std::abs(d4) > kEps;
}

bool ring_is_simple(const std::vector<Point>& ring) {
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      // skip adjacent edges (shared vertex)
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      if (segments_properly_intersect(ring[i], ring[(i + 1) % n], ring[j],
                                      ring[(j + 1) % n]))
        return false;
    }
  return true;
}

}  // namespace

double signed_area(const std::vector<Point>& ring) {
  double acc = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point& p = ring[i];
    const Point& q = ring[(i + 1) % n];
    acc += p.x * q.y - q.x * p.y;
  }
  return acc / 2.0;
}

Polygon::Polygon(std::vector<Point> vertices) : vertices_(std::move(vertices)) {
  if (vertices_.size() < 3)
    throw std::invalid_argument("polygon needs at least 3 vertices");
  if (geo::signed_area(vertices_) == 0.0)
    throw std::invalid_argument("polygon has zero area");
  if (!ring_is_simple(vertices_))
    throw std::invalid_argument("polygon is self-intersecting");
}

double Polygon::signed_area() const { return geo::signed_area(vertices_); }

double Polygon::area() const { return std::abs(signed_area()); }

bool Polygon::contains(const Point& p) const {
  const std::size_t n = vertices_.size();
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = vertices_[i];
    const Point& b = vertices_[j];
    // boundary check: p on segment (a, b)
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (std::abs(cross) < kEps &&
        p.x >= std::min(a.x, b.x) - kEps && p.x <= std::max(a.x, b.x) + kEps &&
        p.y >= std::min(a.y, b.y) - kEps && p.y <= std::max(a.y, b.y) + kEps)
      return true;
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_at = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
      if (p.x < x_at) inside = !inside;
    }
  }
  return inside;
}

bool Polygon::is_convex() const {
  const std::size_t n = vertices_.size();
  int sign = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = vertices_[i];
    const Point& b = vertices_[(i + 1) % n];
    const Point& c = vertices_[(i + 2) % n];
    const double cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
    if (std::abs(cross) < kEps) continue;  // collinear run
    const int s = cross > 0 ? 1 : -1;
    if (sign == 0)
      sign = s;
    else if (s != sign)
      return false;
  }
  return true;
}

std::vector<Point> clip_half_plane(const std::vector<Point>& ring, Point origin,
                                   Point normal) {
  std::vector<Point> out;
  const std::size_t n = ring.size();
  if (n == 0) return out;
  out.reserve(n + 2);
  auto side = [&](const Point& p) {
    return (p.x - origin.x) * normal.x + (p.y - origin.y) * normal.y;
  };
  for (std::size_t i = 0; i < n; ++i) {
    const Point& cur = ring[i];
    const Point& nxt = ring[(i + 1) % n];
    const double sc = side(cur);
    const double sn = side(nxt);
    if (sc <= 0.0) out.push_back(cur);
    if ((sc < 0.0 && sn > 0.0) || (sc > 0.0 && sn < 0.0)) {
      const double t = sc / (sc - sn);
      out.push_back({cur.x + t * (nxt.x - cur.x), cur.y + t * (nxt.y - cur.y)});
    }
  }
  return out;
}

std::map<int, Polygon> compute_voronoi(const std::map<int, Point>& sites,
                                       const Polygon& bounding) {
  if (sites.empty()) throw std::invalid_argument("no sites");
  if (!bounding.is_convex())
    throw std::invalid_argument("bounding polygon must be convex");
  for (const auto& [id, p] : sites) {
    if (!bounding.contains(p))
      throw std::invalid_argument("site " + std::to_string(id) +
                                  " lies outside the bounding polygon");
    for (const auto& [other_id, q] : sites) {
      if (other_id <= id) continue;
      if (std::abs(p.x - q.x) < kEps && std::abs(p.y - q.y) < kEps)
        throw std::invalid_argument("duplicate sites " + std::to_string(id) +
                                    " and " + std::to_string(other_id));
    }
  }

  // Orient the bounding ring counter-clockwise once.
  std::vector<Point> base = bounding.vertices();
  if (geo::signed_area(base) < 0) std::reverse(base.begin(), base.end());

  std::map<int, Polygon> cells;
  for (const auto& [id, site] : sites) {
    std::vector<Point> ring = base;
    for (const auto& [other_id, other] : sites) {
      if (other_id == id) continue;
      // keep the side of the perpendicular bisector nearer to `site`
      const Point mid{(site.x + other.x) / 2.0, (site.y + other.y) / 2.0};
      const Point normal{other.x - site.x, other.y - site.y};
      ring = clip_half_plane(ring, mid, normal);
      if (ring.size() < 3) break;
    }
    if (ring.size() < 3)
      throw std::runtime_error("empty Voronoi cell for site " + std::to_string(id));
    cells.emplace(id, Polygon(std::move(ring)));
  }
  return cells;
}

double intersection_area(const Polygon& cell, const Polygon& region) {
  if (!cell.is_convex())
    throw std::invalid_argument("intersection_area needs a convex cell");
  std::vector<Point> clip = cell.vertices();
  if (geo::signed_area(clip) < 0) std::reverse(clip.begin(), clip.end());

  std::vector<Point> subject = region.vertices();
  const std::size_t n = clip.size();
  for (std::size_t i = 0; i < n && subject.size() >= 3; ++i) {
    const Point& a = clip[i];
    const Point& b = clip[(i + 1) % n];
    // inward normal of CCW edge (a, b) is (dy, -dx); keep (p-a).n <= 0
    const Point normal{b.y - a.y, -(b.x - a.x)};
    subject = clip_half_plane(subject, a, normal);
  }
  if (subject.size() < 3) return 0.0;
  return std::abs(geo::signed_area(subject));
}

}  // namespace gridlearn::geo
