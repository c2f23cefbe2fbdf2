#pragma once

// Exact-arithmetic rasterization primitives shared by the map renderer and
// the toy face renderer. Pixel (y, x) has its center at (x, y).

#include <algorithm>
#include <cmath>
#include <span>

#include "sgan/semantic_map.hpp"

namespace sgan::raster {

/// Distance test without division: for dyadic inputs every intermediate is
/// exact, so the result is invariant under endpoint swap, reflection and
/// integer translation.
inline bool near_segment(Point2 p, Point2 a, Point2 b, double radius) {
  const double abx = b.x - a.x, aby = b.y - a.y;
  const double apx = p.x - a.x, apy = p.y - a.y;
  const double den = abx * abx + aby * aby;
  const double num = apx * abx + apy * aby;
  const double r2 = radius * radius;
  if (den == 0.0 || num <= 0.0) return apx * apx + apy * apy <= r2;
  if (num >= den) {
    const double bpx = p.x - b.x, bpy = p.y - b.y;
    return bpx * bpx + bpy * bpy <= r2;
  }
  const double cross = apx * aby - apy * abx;
  return cross * cross <= r2 * den;
}

template <typename F>
void stroke_polyline(std::span<const Point2> pts, bool closed, double radius, Index height,
                     Index width, F&& paint) {
  const std::size_t n = pts.size();
  const std::size_t segments = closed ? n : n - 1;
  for (std::size_t s = 0; s < segments; ++s) {
    const Point2 a = pts[s], b = pts[(s + 1) % n];
    const Index y0 = std::max<Index>(0, Index(std::floor(std::min(a.y, b.y) - radius)));
    const Index y1 = std::min<Index>(height - 1, Index(std::ceil(std::max(a.y, b.y) + radius)));
    const Index x0 = std::max<Index>(0, Index(std::floor(std::min(a.x, b.x) - radius)));
    const Index x1 = std::min<Index>(width - 1, Index(std::ceil(std::max(a.x, b.x) + radius)));
    for (Index y = y0; y <= y1; ++y)
      for (Index x = x0; x <= x1; ++x)
        if (near_segment({double(x), double(y)}, a, b, radius)) paint(y, x);
  }
}

/// Even-odd crossing test with the half-open vertex rule.
inline bool polygon_contains(std::span<const Point2> poly, Point2 p) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2 a = poly[i], b = poly[j];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x_cross = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

template <typename F>
void fill_polygon(std::span<const Point2> poly, Index height, Index width, F&& paint) {
  double min_x = poly[0].x, max_x = poly[0].x, min_y = poly[0].y, max_y = poly[0].y;
  for (const auto& p : poly) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const Index y0 = std::max<Index>(0, Index(std::floor(min_y)));
  const Index y1 = std::min<Index>(height - 1, Index(std::ceil(max_y)));
  const Index x0 = std::max<Index>(0, Index(std::floor(min_x)));
  const Index x1 = std::min<Index>(width - 1, Index(std::ceil(max_x)));
  for (Index y = y0; y <= y1; ++y)
    for (Index x = x0; x <= x1; ++x)
      if (polygon_contains(poly, {double(x), double(y)})) paint(y, x);
}

}  // namespace sgan::raster
