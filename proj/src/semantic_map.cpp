#include "sgan/semantic_map.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <vector>

#include "raster.hpp"

namespace sgan {

using nlohmann::json;

void check_in_frame(const LandmarkSet& lms, Index height, Index width) {
  for (int i = 0; i < kLandmarkCount; ++i) {
    const Point2& p = lms.points[std::size_t(i)];
    if (!(p.x >= 0 && p.x < double(width) && p.y >= 0 && p.y < double(height)))
      throw DataError("landmark " + std::to_string(i) + " (" + std::to_string(p.x) + ", " +
                      std::to_string(p.y) + ") is out of frame");
  }
}

LandmarkSet load_landmarks(const std::filesystem::path& path, Index height, Index width) {
  std::ifstream in(path);
  if (!in) throw DataError("missing file: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed JSON in " + path.string() + ": " + e.what());
  }
  if (!doc.is_object() || !doc.contains("points") || !doc["points"].is_array())
    throw DataError("malformed JSON in " + path.string() + ": missing \"points\" array");
  const json& pts = doc["points"];
  if (pts.size() != kLandmarkCount)
    throw DataError("wrong point count in " + path.string() + ": expected 68, found " +
                    std::to_string(pts.size()));
  LandmarkSet lms;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const json& p = pts[i];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw DataError("malformed JSON in " + path.string() + ": point " + std::to_string(i) +
                      " is not an [x, y] pair");
    lms.points[i] = {p[0].get<double>(), p[1].get<double>()};
  }
  check_in_frame(lms, height, width);
  return lms;
}

void save_landmarks(const LandmarkSet& lms, const std::filesystem::path& path) {
  json pts = json::array();
  for (const auto& p : lms.points) pts.push_back({p.x, p.y});
  std::ofstream out(path);
  if (!out) throw DataError("cannot write: " + path.string());
  out << json{{"points", pts}}.dump() << '\n';
}

LandmarkSet reflect(const LandmarkSet& lms, Index width) {
  LandmarkSet out = lms;
  for (auto& p : out.points) p.x = double(width - 1) - p.x;
  return out;
}

double stroke_width(Index width) { return 2.0 * double(width) / 64.0; }

namespace {

std::vector<Point2> slice(const LandmarkSet& lms, int first, int last) {
  return {lms.points.begin() + first, lms.points.begin() + last + 1};
}

}  // namespace

SemanticMap render_map(const LandmarkSet& lms, Index height, Index width) {
  SemanticMap map(height, width);
  const double radius = stroke_width(width) / 2.0;
  auto painter = [&](FaceGroup g) {
    const Rgb color = kPalette[std::size_t(g)];
    return [&map, color](Index y, Index x) { map.set(y, x, color); };
  };
  auto stroke = [&](FaceGroup g, int first, int last, bool closed) {
    const auto pts = slice(lms, first, last);
    raster::stroke_polyline(pts, closed, radius, height, width, painter(g));
  };
  auto fill = [&](FaceGroup g, int first, int last) {
    const auto pts = slice(lms, first, last);
    raster::fill_polygon(pts, height, width, painter(g));
    raster::stroke_polyline(pts, true, radius, height, width, painter(g));
  };

  stroke(FaceGroup::Jaw, 0, 16, false);
  stroke(FaceGroup::Eyebrows, 17, 21, false);
  stroke(FaceGroup::Eyebrows, 22, 26, false);
  stroke(FaceGroup::Nose, 27, 30, false);
  stroke(FaceGroup::Nose, 31, 35, false);
  fill(FaceGroup::Eyes, 36, 41);
  fill(FaceGroup::Eyes, 42, 47);
  fill(FaceGroup::Mouth, 48, 59);
  stroke(FaceGroup::Mouth, 60, 67, true);
  return map;
}

Mask group_mask(const SemanticMap& map, FaceGroup group) {
  const Rgb c = kPalette[std::size_t(group)];
  Mask m(map.height, map.width, 0);
  for (Index p = 0; p < map.height * map.width; ++p)
    m.data(p) = map.rgb(0, p) == c[0] && map.rgb(1, p) == c[1] && map.rgb(2, p) == c[2];
  return m;
}

SemanticMap load_map(const std::filesystem::path& path) {
  const Raster r = read_png(path);
  if (r.channels != 3) throw DataError("semantic map must be RGB: " + path.string());
  SemanticMap map(r.height, r.width);
  for (Index p = 0; p < r.height * r.width; ++p) {
    const Rgb c = {r.pixels[std::size_t(p * 3)], r.pixels[std::size_t(p * 3 + 1)],
                   r.pixels[std::size_t(p * 3 + 2)]};
    bool known = c == kBackground;
    for (const auto& pc : kPalette) known = known || c == pc;
    if (!known) throw DataError("semantic map has a color outside the palette: " + path.string());
    for (int k = 0; k < 3; ++k) map.rgb(k, p) = c[std::size_t(k)];
  }
  return map;
}

void save_map(const SemanticMap& map, const std::filesystem::path& path) {
  Raster r;
  r.height = map.height;
  r.width = map.width;
  r.channels = 3;
  r.pixels.resize(std::size_t(map.height * map.width * 3));
  for (Index p = 0; p < map.height * map.width; ++p)
    for (int k = 0; k < 3; ++k) r.pixels[std::size_t(p * 3 + k)] = map.rgb(k, p);
  write_png(r, path);
}

namespace face_geometry {

Point2 to_pixels(const FacePose& pose, Point2 c) {
  const double cs = std::cos(pose.tilt), sn = std::sin(pose.tilt);
  return {pose.center_x + pose.scale * (cs * c.x - sn * c.y),
          pose.center_y + pose.scale * (sn * c.x + cs * c.y)};
}

Point2 to_canonical(const FacePose& pose, Point2 p) {
  const double cs = std::cos(pose.tilt), sn = std::sin(pose.tilt);
  const double dx = (p.x - pose.center_x) / pose.scale, dy = (p.y - pose.center_y) / pose.scale;
  return {cs * dx + sn * dy, -sn * dx + cs * dy};
}

}  // namespace face_geometry

namespace {

/// Canonical 68-point layout; left/right counterparts are exact mirrors.
std::array<Point2, kLandmarkCount> canonical_layout(double openness, double curvature) {
  namespace fg = face_geometry;
  constexpr double kPi = 3.14159265358979323846;
  std::array<Point2, kLandmarkCount> c{};
  auto mirror = [&](int dst, int src) { c[std::size_t(dst)] = {-c[std::size_t(src)].x, c[std::size_t(src)].y}; };

  for (int i = 0; i <= 8; ++i) {
    const double phi = kPi * i / 16.0;
    c[std::size_t(i)] = {-std::cos(phi), -0.15 + 1.05 * std::sin(phi)};
  }
  c[8].x = 0.0;
  for (int i = 9; i <= 16; ++i) mirror(i, 16 - i);

  for (int k = 0; k < 5; ++k) c[std::size_t(17 + k)] = {-0.8 + 0.15 * k, -0.5 - 0.08 * std::sin(kPi * k / 4.0)};
  for (int k = 0; k < 5; ++k) mirror(22 + k, 21 - k);

  for (int k = 0; k < 4; ++k) c[std::size_t(27 + k)] = {0.0, -0.35 + 0.15 * k};
  for (int k = 0; k < 5; ++k) c[std::size_t(31 + k)] = {-0.2 + 0.1 * k, 0.22 - 0.03 * std::abs(k - 2)};
  c[33].x = 0.0;
  mirror(34, 32);
  mirror(35, 31);

  const double ex = -fg::kEyeCenterX, ey = fg::kEyeCenterY;
  const double hw = fg::kEyeHalfWidth, hh = fg::kEyeHalfHeight * openness;
  c[36] = {ex - hw, ey};
  c[37] = {ex - hw / 3, ey - hh};
  c[38] = {ex + hw / 3, ey - hh};
  c[39] = {ex + hw, ey};
  c[40] = {ex + hw / 3, ey + hh};
  c[41] = {ex - hw / 3, ey + hh};
  mirror(42, 39);
  mirror(43, 38);
  mirror(44, 37);
  mirror(45, 36);
  mirror(46, 41);
  mirror(47, 40);

  const double my = fg::kMouthCenterY, mw = fg::kMouthHalfWidth;
  auto lip = [&](double u, double dy) {
    const double x = u * mw;
    return Point2{x, my + dy + fg::mouth_bend(x, curvature)};
  };
  c[48] = lip(-1.0, 0.0);
  for (int j = 1; j <= 5; ++j) c[std::size_t(48 + j)] = lip(-1.0 + j / 3.0, -0.07);
  c[51].x = 0.0;
  c[54] = lip(1.0, 0.0);
  for (int j = 1; j <= 5; ++j) c[std::size_t(54 + j)] = lip(1.0 - j / 3.0, 0.09);
  c[57].x = 0.0;
  c[60] = lip(-0.8, 0.0);
  c[61] = lip(-0.4, -0.02);
  c[62] = lip(0.0, -0.02);
  c[63] = lip(0.4, -0.02);
  c[64] = lip(0.8, 0.0);
  c[65] = lip(0.4, 0.02);
  c[66] = lip(0.0, 0.02);
  c[67] = lip(-0.4, 0.02);
  // Right-hand counterparts mirror the left exactly.
  mirror(54, 48);
  mirror(53, 49);
  mirror(52, 50);
  mirror(55, 59);
  mirror(56, 58);
  mirror(64, 60);
  mirror(63, 61);
  mirror(65, 67);
  return c;
}

double snap(double v) { return std::round(v * kLandmarkGrid) / kLandmarkGrid; }

}  // namespace

LandmarkSet synth_landmarks(const FacePose& pose, Index height, Index width) {
  if (!(pose.scale > 0)) throw UsageError("face scale must be positive");
  if (pose.eye_openness < 0 || pose.eye_openness > 1)
    throw UsageError("eye openness must lie in [0, 1]");
  if (pose.mouth_curvature < -1 || pose.mouth_curvature > 1)
    throw UsageError("mouth curvature must lie in [-1, 1]");
  const auto canonical = canonical_layout(pose.eye_openness, pose.mouth_curvature);
  LandmarkSet lms;
  for (std::size_t i = 0; i < canonical.size(); ++i) {
    const Point2 p = face_geometry::to_pixels(pose, canonical[i]);
    lms.points[i] = {snap(p.x), snap(p.y)};
  }
  try {
    check_in_frame(lms, height, width);
  } catch (const DataError&) {
    throw UsageError("face scale too large for a " + std::to_string(height) + "x" +
                     std::to_string(width) + " frame");
  }
  return lms;
}

}  // namespace sgan
