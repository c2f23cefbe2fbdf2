#include "sgan/toy_corpus.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "raster.hpp"
#include "sgan/rng.hpp"

namespace sgan {

namespace fs = std::filesystem;
using nlohmann::json;

Appearance sample_appearance(std::uint64_t seed) {
  namespace ts = toy_sampler;
  Rng rng(seed);
  std::uniform_real_distribution<double> skin(-ts::kSkinSpread, ts::kSkinSpread);
  std::uniform_real_distribution<double> hair(-ts::kHairSpread, ts::kHairSpread);
  Appearance a;
  for (std::size_t k = 0; k < 3; ++k) a.skin[k] = ts::kSkinMean[k] + skin(rng);
  for (std::size_t k = 0; k < 3; ++k) a.hair[k] = ts::kHairMean[k] + hair(rng);
  return a;
}

FacePose sample_pose(std::uint64_t seed, Index height, Index width) {
  namespace ts = toy_sampler;
  Rng rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0), sym(-1.0, 1.0);
  FacePose p;
  p.center_x = double(width - 1) / 2.0 + sym(rng) * ts::kCenterJitter * double(width);
  p.center_y = double(height - 1) / 2.0 + sym(rng) * ts::kCenterJitter * double(height);
  p.scale = double(width) * (ts::kScaleMin + (ts::kScaleMax - ts::kScaleMin) * unit(rng));
  p.tilt = ts::kTiltMax * sym(rng);
  p.eye_openness = unit(rng);
  p.mouth_curvature = sym(rng);
  return p;
}

FaceSpec sample_face(std::uint64_t seed, Index height, Index width) {
  return {seed, sample_appearance(derive_seed(seed, "appearance")),
          sample_pose(derive_seed(seed, "pose"), height, width)};
}

void validate(const FaceSpec& spec, Index height, Index width) {
  for (const Color* c : {&spec.appearance.skin, &spec.appearance.hair})
    for (double v : *c)
      if (!(v >= 0.0 && v <= 1.0)) throw UsageError("face colors must lie in [0, 1]");
  synth_landmarks(spec.pose, height, width);
}

namespace {

struct Canvas {
  Index height, width;
  std::vector<Color> px;
  Canvas(Index h, Index w) : height(h), width(w), px(std::size_t(h * w), kToyBackground) {}
  Color& at(Index y, Index x) { return px[std::size_t(y * width + x)]; }
  auto painter(const Color& c) {
    return [this, c](Index y, Index x) { at(y, x) = c; };
  }
};

std::vector<Point2> slice(const LandmarkSet& lms, int first, int last) {
  return {lms.points.begin() + first, lms.points.begin() + last + 1};
}

bool in_half_ellipse(Point2 c, double cy, double ax, double ay_top, double ay_bottom) {
  const double dy = c.y - cy;
  const double ay = dy < 0 ? ay_top : ay_bottom;
  return (c.x / ax) * (c.x / ax) + (dy / ay) * (dy / ay) <= 1.0;
}

}  // namespace

template <typename Scalar>
PairedSample<Scalar> render_face(const FaceSpec& spec, Index height, Index width) {
  namespace fg = face_geometry;
  validate(spec, height, width);
  const FacePose& pose = spec.pose;
  const LandmarkSet lms = synth_landmarks(pose, height, width);
  const Appearance& app = spec.appearance;
  const Color nose_color = {app.skin[0] * 0.8, app.skin[1] * 0.8, app.skin[2] * 0.8};
  const double line_radius = stroke_width(width) / 2.0;

  Canvas canvas(height, width);
  for (Index y = 0; y < height; ++y)
    for (Index x = 0; x < width; ++x) {
      const Point2 c = fg::to_canonical(pose, {double(x), double(y)});
      if (in_half_ellipse(c, -0.15, 1.0, 1.15, 1.05)) canvas.at(y, x) = app.skin;
      if (c.y < -0.62 && in_half_ellipse(c, -0.15, 1.08, 1.25, 1.05)) canvas.at(y, x) = app.hair;
      if (pose.eye_openness > 0) {
        const double hh = fg::kEyeHalfHeight * pose.eye_openness;
        for (double ex : {-fg::kEyeCenterX, fg::kEyeCenterX}) {
          const double u = (c.x - ex) / fg::kEyeHalfWidth, v = (c.y - fg::kEyeCenterY) / hh;
          if (u * u + v * v <= 1.0) canvas.at(y, x) = kToyEyeColor;
        }
      }
    }

  const double brow_radius = std::max(0.06 * pose.scale, line_radius);
  const double nose_radius = std::max(0.04 * pose.scale, line_radius);
  auto stroke = [&](int first, int last, double radius, const Color& color) {
    const auto pts = slice(lms, first, last);
    raster::stroke_polyline(pts, false, radius, height, width, canvas.painter(color));
  };
  stroke(17, 21, brow_radius, app.hair);
  stroke(22, 26, brow_radius, app.hair);
  stroke(27, 30, nose_radius, nose_color);
  stroke(31, 35, nose_radius, nose_color);
  // Eye axes keep a closed eye visible as a line.
  const std::vector<Point2> left_axis = {lms.points[36], lms.points[39]};
  const std::vector<Point2> right_axis = {lms.points[42], lms.points[45]};
  raster::stroke_polyline(left_axis, false, line_radius, height, width, canvas.painter(kToyEyeColor));
  raster::stroke_polyline(right_axis, false, line_radius, height, width, canvas.painter(kToyEyeColor));

  std::vector<Point2> mouth;
  for (int k = -4; k <= 4; ++k) {
    const double x = 0.2 * k * fg::kMouthHalfWidth;
    mouth.push_back(fg::to_pixels(pose, {x, fg::kMouthCenterY + fg::mouth_bend(x, pose.mouth_curvature)}));
  }
  raster::stroke_polyline(mouth, false, kToyMouthRadius * pose.scale, height, width,
                          canvas.painter(kToyMouthColor));

  PairedSample<Scalar> out;
  out.image = Image<Scalar>(height, width);
  for (Index p = 0; p < height * width; ++p)
    for (Index k = 0; k < 3; ++k)
      out.image.data(k, p) = Scalar(2.0 * canvas.px[std::size_t(p)][std::size_t(k)] - 1.0);
  out.map = render_map(lms, height, width);
  return out;
}

json to_json(const FaceSpec& spec) {
  const FacePose& p = spec.pose;
  return {{"seed", spec.seed},
          {"skin", spec.appearance.skin},
          {"hair", spec.appearance.hair},
          {"pose",
           {{"center_x", p.center_x},
            {"center_y", p.center_y},
            {"scale", p.scale},
            {"tilt", p.tilt},
            {"eye_openness", p.eye_openness},
            {"mouth_curvature", p.mouth_curvature}}}};
}

fs::path write_corpus(const std::vector<FaceSpec>& specs, Index height, Index width, const fs::path& out_root) {
  if (specs.empty()) throw UsageError("a corpus needs at least one face");
  std::error_code ec;
  for (const char* sub : {"images", "landmarks", "maps"}) {
    fs::create_directories(out_root / sub, ec);
    if (ec) throw DataError("cannot create " + (out_root / sub).string() + ": " + ec.message());
  }
  json listing = {{"height", height}, {"width", width}, {"faces", json::array()}};
  for (std::size_t i = 0; i < specs.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "face_%04zu", i);
    const auto sample = render_face<double>(specs[i], height, width);
    save_image(sample.image, out_root / "images" / (std::string(stem) + ".png"));
    save_landmarks(synth_landmarks(specs[i].pose, height, width),
                   out_root / "landmarks" / (std::string(stem) + ".json"));
    save_map(sample.map, out_root / "maps" / (std::string(stem) + ".png"));
    json entry = to_json(specs[i]);
    entry["stem"] = stem;
    listing["faces"].push_back(entry);
  }
  std::ofstream out(out_root / "corpus.json", std::ios::trunc);
  if (!out) throw DataError("cannot write " + (out_root / "corpus.json").string());
  out << listing.dump(2) << '\n';
  return out_root;
}

fs::path make_corpus(int n, std::uint64_t seed, Index height, Index width, const fs::path& out_root) {
  if (n < 1) throw UsageError("a corpus needs at least one face");
  std::vector<FaceSpec> specs;
  for (int i = 0; i < n; ++i) specs.push_back(sample_face(derive_seed(seed, std::uint64_t(i)), height, width));
  return write_corpus(specs, height, width, out_root);
}

namespace {

struct Box {
  Index y0, y1, x0, x1;
  bool empty() const { return y1 < y0; }
};

Box bounding_box(const Mask& m) {
  Box b{m.height, -1, m.width, -1};
  for (Index y = 0; y < m.height; ++y)
    for (Index x = 0; x < m.width; ++x)
      if (m(y, x)) {
        b.y0 = std::min(b.y0, y);
        b.y1 = std::max(b.y1, y);
        b.x0 = std::min(b.x0, x);
        b.x1 = std::max(b.x1, x);
      }
  return b;
}

}  // namespace

template <typename Scalar>
double mouth_curvature_statistic(const Image<Scalar>& image, const SemanticMap& map) {
  if (image.height != map.height || image.width != map.width)
    throw UsageError("mouth_curvature_statistic: image and map differ in shape");
  Box b = bounding_box(group_mask(map, FaceGroup::Mouth));
  if (b.empty()) return 0.0;
  auto luminance = [&](Index y, Index x) {
    return (double(image(0, y, x)) + double(image(1, y, x)) + double(image(2, y, x))) / 3.0;
  };
  double brightest = -1e300;
  for (Index y = b.y0; y <= b.y1; ++y)
    for (Index x = b.x0; x <= b.x1; ++x) brightest = std::max(brightest, luminance(y, x));
  const double cx = 0.5 * double(b.x0 + b.x1), cy = 0.5 * double(b.y0 + b.y1);
  Eigen::Matrix3d normal = Eigen::Matrix3d::Zero();
  Eigen::Vector3d rhs = Eigen::Vector3d::Zero();
  for (Index y = b.y0; y <= b.y1; ++y)
    for (Index x = b.x0; x <= b.x1; ++x) {
      const double w = brightest - luminance(y, x);
      const double u = double(x) - cx;
      const Eigen::Vector3d phi(1.0, u, u * u);
      normal += w * phi * phi.transpose();
      rhs += w * (double(y) - cy) * phi;
    }
  const Eigen::Vector3d coef = normal.ldlt().solve(rhs);
  if (!coef.allFinite() || normal.trace() == 0.0) return 0.0;
  return -coef(2);
}

Mask skin_region(const SemanticMap& map) {
  const Box eyes = bounding_box(group_mask(map, FaceGroup::Eyes));
  const Box mouth = bounding_box(group_mask(map, FaceGroup::Mouth));
  Mask m(map.height, map.width, 0);
  if (eyes.empty() || mouth.empty()) return m;
  for (Index y = eyes.y1 + 1; y < mouth.y0; ++y)
    for (Index x = eyes.x0; x <= eyes.x1; ++x) m(y, x) = map.at(y, x) == kBackground;
  return m;
}

template <typename Scalar>
Color region_mean(const Image<Scalar>& image, const Mask& region) {
  Color sum{0, 0, 0};
  const Index n = region.count_ones();
  if (n == 0) throw UsageError("region_mean: empty region");
  for (Index p = 0; p < image.pixels(); ++p)
    if (region.data(p))
      for (std::size_t k = 0; k < 3; ++k) sum[k] += double(image.data(Index(k), p));
  for (double& s : sum) s /= double(n);
  return sum;
}

#define SGAN_INSTANTIATE(S)                                                           \
  template PairedSample<S> render_face<S>(const FaceSpec&, Index, Index);             \
  template double mouth_curvature_statistic<S>(const Image<S>&, const SemanticMap&); \
  template Color region_mean<S>(const Image<S>&, const Mask&);

SGAN_INSTANTIATE(float)
SGAN_INSTANTIATE(double)

#undef SGAN_INSTANTIATE

}  // namespace sgan
