#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "sgan/imaging.hpp"

namespace sgan {

inline constexpr int kLandmarkCount = 68;

struct Point2 {
  double x = 0;
  double y = 0;
  bool operator==(const Point2&) const = default;
};

/// 68-point fiducial layout: jaw 0-16, eyebrows 17-26, nose 27-35,
/// eyes 36-47, mouth 48-67 (outer lip 48-59, inner lip 60-67).
struct LandmarkSet {
  std::array<Point2, kLandmarkCount> points{};
  bool operator==(const LandmarkSet&) const = default;
};

/// Throws DataError("... out of frame ...") unless every point lies in
/// [0, width) x [0, height).
void check_in_frame(const LandmarkSet& lms, Index height, Index width);

/// Reads {"points": [[x0, y0], ..., [x67, y67]]} and validates it against a
/// height x width frame.
LandmarkSet load_landmarks(const std::filesystem::path& path, Index height, Index width);
void save_landmarks(const LandmarkSet& lms, const std::filesystem::path& path);

/// Mirror image of a landmark set about the vertical center line of a frame
/// of the given width (x -> width - 1 - x); indices are preserved.
LandmarkSet reflect(const LandmarkSet& lms, Index width);

using Rgb = std::array<std::uint8_t, 3>;

enum class FaceGroup : int { Jaw = 0, Eyebrows, Nose, Eyes, Mouth };
inline constexpr int kGroupCount = 5;

/// One color per semantic group; background is black.
inline constexpr std::array<Rgb, kGroupCount> kPalette = {{
    {255, 0, 0},    // jaw
    {0, 255, 0},    // eyebrows
    {0, 0, 255},    // nose
    {255, 255, 0},  // eyes
    {255, 0, 255},  // mouth
}};

inline constexpr Rgb kBackground = {0, 0, 0};

/// Dense RGB conditioning map.
struct SemanticMap {
  using Planes = Eigen::Matrix<std::uint8_t, 3, Eigen::Dynamic, Eigen::RowMajor>;

  Index height = 0;
  Index width = 0;
  Planes rgb;

  SemanticMap() = default;
  SemanticMap(Index h, Index w) : height(h), width(w), rgb(Planes::Zero(3, h * w)) {}

  Rgb at(Index y, Index x) const {
    const Index p = y * width + x;
    return {rgb(0, p), rgb(1, p), rgb(2, p)};
  }
  void set(Index y, Index x, const Rgb& c) {
    const Index p = y * width + x;
    for (int k = 0; k < 3; ++k) rgb(k, p) = c[std::size_t(k)];
  }

  /// Map as a generator-range image (0 -> -1, 255 -> +1).
  template <typename Scalar>
  Image<Scalar> to_image() const {
    Image<Scalar> img(height, width);
    img.data = rgb.cast<Scalar>() * Scalar(2.0 / 255.0);
    img.data.array() -= Scalar(1);
    return img;
  }

  bool operator==(const SemanticMap& o) const {
    return height == o.height && width == o.width && rgb == o.rgb;
  }
};

/// Stroke width in pixels: 2 at 64 pixels wide, proportional elsewhere.
double stroke_width(Index width);

/// Rasterizes the five groups in order jaw, eyebrows, nose, eyes, mouth
/// (later groups overpaint earlier ones). Jaw, brows and nose are polylines;
/// eyes and the outer lip are filled polygons with outlines; the inner lip is
/// an outline.
SemanticMap render_map(const LandmarkSet& lms, Index height, Index width);

/// Pixels belonging to one group.
Mask group_mask(const SemanticMap& map, FaceGroup group);

SemanticMap load_map(const std::filesystem::path& path);
void save_map(const SemanticMap& map, const std::filesystem::path& path);

/// Pose and expression of a synthetic face.
struct FacePose {
  double center_x = 32;
  double center_y = 32;
  double scale = 20;         // face half-width in pixels
  double tilt = 0;           // radians, positive = clockwise on screen
  double eye_openness = 0.5;  // [0, 1]
  double mouth_curvature = 0;  // [-1, 1], +1 = corners up
  bool operator==(const FacePose&) const = default;
};

/// Coordinates are snapped to a 1/256 pixel grid so reflections and integer
/// translations of the result are exact in floating point.
inline constexpr double kLandmarkGrid = 256.0;

/// Deterministic parametric 68-point layout. Throws UsageError when the face
/// does not fit the frame or parameters are out of range.
LandmarkSet synth_landmarks(const FacePose& pose, Index height, Index width);

/// Canonical (unit-scale, untilted, origin at the face center) geometry used
/// by both the landmark generator and the toy face renderer.
namespace face_geometry {
inline constexpr double kEyeCenterX = 0.42;
inline constexpr double kEyeCenterY = -0.22;
inline constexpr double kEyeHalfWidth = 0.2;
inline constexpr double kEyeHalfHeight = 0.11;
inline constexpr double kMouthCenterY = 0.52;
inline constexpr double kMouthHalfWidth = 0.38;
inline constexpr double kMouthBend = 0.2;

/// Vertical offset of the mouth line at canonical x (negative = up).
inline double mouth_bend(double x, double curvature) {
  const double u = x / kMouthHalfWidth;
  return -curvature * kMouthBend * u * u;
}

/// Canonical -> pixel coordinates for a pose.
Point2 to_pixels(const FacePose& pose, Point2 canonical);
/// Pixel -> canonical coordinates for a pose.
Point2 to_canonical(const FacePose& pose, Point2 pixel);
}  // namespace face_geometry

}  // namespace sgan
