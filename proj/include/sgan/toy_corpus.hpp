#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <vector>

#include "sgan/semantic_map.hpp"
#include "sgan/training.hpp"

namespace sgan {

/// Colors are in [0, 1] per channel.
using Color = std::array<double, 3>;

struct Appearance {
  Color skin{0.80, 0.62, 0.50};
  Color hair{0.30, 0.30, 0.30};
  bool operator==(const Appearance&) const = default;
};

struct FaceSpec {
  std::uint64_t seed = 0;
  Appearance appearance;
  FacePose pose;
  bool operator==(const FaceSpec&) const = default;
};

/// Sampler settings: every color channel is uniform in mean +- spread.
namespace toy_sampler {
inline constexpr Color kSkinMean = {0.80, 0.62, 0.50};
inline constexpr double kSkinSpread = 0.15;
inline constexpr Color kHairMean = {0.30, 0.30, 0.30};
inline constexpr double kHairSpread = 0.20;
inline constexpr double kScaleMin = 0.28;  // face half-width / image width
inline constexpr double kScaleMax = 0.34;
inline constexpr double kTiltMax = 0.15;
inline constexpr double kCenterJitter = 0.03;  // of the frame size
}  // namespace toy_sampler

inline constexpr Color kToyBackground = {0.25, 0.30, 0.38};
inline constexpr Color kToyEyeColor = {0.08, 0.07, 0.10};
inline constexpr Color kToyMouthColor = {0.55, 0.12, 0.18};
/// Mouth stroke radius relative to the face scale.
inline constexpr double kToyMouthRadius = 0.08;

Appearance sample_appearance(std::uint64_t seed);
FacePose sample_pose(std::uint64_t seed, Index height, Index width);
/// Appearance and pose drawn from independent streams of one seed.
FaceSpec sample_face(std::uint64_t seed, Index height, Index width);

void validate(const FaceSpec& spec, Index height, Index width);

/// Deterministic raster plus its semantic map. The map depends on the pose
/// only.
template <typename Scalar>
PairedSample<Scalar> render_face(const FaceSpec& spec, Index height, Index width);

/// Writes images/, landmarks/ and maps/ for n faces named face_0000 ...,
/// plus corpus.json listing every spec. Face i uses sample_face(derive_seed(seed, i)).
std::filesystem::path make_corpus(int n, std::uint64_t seed, Index height, Index width,
                                  const std::filesystem::path& out_root);

/// Writes an explicit list of specs in the same layout.
std::filesystem::path write_corpus(const std::vector<FaceSpec>& specs, Index height, Index width,
                                   const std::filesystem::path& out_root);

nlohmann::json to_json(const FaceSpec& spec);

/// Signed mouth curvature measured from an image: a darkness-weighted
/// parabola y = a + b x + c x^2 is fitted inside the bounding box of the
/// map's mouth pixels; returns -c so that positive means
/// corners up. Returns 0 when the map has no mouth.
template <typename Scalar>
double mouth_curvature_statistic(const Image<Scalar>& image, const SemanticMap& map);

/// Cheek and nose-bridge area: background map pixels between the lowest eye
/// row and the highest mouth row, horizontally within the eyes' extent.
Mask skin_region(const SemanticMap& map);

/// Mean color (generator range) over the mask-1 pixels.
template <typename Scalar>
Color region_mean(const Image<Scalar>& image, const Mask& region);

}  // namespace sgan
