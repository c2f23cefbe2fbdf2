#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sgan/imaging.hpp"

namespace sgan {

enum class MaskKind { Central, Checkerboard, Left, Freehand };

std::string_view to_string(MaskKind kind);
/// Parses "central", "checkerboard" (or "checkboard"), "left", "freehand".
MaskKind parse_mask_kind(std::string_view name);

inline constexpr double kCentralMinFraction = 0.5;
inline constexpr double kCentralMaxFraction = 0.7;
inline constexpr double kLeftFraction = 0.5;
inline constexpr double kFreehandFraction = 0.25;
inline constexpr double kFreehandTolerance = 0.02;
inline constexpr int kFreehandStrokes = 3;

struct MaskSpec {
  MaskKind kind = MaskKind::Central;
  /// Central: corrupted area fraction in [0.5, 0.7]. Left: must be 0.5.
  /// Freehand: target corrupted fraction (0.25).
  double fraction = 0.5625;
  /// Checkerboard cell size in pixels; 0 selects width / 8.
  Index cell = 0;
  std::uint64_t seed = 0;

  static MaskSpec central(double fraction) { return {MaskKind::Central, fraction, 0, 0}; }
  static MaskSpec checkerboard(Index cell = 0) { return {MaskKind::Checkerboard, 0.5, cell, 0}; }
  static MaskSpec left() { return {MaskKind::Left, kLeftFraction, 0, 0}; }
  static MaskSpec freehand(std::uint64_t seed) {
    return {MaskKind::Freehand, kFreehandFraction, 0, seed};
  }
};

/// Side of the central square for a requested area fraction: the rounded
/// side, nudged inward so the realized fraction stays within [0.5, 0.7].
Index central_side(double fraction, Index h, Index w);

/// Binary mask with 1 = uncorrupted.
Mask make_mask(const MaskSpec& spec, Index h, Index w);

/// n masks for a pseudo-sequence: independent draws for central (fraction
/// uniform in [0.5, 0.7], redrawn while the block side repeats and distinct
/// sides remain) and freehand, n identical masks for left and checkerboard.
std::vector<Mask> make_sequence_masks(MaskKind kind, int n, std::uint64_t seed, Index h, Index w);

/// The specs behind make_sequence_masks, for provenance records.
std::vector<MaskSpec> sequence_mask_specs(MaskKind kind, int n, std::uint64_t seed, Index h, Index w);

}  // namespace sgan
