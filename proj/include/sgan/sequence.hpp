#pragma once

#include <cstdint>
#include <vector>

#include "sgan/imaging.hpp"
#include "sgan/masks.hpp"

namespace sgan {

/// N corrupted variants of one source image standing in for video frames.
template <typename Scalar>
struct PseudoSequence {
  Image<Scalar> source;
  std::vector<Image<Scalar>> frames;
  std::vector<Mask> masks;
  std::vector<MaskSpec> mask_specs;
  MaskKind kind = MaskKind::Central;
  std::uint64_t seed = 0;

  std::size_t size() const { return frames.size(); }
};

/// Corrupts `source` with make_sequence_masks(kind, n, seed); corrupted
/// pixels are set to -1.
template <typename Scalar>
PseudoSequence<Scalar> make_pseudo_sequence(const Image<Scalar>& source, MaskKind kind, int n,
                                            std::uint64_t seed);

}  // namespace sgan
