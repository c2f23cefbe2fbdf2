#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <string>
#include <vector>

#include "sgan/inpainting.hpp"
#include "sgan/masks.hpp"
#include "sgan/sequence.hpp"
#include "sgan/training.hpp"

namespace sgan {

template <typename Scalar>
using PairMetric = std::function<double(const Image<Scalar>&, const Image<Scalar>&)>;

/// Mean PSNR over the C(N, 2) unordered frame pairs, each pair evaluated once.
template <typename Scalar>
double consistency(const std::vector<Image<Scalar>>& frames, const PairMetric<Scalar>& metric = {});

/// Reconstructs a corrupted image; must be safe to call from several threads.
template <typename Scalar>
using Inpainter = std::function<Image<Scalar>(const Image<Scalar>& corrupted, const Mask& mask,
                                              const SemanticMap& map, std::uint64_t seed)>;

/// Latent optimization against a frozen model. Each call works on its own
/// copy of the networks.
template <typename Scalar>
Inpainter<Scalar> model_inpainter(const InpaintModel<Scalar>& model, const InpaintConfig& cfg);

struct EvalConfig {
  std::vector<MaskKind> kinds;
  /// Requested central fraction for correctness runs.
  double central_fraction = 0.5625;
  int sequence_length = 5;
  std::uint64_t seed = 0;
  int jobs = 1;
  nlohmann::json metadata = nlohmann::json::object();
};

struct EvalItem {
  std::string kind;
  std::size_t image = 0;
  double value = 0;
  bool failed = false;
  std::string error;
  /// Consistency runs: correctness PSNR of every reconstructed frame.
  std::vector<double> frame_psnr;
};

struct KindAggregate {
  std::string kind;
  double mean = 0;
  std::size_t count = 0;
  std::size_t failed = 0;
};

struct EvalReport {
  std::string protocol;  // "correctness" or "consistency"
  std::vector<EvalItem> items;
  std::vector<KindAggregate> aggregates;
  nlohmann::json metadata = nlohmann::json::object();

  /// Rebuilds aggregates from items; failed items are counted, not averaged.
  void recompute_aggregates();
  nlohmann::json to_json() const;
  std::string table() const;
  std::string csv() const;
  /// Writes <stem>.json, <stem>.txt and <stem>.csv into dir.
  void write(const std::filesystem::path& dir, const std::string& stem) const;
};

/// Corrupt, inpaint and score every (image, kind) against the original.
template <typename Scalar>
EvalReport correctness_eval(const Inpainter<Scalar>& inpainter,
                            const std::vector<PairedSample<Scalar>>& dataset, const EvalConfig& cfg);

/// Builds a pseudo-sequence per (image, kind), inpaints each frame
/// independently (frame f uses seed base + f) and reports consistency.
template <typename Scalar>
EvalReport consistency_eval(const Inpainter<Scalar>& inpainter,
                            const std::vector<PairedSample<Scalar>>& dataset, const EvalConfig& cfg);

/// Default kinds of the consistency protocol: central, freehand, left.
std::vector<MaskKind> consistency_kinds();

}  // namespace sgan
