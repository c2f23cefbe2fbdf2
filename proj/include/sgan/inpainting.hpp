#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <string>
#include <vector>

#include "sgan/checkpoint.hpp"
#include "sgan/masks.hpp"
#include "sgan/models.hpp"
#include "sgan/semantic_map.hpp"
#include "sgan/sequence.hpp"

namespace sgan {

struct InpaintConfig {
  double eta = 0.1;
  double learning_rate = 5e-2;
  long iterations = 1500;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double z_min = -1.0;
  double z_max = 1.0;
  std::uint64_t seed = 0;
  int restarts = 1;
  /// Divide the contextual L1 sum by the number of uncorrupted entries.
  bool normalize_contextual = true;

  void validate() const;
  nlohmann::json to_json() const;
};

struct LossRecord {
  double total = 0;
  double contextual = 0;
  double perceptual = 0;
};

template <typename Scalar>
struct InpaintResult {
  LatentVector<Scalar> z_hat;
  Image<Scalar> generated;
  Image<Scalar> inpainted;
  /// Losses at the initial z and after every optimizer step
  /// (iterations + 1 entries).
  std::vector<LossRecord> trace;
  nlohmann::json metadata = nlohmann::json::object();

  const LossRecord& initial() const { return trace.front(); }
  const LossRecord& final() const { return trace.back(); }
};

/// Frozen generator/discriminator pair used for inference. Networks run in
/// inference mode, so a model may be copied per thread and used concurrently.
template <typename Scalar>
struct InpaintModel {
  Generator<Scalar> generator;
  Discriminator<Scalar> discriminator;
  bool trained = false;

  static InpaintModel from_checkpoint(const GanCheckpoint<Scalar>& ckpt);
};

/// L1 norm of mask * (gen - corrupted). Normalized: divided by the number of
/// uncorrupted entries (mask ones x 3 channels); 0 for an all-zero mask.
template <typename Scalar>
double contextual_loss(const Image<Scalar>& gen, const Image<Scalar>& corrupted, const Mask& mask,
                       bool normalized = true);

/// log(1 - score) with score clamped to [eps, 1 - eps].
double perceptual_loss(double disc_score);

/// mask * corrupted + (1 - mask) * gen.
template <typename Scalar>
Image<Scalar> overlay(const Image<Scalar>& corrupted, const Image<Scalar>& gen, const Mask& mask);

template <typename Scalar>
struct LossAndGradient {
  LossRecord loss;
  LatentVector<Scalar> dz;
  Image<Scalar> generated;
};

/// Total loss contextual + eta * perceptual at z and its gradient with
/// respect to z; network parameters receive no gradient.
template <typename Scalar>
LossAndGradient<Scalar> inpaint_loss(InpaintModel<Scalar>& model, const LatentVector<Scalar>& z,
                                     const Image<Scalar>& corrupted, const Mask& mask,
                                     const Image<Scalar>& map, const InpaintConfig& cfg);

/// Called after every clamped optimizer step with the step number (1-based).
template <typename Scalar>
using StepObserver = std::function<void(long step, const LatentVector<Scalar>& z)>;

/// Recovers z for a corrupted image by Adam on the total loss with z
/// projected onto [z_min, z_max] after each step; best of cfg.restarts
/// initializations by final total loss.
template <typename Scalar>
InpaintResult<Scalar> optimize_latent(InpaintModel<Scalar>& model, const Image<Scalar>& corrupted,
                                      const Mask& mask, const SemanticMap& map,
                                      const InpaintConfig& cfg,
                                      const StepObserver<Scalar>& observe = {});

/// Inpaints every frame independently; frame i uses seed cfg.seed + i.
template <typename Scalar>
std::vector<InpaintResult<Scalar>> inpaint_sequence(InpaintModel<Scalar>& model,
                                                    const std::vector<Image<Scalar>>& frames,
                                                    const std::vector<Mask>& masks,
                                                    const std::vector<SemanticMap>& maps,
                                                    const InpaintConfig& cfg);

template <typename Scalar>
std::vector<InpaintResult<Scalar>> inpaint_sequence(InpaintModel<Scalar>& model,
                                                    const PseudoSequence<Scalar>& seq,
                                                    const std::vector<SemanticMap>& maps,
                                                    const InpaintConfig& cfg) {
  return inpaint_sequence(model, seq.frames, seq.masks, maps, cfg);
}

/// CSV with header iter,total,contextual,perceptual.
void write_loss_trace(const std::vector<LossRecord>& trace, const std::filesystem::path& path);

template <typename Scalar>
nlohmann::json result_manifest(const InpaintResult<Scalar>& result, const InpaintConfig& cfg,
                               const MaskSpec& mask);

}  // namespace sgan
