#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <vector>

#include "sgan/checkpoint.hpp"
#include "sgan/models.hpp"
#include "sgan/nn/adam.hpp"
#include "sgan/semantic_map.hpp"

namespace sgan {

/// Lower clamp for discriminator probabilities before taking logs.
inline constexpr double kScoreEpsilon = 1e-7;

struct TrainConfig {
  Index batch_size = 64;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.5;
  long iterations = 0;
  std::uint64_t seed = 0;
  Index resolution = 64;
  Index latent_dim = 100;
  Index base_filters = 64;
  Index max_filters = 512;
  /// Write an intermediate checkpoint every this many iterations (0 = only
  /// the final one).
  long checkpoint_every = 0;
  /// Append a metrics line every this many iterations.
  long log_every = 1;
  std::filesystem::path dataset_root;
  std::filesystem::path out_dir;

  GeneratorSpec generator_spec() const { return {resolution, latent_dim, base_filters, max_filters}; }
  DiscriminatorSpec discriminator_spec() const { return {resolution, base_filters, max_filters}; }
  void validate() const;
  nlohmann::json to_json() const;
};

/// One (x, c) training pair.
template <typename Scalar>
struct PairedSample {
  Image<Scalar> image;
  SemanticMap map;
};

/// -mean(log real) - mean(log(1 - fake)), probabilities clamped to
/// [eps, 1 - eps].
template <typename Scalar>
double d_loss(const nn::Vector<Scalar>& real_scores, const nn::Vector<Scalar>& fake_scores);

/// Non-saturating generator loss -mean(log fake), clamped like d_loss.
template <typename Scalar>
double g_loss(const nn::Vector<Scalar>& fake_scores);

struct StepMetrics {
  double d_loss = 0;
  double g_loss = 0;
  double real_score = 0;
  double fake_score = 0;
};

/// Owns both networks and their optimizers. Each step performs one
/// discriminator update followed by one generator update, each with a fresh
/// latent draw from a stream derived from the config seed.
template <typename Scalar>
class GanTrainer {
 public:
  explicit GanTrainer(const TrainConfig& cfg);

  Generator<Scalar>& generator() { return gen_; }
  Discriminator<Scalar>& discriminator() { return disc_; }
  const TrainConfig& config() const { return cfg_; }
  long iteration() const { return iteration_; }

  StepMetrics train_step(const std::vector<const PairedSample<Scalar>*>& batch);

  /// One Adam update of D on d_loss for the given batch and latent draw.
  /// Returns the loss and mean scores measured before the update.
  StepMetrics discriminator_step(const nn::Tensor<Scalar>& images, const nn::Tensor<Scalar>& maps,
                                 const LatentBatch<Scalar>& z);

  /// One Adam update of G on g_loss. Returns the loss before the update.
  StepMetrics generator_step(const nn::Tensor<Scalar>& maps, const LatentBatch<Scalar>& z);

  /// d_loss of the current networks on a batch, without updating anything
  /// but BatchNorm running statistics.
  double evaluate_d_loss(const nn::Tensor<Scalar>& images, const nn::Tensor<Scalar>& maps,
                         const LatentBatch<Scalar>& z);

  GanCheckpoint<Scalar> checkpoint();

  Rng& latent_rng() { return z_rng_; }

 private:
  TrainConfig cfg_;
  Generator<Scalar> gen_;
  Discriminator<Scalar> disc_;
  nn::Adam<Scalar> adam_g_;
  nn::Adam<Scalar> adam_d_;
  Rng z_rng_;
  long iteration_ = 0;
};

/// Loads `<root>/images/*.png` paired by stem with `<root>/landmarks/*.json`.
/// Maps come from `<root>/maps/<stem>.png` when present at the target
/// resolution and are rendered from the landmarks otherwise. Samples are
/// returned sorted by stem.
template <typename Scalar>
std::vector<PairedSample<Scalar>> load_dataset(const std::filesystem::path& root, Index resolution);

/// Cycles through the dataset in per-epoch shuffled order.
class BatchSampler {
 public:
  BatchSampler(std::size_t dataset_size, std::uint64_t seed);
  std::vector<std::size_t> next(Index batch_size);

 private:
  std::size_t size_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  Rng rng_;
};

using TrainLogFn = std::function<void(long iteration, const StepMetrics&)>;

/// Full training loop over an in-memory dataset. Writes `metrics.csv`
/// (iter,d_loss,g_loss,real_score,fake_score), periodic `ckpt_<iter>.sgan`
/// files and the final `checkpoint.sgan` into cfg.out_dir; returns the final
/// checkpoint path.
template <typename Scalar>
std::filesystem::path train(const TrainConfig& cfg, const std::vector<PairedSample<Scalar>>& data,
                            const TrainLogFn& on_log = {});

/// As above, loading the dataset from cfg.dataset_root.
std::filesystem::path train(const TrainConfig& cfg, const TrainLogFn& on_log = {});

/// Maps of a list of samples stacked as a batch tensor.
template <typename Scalar>
nn::Tensor<Scalar> stack_maps(const std::vector<const SemanticMap*>& maps);

}  // namespace sgan
