#include "sgan/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "sgan/rng.hpp"

namespace sgan {

namespace fs = std::filesystem;
using nlohmann::json;

void TrainConfig::validate() const {
  if (batch_size < 2) throw UsageError("batch size must be at least 2 (BatchNorm needs batch statistics)");
  if (!(learning_rate >= 0)) throw UsageError("learning rate must be non-negative");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
    throw UsageError("Adam betas must lie in [0, 1)");
  if (iterations < 0) throw UsageError("iteration budget must be non-negative");
  if (log_every < 1) throw UsageError("log cadence must be at least 1");
  if (checkpoint_every < 0) throw UsageError("checkpoint cadence must be non-negative");
  generator_spec().validate();
  discriminator_spec().validate();
}

json TrainConfig::to_json() const {
  return {{"batch_size", batch_size},     {"learning_rate", learning_rate},
          {"beta1", beta1},               {"beta2", beta2},
          {"iterations", iterations},     {"seed", seed},
          {"resolution", resolution},     {"latent_dim", latent_dim},
          {"base_filters", base_filters}, {"max_filters", max_filters},
          {"checkpoint_every", checkpoint_every}, {"log_every", log_every},
          {"dataset_root", dataset_root.string()}, {"out_dir", out_dir.string()}};
}

namespace {

double clamp_score(double s) { return std::clamp(s, kScoreEpsilon, 1.0 - kScoreEpsilon); }
bool in_clamp_range(double s) { return s >= kScoreEpsilon && s <= 1.0 - kScoreEpsilon; }

template <typename Scalar>
nn::Vector<double> scores_of(const nn::Vector<Scalar>& logits) {
  return logits.template cast<double>().unaryExpr([](double l) { return nn::sigmoid(l); });
}

/// d(-mean log s)/dlogit, zero where the clamp is active.
template <typename Scalar>
nn::Vector<Scalar> grad_neg_log(const nn::Vector<double>& s) {
  const double n = double(s.size());
  nn::Vector<Scalar> g(s.size());
  for (Index i = 0; i < s.size(); ++i) g(i) = Scalar(in_clamp_range(s(i)) ? -(1.0 - s(i)) / n : 0.0);
  return g;
}

/// d(-mean log(1 - s))/dlogit, zero where the clamp is active.
template <typename Scalar>
nn::Vector<Scalar> grad_neg_log_complement(const nn::Vector<double>& s) {
  const double n = double(s.size());
  nn::Vector<Scalar> g(s.size());
  for (Index i = 0; i < s.size(); ++i) g(i) = Scalar(in_clamp_range(s(i)) ? s(i) / n : 0.0);
  return g;
}

void check_finite(double v, const char* what, long iteration) {
  if (!std::isfinite(v))
    throw NumericalError(std::string("non-finite ") + what + " at iteration " + std::to_string(iteration));
}

}  // namespace

template <typename Scalar>
double d_loss(const nn::Vector<Scalar>& real_scores, const nn::Vector<Scalar>& fake_scores) {
  double real = 0, fake = 0;
  for (Index i = 0; i < real_scores.size(); ++i) real -= std::log(clamp_score(double(real_scores(i))));
  for (Index i = 0; i < fake_scores.size(); ++i) fake -= std::log(1.0 - clamp_score(double(fake_scores(i))));
  return real / double(real_scores.size()) + fake / double(fake_scores.size());
}

template <typename Scalar>
double g_loss(const nn::Vector<Scalar>& fake_scores) {
  double loss = 0;
  for (Index i = 0; i < fake_scores.size(); ++i) loss -= std::log(clamp_score(double(fake_scores(i))));
  return loss / double(fake_scores.size());
}

template <typename Scalar>
nn::Tensor<Scalar> stack_maps(const std::vector<const SemanticMap*>& maps) {
  std::vector<Image<Scalar>> images;
  images.reserve(maps.size());
  for (const auto* m : maps) images.push_back(m->template to_image<Scalar>());
  return stack_images(std::span<const Image<Scalar>>(images));
}

template <typename Scalar>
GanTrainer<Scalar>::GanTrainer(const TrainConfig& cfg)
    : cfg_(cfg),
      gen_(cfg.generator_spec()),
      disc_(cfg.discriminator_spec()),
      adam_g_({cfg.learning_rate, cfg.beta1, cfg.beta2}),
      adam_d_({cfg.learning_rate, cfg.beta1, cfg.beta2}),
      z_rng_(derive_seed(cfg.seed, "train/z")) {
  cfg_.validate();
  gen_.initialize(derive_seed(cfg.seed, "init/generator"));
  disc_.initialize(derive_seed(cfg.seed, "init/discriminator"));
}

template <typename Scalar>
StepMetrics GanTrainer<Scalar>::discriminator_step(const nn::Tensor<Scalar>& images,
                                                   const nn::Tensor<Scalar>& maps,
                                                   const LatentBatch<Scalar>& z) {
  const nn::Tensor<Scalar> fake = gen_.forward(z, maps, nn::Mode::Train);
  disc_.zero_grad();
  // Real and fake batches are normalized separately.
  const nn::Vector<double> real_s = scores_of(disc_.forward(images, maps, nn::Mode::Train));
  disc_.backward(grad_neg_log<Scalar>(real_s), nn::ParamGrads::Accumulate);
  const nn::Vector<double> fake_s = scores_of(disc_.forward(fake, maps, nn::Mode::Train));
  disc_.backward(grad_neg_log_complement<Scalar>(fake_s), nn::ParamGrads::Accumulate);
  StepMetrics m;
  m.d_loss = d_loss<double>(real_s, fake_s);
  m.real_score = real_s.mean();
  m.fake_score = fake_s.mean();
  check_finite(m.d_loss, "discriminator loss", iteration_);
  adam_d_.step(disc_.trainable_parameters());
  return m;
}

template <typename Scalar>
StepMetrics GanTrainer<Scalar>::generator_step(const nn::Tensor<Scalar>& maps,
                                               const LatentBatch<Scalar>& z) {
  gen_.zero_grad();
  const nn::Tensor<Scalar> fake = gen_.forward(z, maps, nn::Mode::Train);
  const nn::Vector<double> fake_s = scores_of(disc_.forward(fake, maps, nn::Mode::Train));
  const nn::Tensor<Scalar> d_fake = disc_.backward(grad_neg_log<Scalar>(fake_s), nn::ParamGrads::Skip);
  gen_.backward(d_fake, nn::ParamGrads::Accumulate);
  StepMetrics m;
  m.g_loss = g_loss<double>(fake_s);
  m.fake_score = fake_s.mean();
  check_finite(m.g_loss, "generator loss", iteration_);
  adam_g_.step(gen_.trainable_parameters());
  return m;
}

template <typename Scalar>
double GanTrainer<Scalar>::evaluate_d_loss(const nn::Tensor<Scalar>& images,
                                           const nn::Tensor<Scalar>& maps,
                                           const LatentBatch<Scalar>& z) {
  const nn::Tensor<Scalar> fake = gen_.forward(z, maps, nn::Mode::Train);
  const nn::Vector<double> real_s = scores_of(disc_.forward(images, maps, nn::Mode::Train));
  const nn::Vector<double> fake_s = scores_of(disc_.forward(fake, maps, nn::Mode::Train));
  return d_loss<double>(real_s, fake_s);
}

template <typename Scalar>
StepMetrics GanTrainer<Scalar>::train_step(const std::vector<const PairedSample<Scalar>*>& batch) {
  if (Index(batch.size()) != cfg_.batch_size)
    throw UsageError("batch has " + std::to_string(batch.size()) + " samples, config expects " +
                     std::to_string(cfg_.batch_size));
  std::vector<Image<Scalar>> images;
  std::vector<const SemanticMap*> maps;
  for (const auto* s : batch) {
    images.push_back(s->image);
    maps.push_back(&s->map);
  }
  const nn::Tensor<Scalar> x = stack_images(std::span<const Image<Scalar>>(images));
  const nn::Tensor<Scalar> c = stack_maps<Scalar>(maps);
  const Index n = cfg_.batch_size;
  const LatentBatch<Scalar> z_d = sample_latent<Scalar>(cfg_.latent_dim, n, z_rng_);
  StepMetrics m = discriminator_step(x, c, z_d);
  const LatentBatch<Scalar> z_g = sample_latent<Scalar>(cfg_.latent_dim, n, z_rng_);
  m.g_loss = generator_step(c, z_g).g_loss;
  ++iteration_;
  return m;
}

template <typename Scalar>
GanCheckpoint<Scalar> GanTrainer<Scalar>::checkpoint() {
  GanCheckpoint<Scalar> ck{export_params(gen_), export_params(disc_), json::object()};
  ck.metadata["iteration"] = iteration_;
  ck.metadata["seed"] = cfg_.seed;
  ck.metadata["trained"] = iteration_ > 0;
  ck.metadata["train_config"] = cfg_.to_json();
  return ck;
}

BatchSampler::BatchSampler(std::size_t dataset_size, std::uint64_t seed)
    : size_(dataset_size), rng_(seed) {
  if (dataset_size == 0) throw DataError("empty dataset");
}

std::vector<std::size_t> BatchSampler::next(Index batch_size) {
  std::vector<std::size_t> out;
  while (Index(out.size()) < batch_size) {
    if (cursor_ == order_.size()) {
      order_.resize(size_);
      std::iota(order_.begin(), order_.end(), std::size_t(0));
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    out.push_back(order_[cursor_++]);
  }
  return out;
}

template <typename Scalar>
std::vector<PairedSample<Scalar>> load_dataset(const fs::path& root, Index resolution) {
  const fs::path image_dir = root / "images", landmark_dir = root / "landmarks", map_dir = root / "maps";
  if (!fs::is_directory(image_dir)) throw DataError("dataset has no images/ directory: " + root.string());
  std::map<std::string, fs::path> stems;
  for (const auto& e : fs::directory_iterator(image_dir))
    if (e.path().extension() == ".png") stems[e.path().stem().string()] = e.path();
  if (stems.empty()) throw DataError("empty dataset: " + root.string());

  std::vector<PairedSample<Scalar>> out;
  for (const auto& [stem, image_path] : stems) {
    const Raster raw = read_png(image_path);
    PairedSample<Scalar> s;
    s.image = load_image<Scalar>(image_path, resolution);
    const fs::path cached = map_dir / (stem + ".png");
    if (fs::exists(cached) && read_png(cached).width == resolution) {
      s.map = load_map(cached);
      if (s.map.height != resolution) throw DataError("cached map is not square: " + cached.string());
    } else {
      const fs::path lm_path = landmark_dir / (stem + ".json");
      if (!fs::exists(lm_path)) throw DataError("no landmarks for image " + stem);
      LandmarkSet lms = load_landmarks(lm_path, raw.height, raw.width);
      const double sx = double(resolution) / double(raw.width);
      const double sy = double(resolution) / double(raw.height);
      for (auto& p : lms.points) p = {(p.x + 0.5) * sx - 0.5, (p.y + 0.5) * sy - 0.5};
      s.map = render_map(lms, resolution, resolution);
    }
    out.push_back(std::move(s));
  }
  return out;
}

template <typename Scalar>
fs::path train(const TrainConfig& cfg, const std::vector<PairedSample<Scalar>>& data,
               const TrainLogFn& on_log) {
  cfg.validate();
  if (data.empty()) throw DataError("empty dataset");
  for (const auto& s : data)
    if (s.image.height != cfg.resolution || s.image.width != cfg.resolution ||
        s.map.height != cfg.resolution || s.map.width != cfg.resolution)
      throw DataError("dataset sample does not match resolution " + std::to_string(cfg.resolution));
  fs::create_directories(cfg.out_dir);

  GanTrainer<Scalar> trainer(cfg);
  BatchSampler sampler(data.size(), derive_seed(cfg.seed, "train/batches"));
  std::ofstream metrics(cfg.out_dir / "metrics.csv", std::ios::trunc);
  if (!metrics) throw DataError("cannot write metrics log in " + cfg.out_dir.string());
  metrics << "iter,d_loss,g_loss,real_score,fake_score\n" << std::setprecision(9);

  for (long it = 1; it <= cfg.iterations; ++it) {
    std::vector<const PairedSample<Scalar>*> batch;
    for (std::size_t i : sampler.next(cfg.batch_size)) batch.push_back(&data[i]);
    const StepMetrics m = trainer.train_step(batch);
    if (it % cfg.log_every == 0) {
      metrics << it << ',' << m.d_loss << ',' << m.g_loss << ',' << m.real_score << ','
              << m.fake_score << '\n';
      if (on_log) on_log(it, m);
    }
    if (cfg.checkpoint_every > 0 && it % cfg.checkpoint_every == 0 && it != cfg.iterations)
      save_checkpoint(trainer.checkpoint(), cfg.out_dir / ("ckpt_" + std::to_string(it) + ".sgan"));
  }
  const fs::path final_path = cfg.out_dir / "checkpoint.sgan";
  save_checkpoint(trainer.checkpoint(), final_path);
  return final_path;
}

fs::path train(const TrainConfig& cfg, const TrainLogFn& on_log) {
  return train<float>(cfg, load_dataset<float>(cfg.dataset_root, cfg.resolution), on_log);
}

#define SGAN_INSTANTIATE(S)                                                                     \
  template double d_loss<S>(const nn::Vector<S>&, const nn::Vector<S>&);                       \
  template double g_loss<S>(const nn::Vector<S>&);                                              \
  template nn::Tensor<S> stack_maps<S>(const std::vector<const SemanticMap*>&);                 \
  template class GanTrainer<S>;                                                                 \
  template std::vector<PairedSample<S>> load_dataset<S>(const fs::path&, Index);                \
  template fs::path train<S>(const TrainConfig&, const std::vector<PairedSample<S>>&,           \
                             const TrainLogFn&);

SGAN_INSTANTIATE(float)
SGAN_INSTANTIATE(double)

#undef SGAN_INSTANTIATE

}  // namespace sgan
