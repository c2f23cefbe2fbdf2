#include "sgan/inpainting.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "sgan/nn/adam.hpp"
#include "sgan/rng.hpp"
#include "sgan/training.hpp"

namespace sgan {

using nlohmann::json;

void InpaintConfig::validate() const {
  if (!(eta >= 0)) throw UsageError("eta must be non-negative");
  if (iterations < 0) throw UsageError("iterations must be non-negative");
  if (!(learning_rate >= 0)) throw UsageError("learning rate must be non-negative");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1))
    throw UsageError("Adam betas must lie in [0, 1)");
  if (!(z_min < z_max)) throw UsageError("z clamp bounds are empty");
  if (restarts < 1) throw UsageError("restarts must be at least 1");
}

json InpaintConfig::to_json() const {
  return {{"eta", eta},
          {"learning_rate", learning_rate},
          {"iterations", iterations},
          {"beta1", beta1},
          {"beta2", beta2},
          {"z_min", z_min},
          {"z_max", z_max},
          {"seed", seed},
          {"restarts", restarts},
          {"normalize_contextual", normalize_contextual}};
}

template <typename Scalar>
InpaintModel<Scalar> InpaintModel<Scalar>::from_checkpoint(const GanCheckpoint<Scalar>& ckpt) {
  return {make_generator(ckpt.generator), make_discriminator(ckpt.discriminator),
          ckpt.metadata.value("trained", false)};
}

namespace {

void check_shapes(Index h, Index w, const Mask& mask, const char* what) {
  if (mask.height != h || mask.width != w) throw UsageError(std::string(what) + ": mask shape mismatch");
}

}  // namespace

template <typename Scalar>
double contextual_loss(const Image<Scalar>& gen, const Image<Scalar>& corrupted, const Mask& mask,
                       bool normalized) {
  if (!gen.same_shape(corrupted)) throw UsageError("contextual_loss: image shape mismatch");
  check_shapes(gen.height, gen.width, mask, "contextual_loss");
  const Index ones = mask.count_ones();
  if (ones == 0) return 0.0;
  double sum = 0;
  for (Index p = 0; p < gen.pixels(); ++p)
    if (mask.data(p) != 0)
      for (Index c = 0; c < 3; ++c) sum += std::abs(double(gen.data(c, p)) - double(corrupted.data(c, p)));
  return normalized ? sum / double(3 * ones) : sum;
}

double perceptual_loss(double disc_score) {
  return std::log(1.0 - std::clamp(disc_score, kScoreEpsilon, 1.0 - kScoreEpsilon));
}

template <typename Scalar>
Image<Scalar> overlay(const Image<Scalar>& corrupted, const Image<Scalar>& gen, const Mask& mask) {
  if (!gen.same_shape(corrupted)) throw UsageError("overlay: image shape mismatch");
  check_shapes(gen.height, gen.width, mask, "overlay");
  Image<Scalar> out = gen;
  for (Index p = 0; p < gen.pixels(); ++p)
    if (mask.data(p) != 0) out.data.col(p) = corrupted.data.col(p);
  return out;
}

template <typename Scalar>
LossAndGradient<Scalar> inpaint_loss(InpaintModel<Scalar>& model, const LatentVector<Scalar>& z,
                                     const Image<Scalar>& corrupted, const Mask& mask,
                                     const Image<Scalar>& map, const InpaintConfig& cfg) {
  const nn::Tensor<Scalar> maps = stack_images(map);
  const nn::Tensor<Scalar> gen_t = model.generator.forward(z, maps, nn::Mode::Inference);
  LossAndGradient<Scalar> out;
  out.generated = unstack_image(gen_t, 0);
  const Image<Scalar>& gen = out.generated;

  const double logit = double(model.discriminator.forward(gen_t, maps, nn::Mode::Inference)(0));
  const double score = nn::sigmoid(logit);
  out.loss.contextual = contextual_loss(gen, corrupted, mask, cfg.normalize_contextual);
  out.loss.perceptual = perceptual_loss(score);
  out.loss.total = out.loss.contextual + cfg.eta * out.loss.perceptual;

  nn::Tensor<Scalar> d_gen(1, 3, gen.height, gen.width);
  const Index ones = mask.count_ones();
  if (ones > 0) {
    const Scalar scale = Scalar(cfg.normalize_contextual ? 1.0 / double(3 * ones) : 1.0);
    for (Index p = 0; p < gen.pixels(); ++p)
      if (mask.data(p) != 0)
        for (Index c = 0; c < 3; ++c) {
          const Scalar r = gen.data(c, p) - corrupted.data(c, p);
          d_gen.data(c, p) = r > 0 ? scale : (r < 0 ? -scale : Scalar(0));
        }
  }
  if (cfg.eta > 0 && score >= kScoreEpsilon && score <= 1.0 - kScoreEpsilon) {
    nn::Vector<Scalar> d_logit(1);
    d_logit(0) = Scalar(-cfg.eta * score);
    d_gen.data += model.discriminator.backward(d_logit, nn::ParamGrads::Skip).data;
  }
  out.dz = model.generator.backward(d_gen, nn::ParamGrads::Skip).col(0);
  return out;
}

template <typename Scalar>
InpaintResult<Scalar> optimize_latent(InpaintModel<Scalar>& model, const Image<Scalar>& corrupted,
                                      const Mask& mask, const SemanticMap& map,
                                      const InpaintConfig& cfg, const StepObserver<Scalar>& observe) {
  cfg.validate();
  const Index res = model.generator.spec().resolution;
  if (corrupted.height != res || corrupted.width != res)
    throw UsageError("inpainting: image is " + std::to_string(corrupted.height) + "x" +
                     std::to_string(corrupted.width) + " but the model expects " + std::to_string(res));
  if (map.height != res || map.width != res) throw UsageError("inpainting: map resolution mismatch");
  check_shapes(res, res, mask, "inpainting");

  const Image<Scalar> map_img = map.template to_image<Scalar>();
  const Index dim = model.generator.spec().latent_dim;
  Rng rng(derive_seed(cfg.seed, "inpaint/z"));
  InpaintResult<Scalar> best;
  int best_restart = -1;
  for (int r = 0; r < cfg.restarts; ++r) {
    nn::Parameter<Scalar> z("z", dim, 1);
    z.value = sample_latent<Scalar>(dim, 1, rng);
    nn::Adam<Scalar> adam({cfg.learning_rate, cfg.beta1, cfg.beta2, 1e-8});
    InpaintResult<Scalar> res_r;
    auto e = inpaint_loss<Scalar>(model, z.value.col(0), corrupted, mask, map_img, cfg);
    res_r.trace.push_back(e.loss);
    for (long it = 1; it <= cfg.iterations; ++it) {
      z.grad = e.dz;
      adam.step({&z});
      z.value = z.value.cwiseMax(Scalar(cfg.z_min)).cwiseMin(Scalar(cfg.z_max));
      if (observe) observe(it, z.value.col(0));
      e = inpaint_loss<Scalar>(model, z.value.col(0), corrupted, mask, map_img, cfg);
      if (!std::isfinite(e.loss.total))
        throw NumericalError("non-finite inpainting loss at iteration " + std::to_string(it));
      res_r.trace.push_back(e.loss);
    }
    if (!std::isfinite(e.loss.total)) throw NumericalError("non-finite inpainting loss");
    if (best_restart < 0 || e.loss.total < best.final().total) {
      res_r.z_hat = z.value.col(0);
      res_r.generated = std::move(e.generated);
      res_r.inpainted = overlay(corrupted, res_r.generated, mask);
      best = std::move(res_r);
      best_restart = r;
    }
  }
  best.metadata["seed"] = cfg.seed;
  best.metadata["restart"] = best_restart;
  best.metadata["model_trained"] = model.trained;
  if (!model.trained) best.metadata["warning"] = "model parameters are untrained";
  return best;
}

namespace {

template <typename E>
[[noreturn]] void rethrow_with_frame(const E& e, std::size_t frame) {
  throw E("frame " + std::to_string(frame) + ": " + e.what());
}

}  // namespace

template <typename Scalar>
std::vector<InpaintResult<Scalar>> inpaint_sequence(InpaintModel<Scalar>& model,
                                                    const std::vector<Image<Scalar>>& frames,
                                                    const std::vector<Mask>& masks,
                                                    const std::vector<SemanticMap>& maps,
                                                    const InpaintConfig& cfg) {
  if (frames.size() != masks.size())
    throw UsageError("inpaint_sequence: every frame needs a mask");
  if (maps.size() != frames.size() && maps.size() != 1)
    throw UsageError("inpaint_sequence: give one map per frame or a single shared map");
  std::vector<InpaintResult<Scalar>> out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    InpaintConfig frame_cfg = cfg;
    frame_cfg.seed = cfg.seed + i;
    try {
      out.push_back(optimize_latent(model, frames[i], masks[i], maps.size() == 1 ? maps[0] : maps[i],
                                    frame_cfg));
    } catch (const UsageError& e) {
      rethrow_with_frame(e, i);
    } catch (const DataError& e) {
      rethrow_with_frame(e, i);
    } catch (const NumericalError& e) {
      rethrow_with_frame(e, i);
    }
    out.back().metadata["frame"] = i;
  }
  return out;
}

void write_loss_trace(const std::vector<LossRecord>& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write: " + path.string());
  out << "iter,total,contextual,perceptual\n" << std::setprecision(9);
  for (std::size_t i = 0; i < trace.size(); ++i)
    out << i << ',' << trace[i].total << ',' << trace[i].contextual << ',' << trace[i].perceptual << '\n';
}

template <typename Scalar>
json result_manifest(const InpaintResult<Scalar>& result, const InpaintConfig& cfg, const MaskSpec& mask) {
  json j;
  j["seed"] = cfg.seed;
  j["config"] = cfg.to_json();
  j["mask"] = {{"kind", std::string(to_string(mask.kind))},
               {"fraction", mask.fraction},
               {"cell", mask.cell},
               {"seed", mask.seed}};
  j["initial_loss"] = {{"total", result.initial().total},
                       {"contextual", result.initial().contextual},
                       {"perceptual", result.initial().perceptual}};
  j["final_loss"] = {{"total", result.final().total},
                     {"contextual", result.final().contextual},
                     {"perceptual", result.final().perceptual}};
  j["z_hat"] = std::vector<double>(result.z_hat.data(), result.z_hat.data() + result.z_hat.size());
  j["metadata"] = result.metadata;
  return j;
}

#define SGAN_INSTANTIATE(S)                                                                          \
  template struct InpaintModel<S>;                                                                   \
  template double contextual_loss<S>(const Image<S>&, const Image<S>&, const Mask&, bool);          \
  template Image<S> overlay<S>(const Image<S>&, const Image<S>&, const Mask&);                       \
  template LossAndGradient<S> inpaint_loss<S>(InpaintModel<S>&, const LatentVector<S>&,              \
                                              const Image<S>&, const Mask&, const Image<S>&,         \
                                              const InpaintConfig&);                                 \
  template InpaintResult<S> optimize_latent<S>(InpaintModel<S>&, const Image<S>&, const Mask&,       \
                                               const SemanticMap&, const InpaintConfig&,             \
                                               const StepObserver<S>&);                              \
  template std::vector<InpaintResult<S>> inpaint_sequence<S>(                                        \
      InpaintModel<S>&, const std::vector<Image<S>>&, const std::vector<Mask>&,                      \
      const std::vector<SemanticMap>&, const InpaintConfig&);                                        \
  template json result_manifest<S>(const InpaintResult<S>&, const InpaintConfig&, const MaskSpec&);

SGAN_INSTANTIATE(float)
SGAN_INSTANTIATE(double)

#undef SGAN_INSTANTIATE

}  // namespace sgan
