// Acceptance suite: one PASS/FAIL line per criterion.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>

#include <sys/wait.h>

#include <CLI11.hpp>

#include "acceptance.hpp"
#include "gradient_fixtures.hpp"
#include "sgan/evaluation.hpp"
#include "sgan/inpainting.hpp"
#include "sgan/toy_corpus.hpp"
#include "sgan/training.hpp"
#include "test_support.hpp"

namespace sgan::acceptance {

namespace fs = std::filesystem;

int run_cli(const fs::path& cli, const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" + cli.string() + "\" " + args + " >>\"" + log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

namespace {

constexpr Index kRes = 32;

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::vector<char> bytes_of(const fs::path& p) { return testing::read_bytes(p); }

// Metric oracle ------------------------------------------------------------

/// PSNR written out from its definition on the 8-bit scale.
double reference_psnr(const Image<double>& a, const Image<double>& b) {
  long double sse = 0;
  for (Index i = 0; i < a.data.size(); ++i) {
    const long double d = (a.data.data()[i] - b.data.data()[i]) * 127.5L;
    sse += d * d;
  }
  const long double mse = sse / (long double)a.data.size();
  if (mse == 0) return 100.0;
  return double(10.0L * std::log10(255.0L * 255.0L / mse));
}

Outcome metric_oracle() {
  double worst = 0;
  for (int n = 2; n <= 5; ++n)
    for (std::uint64_t trial = 0; trial < 20; ++trial) {
      std::vector<Image<double>> frames;
      for (int i = 0; i < n; ++i)
        frames.push_back(testing::random_image<double>(16, 16, derive_seed(trial * 10 + std::uint64_t(n), std::uint64_t(i))));
      double sum = 0;
      int pairs = 0;
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) sum += reference_psnr(frames[std::size_t(i)], frames[std::size_t(j)]), ++pairs;
      worst = std::max(worst, std::abs(consistency(frames) - sum / pairs));
    }
  // MSE 1 on the 8-bit scale: one level apart everywhere.
  const Image<double> zeros = Image<double>::constant(8, 8, 0.0);
  const Image<double> one_level = Image<double>::constant(8, 8, 1.0 / 127.5);
  const double p1 = psnr(zeros, one_level);
  const double expected1 = 20.0 * std::log10(255.0);
  // MSE 255^2: black against white.
  const double p2 = psnr(Image<double>::constant(8, 8, -1.0), Image<double>::constant(8, 8, 1.0));
  Outcome out;
  out.pass = worst <= 1e-9 && std::abs(p1 - expected1) <= 1e-6 && std::abs(p2) <= 1e-6;
  out.detail = "max |consistency - brute force| " + fmt("%.2e", worst) + ", psnr(MSE 1) " + fmt("%.9f", p1) +
               " (expected " + fmt("%.9f", expected1) + "), psnr(MSE 255^2) " + fmt("%.2e", p2);
  return out;
}

// Gradient suite -----------------------------------------------------------

Outcome gradient_suite() {
  using namespace testing::grad;
  Reports all;
  for (const Reports& group : {conv2d(), conv_transpose2d(), latent_map_conv(), batch_norm_train(),
                               batch_norm_inference(), leaky_relu(), relu_tanh(), linear_head_sigmoid()})
    all.insert(all.end(), group.begin(), group.end());
  double worst = 0;
  int probes = 0;
  bool ok = true;
  for (const auto& r : all) {
    worst = std::max(worst, r.report.max_rel_error);
    probes += r.report.probes;
    ok = ok && r.report.probes > 0 && r.report.skipped <= r.report.probes && r.report.max_rel_error <= 1e-4;
  }
  for (bool normalized : {true, false}) {
    const testing::GradReport z = inpainting_latent(normalized);
    worst = std::max(worst, z.max_rel_error);
    probes += z.probes;
    ok = ok && z.probes >= 16 && z.max_rel_error <= 1e-4;
  }
  return {ok, std::to_string(all.size() + 2) + " gradient groups, " + std::to_string(probes) +
                  " accepted probes, max relative error " + fmt("%.2e", worst)};
}

// Overlay and clamp invariants ---------------------------------------------

Outcome overlay_clamp() {
  InpaintModel<float> model{Generator<float>(GeneratorSpec{kRes, 100, 16, 512}),
                            Discriminator<float>(DiscriminatorSpec{kRes, 16, 512}), false};
  model.generator.initialize(derive_seed(3, "g"));
  model.discriminator.initialize(derive_seed(3, "d"));
  Rng rng(derive_seed(3, "runs"));
  std::uniform_int_distribution<int> kind(0, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int bad_pixels = 0, bad_steps = 0, steps = 0;
  for (int run = 0; run < 100; ++run) {
    const std::uint64_t seed = rng();
    const FaceSpec face = sample_face(seed, kRes, kRes);
    const auto sample = render_face<float>(face, kRes, kRes);
    MaskSpec spec;
    switch (kind(rng)) {
      case 0: spec = MaskSpec::central(0.5 + 0.2 * unit(rng)); break;
      case 1: spec = MaskSpec::checkerboard(Index(1 + unit(rng) * 15)); break;
      case 2: spec = MaskSpec::left(); break;
      default: spec = MaskSpec::freehand(rng()); break;
    }
    const Mask mask = make_mask(spec, kRes, kRes);
    const Image<float> corrupted = apply_mask(sample.image, mask);
    InpaintConfig cfg;
    cfg.iterations = 10;
    cfg.seed = seed;
    cfg.learning_rate = std::pow(10.0, -3.0 + 4.0 * unit(rng));  // up to 10, so the clamp binds
    const auto result = optimize_latent<float>(model, corrupted, mask, sample.map, cfg,
                                               [&](long, const LatentVector<float>& z) {
                                                 ++steps;
                                                 bad_steps += z.minCoeff() < -1.0f || z.maxCoeff() > 1.0f;
                                               });
    for (Index p = 0; p < mask.pixels(); ++p)
      if (mask.data(p))
        for (Index c = 0; c < 3; ++c) bad_pixels += result.inpainted.data(c, p) != corrupted.data(c, p);
  }
  return {bad_pixels == 0 && bad_steps == 0 && steps == 1000,
          std::to_string(steps) + " observed steps, " + std::to_string(bad_steps) + " with z outside [-1, 1], " +
              std::to_string(bad_pixels) + " known pixels altered"};
}

// Trained fixtures ------------------------------------------------------

/// Training settings shared by the toy fixtures.
TrainConfig toy_train_config(long iterations, std::uint64_t seed) {
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.resolution = kRes;
  cfg.base_filters = 16;
  cfg.latent_dim = 100;
  cfg.iterations = iterations;
  cfg.seed = seed;
  cfg.log_every = 50;
  return cfg;
}

constexpr long kMemorizeIterations = 5000;
constexpr std::uint64_t kMemorizeSeed = 11;

std::string memorize_args(const fs::path& corpus, const fs::path& out) {
  return "train --dataset " + corpus.string() + " --resolution 32 --batch-size 8 --base-filters 16 --latent-dim 100" +
         " --iterations " + std::to_string(kMemorizeIterations) + " --seed " + std::to_string(kMemorizeSeed) +
         " --log-every 50 --out " + out.string();
}

/// Model A: trained through the command line on an 8-face corpus.
struct MemorizedFixture {
  fs::path corpus, run;
  bool ok = false;
};

MemorizedFixture memorized(const fs::path& cli, const fs::path& work) {
  static std::optional<MemorizedFixture> cached;
  if (cached) return *cached;
  MemorizedFixture f{work / "model_a" / "corpus", work / "model_a" / "run"};
  const fs::path log = work / "model_a.log";
  fs::create_directories(work / "model_a");
  f.ok = run_cli(cli, "corpus --n 8 --seed 4 --resolution 32 --out " + f.corpus.string(), log) == 0 &&
         run_cli(cli, memorize_args(f.corpus, f.run), log) == 0;
  cached = f;
  return f;
}

// Memorization -------------------------------------------------------------

Outcome memorization(const fs::path& cli, const fs::path& work) {
  const auto t0 = std::chrono::steady_clock::now();
  const MemorizedFixture f = memorized(cli, work);
  if (!f.ok) return {false, "training through the command line failed (see model_a.log)"};
  const double train_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  auto model = InpaintModel<float>::from_checkpoint(load_checkpoint<float>(f.run / "checkpoint.sgan"));
  const auto data = load_dataset<float>(f.corpus, kRes);
  Rng rng(derive_seed(5, "z"));
  const auto z = sample_latent<float>(100, 64, rng);
  double worst = 0;
  for (const auto& sample : data) {
    std::vector<Image<float>> maps(64, sample.map.to_image<float>());
    const auto out = model.generator.forward(z, stack_images(std::span<const Image<float>>(maps)), nn::Mode::Inference);
    double best = 1e9;
    for (Index j = 0; j < 64; ++j)
      best = std::min(best, double((unstack_image(out, j).data - sample.image.data).cwiseAbs().mean()));
    worst = std::max(worst, best);
  }
  return {data.size() == 8 && worst <= 0.15,
          std::to_string(data.size()) + " pairs, worst min-over-64-z MAE " + fmt("%.4f", worst) + " after " +
              std::to_string(kMemorizeIterations) + " iterations (" + fmt("%.0f", train_s) + " s)"};
}

// Determinism --------------------------------------------------------------

constexpr long kEvalIterations = 200;

std::string eval_args(const MemorizedFixture& f, const fs::path& out) {
  return "eval --checkpoint " + (f.run / "checkpoint.sgan").string() + " --dataset " + f.corpus.string() +
         " --protocol both --n 4 --jobs 2 --iterations " + std::to_string(kEvalIterations) + " --seed 3 --out " + out.string();
}

bool same_files(const fs::path& a, const fs::path& b, std::vector<std::string>& diffs, int& files) {
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto rel = fs::relative(e.path(), a);
    if (!fs::exists(b / rel) || bytes_of(e.path()) != bytes_of(b / rel)) diffs.push_back(rel.string());
  }
  return diffs.empty();
}

/// Runs `args_for(dir)` twice into the same directory, the first result moved
/// aside, since resolved configs and checkpoints record their output path.
bool repeat_into(const fs::path& cli, const fs::path& dir, const std::function<std::string(const fs::path&)>& args_for,
                 const fs::path& log, std::vector<std::string>& diffs, int& files) {
  const fs::path first = dir.string() + "_first";
  fs::remove_all(first);
  if (!fs::exists(dir) && run_cli(cli, args_for(dir), log) != 0) return false;
  fs::rename(dir, first);
  if (run_cli(cli, args_for(dir), log) != 0) return false;
  same_files(first, dir, diffs, files);
  same_files(dir, first, diffs, files);
  return true;
}

Outcome determinism(const fs::path& cli, const fs::path& work) {
  const MemorizedFixture f = memorized(cli, work);
  if (!f.ok) return {false, "first training run failed"};
  const fs::path log = work / "determinism.log";
  std::vector<std::string> diffs;
  int train_files = 0, eval_files = 0;
  if (!repeat_into(cli, f.run, [&](const fs::path& d) { return memorize_args(f.corpus, d); }, log, diffs, train_files))
    return {false, "repeat training run failed"};
  if (!repeat_into(cli, work / "eval", [&](const fs::path& d) { return eval_args(f, d); }, log, diffs, eval_files))
    return {false, "evaluation sweep failed"};
  std::string detail = "repeated training (" + std::to_string(train_files / 2) + " files incl. checkpoint) and " +
                       "evaluation sweep (" + std::to_string(eval_files / 2) + " report files, " +
                       std::to_string(kEvalIterations) + " inpainting iterations)";
  for (const auto& d : diffs) detail += "; differs: " + d;
  return {diffs.empty() && train_files >= 6 && eval_files >= 12, detail};
}

// Model B: memorization corpus plus a pose x appearance grid -------------

constexpr int kGridPoses = 4;
constexpr int kGridAppearances = 16;
constexpr long kAugmentedIterations = 4000;

std::vector<PairedSample<float>> augmented_corpus() {
  std::vector<PairedSample<float>> data;
  for (std::uint64_t i = 0; i < 8; ++i) data.push_back(render_face<float>(sample_face(derive_seed(1, i), kRes, kRes), kRes, kRes));
  for (int p = 0; p < kGridPoses; ++p)
    for (int a = 0; a < kGridAppearances; ++a) {
      FaceSpec f;
      f.pose = sample_pose(derive_seed(2, std::uint64_t(p)), kRes, kRes);
      // Alternate the mouth so each sign is seen under several appearances.
      f.pose.mouth_curvature = (p % 2 ? -1.0 : 1.0) * (0.6 + 0.2 * double(p % 3));
      f.appearance = sample_appearance(derive_seed(4, std::uint64_t(a)));
      data.push_back(render_face<float>(f, kRes, kRes));
    }
  return data;
}

struct AugmentedFixture {
  std::vector<PairedSample<float>> data;
  std::optional<InpaintModel<float>> model;
};

AugmentedFixture& augmented(const fs::path& work) {
  static AugmentedFixture f;
  if (f.model) return f;
  f.data = augmented_corpus();
  TrainConfig cfg = toy_train_config(kAugmentedIterations, 7);
  cfg.out_dir = work / "model_b";
  f.model = InpaintModel<float>::from_checkpoint(load_checkpoint<float>(train<float>(cfg, f.data)));
  return f;
}

// Self-recovery ------------------------------------------------------------

/// Recovered fixtures out of ten, with the final/initial ratios.
std::pair<int, std::string> recover(InpaintModel<float>& model, const std::vector<PairedSample<float>>& data,
                                    bool normalized) {
  const Mask mask = make_mask(MaskSpec::central(0.5625), kRes, kRes);
  Rng rng(derive_seed(4, "z*"));
  int recovered = 0;
  std::string ratios;
  for (int k = 0; k < 10; ++k) {
    const auto z_star = sample_latent<float>(100, 1, rng);
    const SemanticMap& map = data[std::size_t(k * 7) % data.size()].map;
    const auto target =
        unstack_image(model.generator.forward(z_star, stack_images(map.to_image<float>()), nn::Mode::Inference), 0);
    InpaintConfig cfg;
    cfg.seed = derive_seed(4, std::uint64_t(k));
    cfg.normalize_contextual = normalized;
    const auto r = optimize_latent(model, apply_mask(target, mask), mask, map, cfg);
    const double ratio = r.final().contextual / r.initial().contextual;
    recovered += ratio <= 0.1;
    ratios += (k ? " " : "") + fmt("%.3f", ratio);
  }
  return {recovered, ratios};
}

Outcome self_recovery(const fs::path& work) {
  auto& f = augmented(work);
  const auto [recovered, ratios] = recover(*f.model, f.data, true);
  // Informational: the unnormalized L1 sum, where eta = 0.1 weighs far less.
  const auto [raw, raw_ratios] = recover(*f.model, f.data, false);
  return {recovered >= 9, std::to_string(recovered) + "/10 fixtures reach final/initial contextual <= 0.1 (ratios " +
                              ratios + "); unnormalized contextual sum: " + std::to_string(raw) + "/10 (" +
                              raw_ratios + ")"};
}

// Disentanglement ----------------------------------------------------------

/// Five held-out maps with alternating mouth curvature sign.
std::vector<std::pair<SemanticMap, double>> held_out_maps() {
  std::vector<std::pair<SemanticMap, double>> maps;
  for (std::uint64_t k = 0; k < 5; ++k) {
    FacePose p = sample_pose(derive_seed(6, k), kRes, kRes);
    p.mouth_curvature = k % 2 ? -0.8 : 0.8;
    maps.emplace_back(render_map(synth_landmarks(p, kRes, kRes), kRes, kRes), p.mouth_curvature);
  }
  return maps;
}

/// Skin color spread the sampler itself produces over five faces: the
/// 5th percentile, over many draws, of the largest per-channel standard
/// deviation of five sampled skin colors (generator range).
double sampler_skin_threshold() {
  std::vector<double> stds;
  for (std::uint64_t t = 0; t < 2000; ++t) {
    double worst = 0;
    std::array<double, 5> v{};
    for (std::size_t k = 0; k < 3; ++k) {
      for (std::size_t j = 0; j < 5; ++j) v[j] = 2.0 * sample_appearance(derive_seed(derive_seed(60, t), j)).skin[k] - 1.0;
      double mean = 0, sq = 0;
      for (double x : v) mean += x / 5;
      for (double x : v) sq += (x - mean) * (x - mean);
      worst = std::max(worst, std::sqrt(sq / 4));
    }
    stds.push_back(worst);
  }
  std::sort(stds.begin(), stds.end());
  return stds[stds.size() / 20];
}

Outcome disentanglement(const fs::path& work) {
  auto& f = augmented(work);
  auto& g = f.model->generator;
  const auto maps = held_out_maps();

  // (a) one z, five maps.
  Rng rng(derive_seed(6, "z"));
  const auto z = sample_latent<float>(100, 1, rng);
  int agree = 0;
  for (const auto& [map, curvature] : maps) {
    const auto img = unstack_image(g.forward(z, stack_images(map.to_image<float>()), nn::Mode::Inference), 0);
    agree += (mouth_curvature_statistic(img, map) > 0) == (curvature > 0);
  }

  // (b) one map, five z.
  const double threshold = sampler_skin_threshold();
  const SemanticMap& map = maps.front().first;
  const auto zs = sample_latent<float>(100, 5, rng);
  std::vector<Image<float>> stacked(5, map.to_image<float>());
  const auto out = g.forward(zs, stack_images(std::span<const Image<float>>(stacked)), nn::Mode::Inference);
  const Mask region = skin_region(map);
  std::array<std::array<double, 5>, 3> means{};
  int positive = 0;
  for (Index j = 0; j < 5; ++j) {
    const auto img = unstack_image(out, j);
    const Color c = region_mean(img, region);
    for (std::size_t k = 0; k < 3; ++k) means[k][std::size_t(j)] = c[k];
    positive += mouth_curvature_statistic(img, map) > 0;
  }
  double spread = 0;
  for (const auto& v : means) {
    double mean = 0, sq = 0;
    for (double x : v) mean += x / 5;
    for (double x : v) sq += (x - mean) * (x - mean);
    spread = std::max(spread, std::sqrt(sq / 4));
  }
  const bool constant_sign = positive == 0 || positive == 5;
  return {agree >= 4 && spread > threshold && constant_sign,
          "(a) " + std::to_string(agree) + "/5 curvature signs follow the map; (b) skin std " + fmt("%.4f", spread) +
              " vs threshold " + fmt("%.4f", threshold) + ", " + std::to_string(positive) + "/5 positive curvature"};
}

// Mask census --------------------------------------------------------------

Outcome mask_census() {
  Rng rng(derive_seed(8, "census"));
  std::uniform_real_distribution<double> central(0.5, 0.7);
  int masks = 0;
  std::vector<std::string> problems;
  auto note = [&](const std::string& what) {
    if (problems.size() < 5) problems.push_back(what);
  };
  for (Index res : {32, 64, 128}) {
    const double area = double(res * res);
    std::uniform_int_distribution<Index> cell(1, res / 2);
    for (int i = 0; i < 1000; ++i) {
      const MaskSpec specs[] = {MaskSpec::central(central(rng)), MaskSpec::freehand(rng()), MaskSpec::left(),
                                MaskSpec::checkerboard(cell(rng))};
      for (const MaskSpec& spec : specs) {
        const Mask m = make_mask(spec, res, res);
        ++masks;
        const std::string tag = std::string(to_string(spec.kind)) + " at " + std::to_string(res);
        if (m.height != res || m.width != res) note(tag + ": wrong shape");
        if (!m.is_binary()) note(tag + ": not binary");
        const double frac = m.corrupted_fraction();
        switch (spec.kind) {
          case MaskKind::Central:
            if (frac < 0.5 || frac > 0.7) note(tag + ": fraction " + fmt("%.4f", frac));
            break;
          case MaskKind::Freehand:
            if (frac < 0.23 || frac > 0.27) note(tag + ": fraction " + fmt("%.4f", frac));
            break;
          case MaskKind::Left:
            if (frac != 0.5) note(tag + ": fraction " + fmt("%.4f", frac));
            break;
          case MaskKind::Checkerboard: {
            const double rh = double(res % (2 * spec.cell)), rw = double(res % (2 * spec.cell));
            if (std::abs(frac - 0.5) > rh * rw / (2 * area) + 1e-12)
              note(tag + " cell " + std::to_string(spec.cell) + ": fraction " + fmt("%.4f", frac));
            break;
          }
        }
      }
    }
  }
  std::string detail = std::to_string(masks) + " masks over 4 kinds at 32, 64 and 128";
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

}  // namespace
}  // namespace sgan::acceptance

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  using namespace sgan::acceptance;
  CLI::App app{"Acceptance criteria for the conditioned inpainting GAN"};
  fs::path work = fs::temp_directory_path() / "sgan_acceptance";
  fs::path cli = SGAN_CLI_PATH;
  std::vector<int> only;
  app.add_option("--work-dir", work, "Scratch directory for trained fixtures");
  app.add_option("--cli", cli, "Command-line binary");
  app.add_option("--only", only, "Run only these criteria")->check(CLI::Range(1, 9));
  CLI11_PARSE(app, argc, argv);
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"metric oracle", [] { return metric_oracle(); }},
      {"gradient suite", [] { return gradient_suite(); }},
      {"overlay and clamp invariants", [] { return overlay_clamp(); }},
      {"self-recovery", [&] { return self_recovery(work); }},
      {"overfit memorization", [&] { return memorization(cli, work); }},
      {"disentanglement", [&] { return disentanglement(work); }},
      {"degenerate-case ladder", [&] { return degenerate_ladder(cli, work / "ladder"); }},
      {"mask census", [] { return mask_census(); }},
      {"determinism", [&] { return determinism(cli, work); }},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = int(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), number) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = criteria[i].second();
    } catch (const std::exception& e) {
      out = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += !out.pass;
    std::printf("%s %d %s: %s [%.1f s]\n", out.pass ? "PASS" : "FAIL", number, criteria[i].first.c_str(),
                out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
