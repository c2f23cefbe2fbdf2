// Command-line front end: corpus, maps, train, sample, inpaint, inpaint-seq, eval.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sgan/checkpoint.hpp"
#include "sgan/config.hpp"
#include "sgan/evaluation.hpp"
#include "sgan/inpainting.hpp"
#include "sgan/masks.hpp"
#include "sgan/semantic_map.hpp"
#include "sgan/toy_corpus.hpp"
#include "sgan/training.hpp"

namespace fs = std::filesystem;
using namespace sgan;
using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

/// Flags that map onto config keys; only flags given on the command line
/// override the config file.
struct ConfigFlags {
  struct Entry {
    CLI::Option* option;
    std::string key;
    std::string value;
  };
  std::vector<std::unique_ptr<Entry>> entries;
  std::string config_path;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto e = std::make_unique<Entry>();
    e->key = key;
    e->option = app->add_option(flag, e->value, help);
    entries.push_back(std::move(e));
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config_path.empty()) cfg.merge(read_config_file(config_path));
    for (const auto& e : entries)
      if (e->option->count() > 0) cfg.set(e->key, e->value);
    cfg.resolve();
    return cfg;
  }
};

void add_common(CLI::App* app, ConfigFlags& flags) {
  app->add_option("--config", flags.config_path, "TOML config file (flat dotted keys) or resolved-config JSON");
  flags.add(app, "--seed", "seed", "Top-level random seed");
  flags.add(app, "--resolution", "resolution", "Image resolution: 32, 64 or 128");
  flags.add(app, "--out", "paths.out", "Output directory");
}

void add_inpaint_flags(CLI::App* app, ConfigFlags& flags) {
  flags.add(app, "--checkpoint", "paths.checkpoint", "Trained checkpoint");
  flags.add(app, "--iterations", "inpaint.iterations", "Latent optimization steps");
  flags.add(app, "--eta", "inpaint.eta", "Perceptual loss weight");
  flags.add(app, "--restarts", "inpaint.restarts", "Random restarts (best of k)");
}

struct LoadedModel {
  InpaintModel<float> model;
  GanCheckpoint<float> ckpt;
};

LoadedModel load_model(const RunConfig& cfg, bool resolution_given) {
  if (cfg.checkpoint.empty()) throw UsageError("--checkpoint is required");
  auto ckpt = load_checkpoint<float>(cfg.checkpoint);
  auto model = InpaintModel<float>::from_checkpoint(ckpt);
  const Index res = model.generator.spec().resolution;
  if (resolution_given && res != cfg.resolution)
    throw DataError("checkpoint resolution " + std::to_string(res) + " does not match --resolution " +
                    std::to_string(cfg.resolution));
  return {std::move(model), std::move(ckpt)};
}

/// Landmarks given in the pixel frame of a reference image, rescaled to a
/// square target resolution.
LandmarkSet scaled_landmarks(const fs::path& path, Index src_h, Index src_w, Index res) {
  LandmarkSet lms = load_landmarks(path, src_h, src_w);
  const double sx = double(res) / double(src_w), sy = double(res) / double(src_h);
  for (auto& p : lms.points) p = {(p.x + 0.5) * sx - 0.5, (p.y + 0.5) * sy - 0.5};
  return lms;
}

SemanticMap load_condition(const std::string& map_path, const std::string& landmark_path,
                           const fs::path& image_path, Index res) {
  if (!map_path.empty()) {
    SemanticMap map = load_map(map_path);
    if (map.height != res || map.width != res)
      throw DataError("map is " + std::to_string(map.height) + "x" + std::to_string(map.width) +
                      " but the checkpoint expects " + std::to_string(res));
    return map;
  }
  if (landmark_path.empty()) throw UsageError("give --map or --landmarks");
  const Raster raw = read_png(image_path);
  return render_map(scaled_landmarks(landmark_path, raw.height, raw.width, res), res, res);
}

Mask resolve_mask(const RunConfig& cfg, const std::string& mask_file, Index res) {
  if (!mask_file.empty()) {
    Mask m = load_mask(mask_file);
    if (m.height != res || m.width != res) throw DataError("mask shape does not match the model resolution");
    return m;
  }
  MaskSpec spec;
  switch (cfg.mask) {
    case MaskKind::Central: spec = MaskSpec::central(cfg.mask_fraction); break;
    case MaskKind::Checkerboard: spec = MaskSpec::checkerboard(); break;
    case MaskKind::Left: spec = MaskSpec::left(); break;
    case MaskKind::Freehand: spec = MaskSpec::freehand(derive_seed(cfg.seed, "cli/freehand")); break;
  }
  return make_mask(spec, res, res);
}

MaskSpec mask_spec_of(const RunConfig& cfg) {
  switch (cfg.mask) {
    case MaskKind::Central: return MaskSpec::central(cfg.mask_fraction);
    case MaskKind::Checkerboard: return MaskSpec::checkerboard();
    case MaskKind::Left: return MaskSpec::left();
    case MaskKind::Freehand: return MaskSpec::freehand(derive_seed(cfg.seed, "cli/freehand"));
  }
  return {};
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

/// Tiles equally sized images row-major into one image.
ImageF make_grid(const std::vector<std::vector<ImageF>>& rows) {
  const Index h = rows.front().front().height, w = rows.front().front().width;
  const Index nr = Index(rows.size()), nc = Index(rows.front().size());
  ImageF grid = ImageF::constant(nr * h, nc * w, 1.0f);
  for (Index r = 0; r < nr; ++r)
    for (Index c = 0; c < nc; ++c)
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x)
          for (Index k = 0; k < 3; ++k) grid(k, r * h + y, c * w + x) = rows[std::size_t(r)][std::size_t(c)](k, y, x);
  return grid;
}

int cmd_corpus(const ConfigFlags& flags) {
  RunConfig cfg = flags.resolve();
  make_corpus(cfg.n, cfg.seed, cfg.resolution, cfg.resolution, cfg.out);
  write_resolved_config(cfg, cfg.out);
  std::cout << "wrote " << cfg.n << " faces to " << cfg.out.string() << '\n';
  return kOk;
}

int cmd_maps(const ConfigFlags& flags, const std::string& landmarks, const std::string& reference) {
  RunConfig cfg = flags.resolve();
  if (landmarks.empty()) throw UsageError("--landmarks is required");
  std::vector<fs::path> files;
  if (fs::is_directory(landmarks)) {
    for (const auto& e : fs::directory_iterator(landmarks))
      if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(landmarks);
  }
  if (files.empty()) throw DataError("no landmark files in " + landmarks);
  fs::create_directories(cfg.out);
  Index src = cfg.resolution;
  if (!reference.empty()) src = read_png(reference).width;
  for (const auto& f : files) {
    const SemanticMap map = render_map(scaled_landmarks(f, src, src, cfg.resolution), cfg.resolution, cfg.resolution);
    save_map(map, cfg.out / (f.stem().string() + ".png"));
  }
  write_resolved_config(cfg, cfg.out);
  std::cout << "rendered " << files.size() << " maps into " << cfg.out.string() << '\n';
  return kOk;
}

int cmd_train(const ConfigFlags& flags) {
  RunConfig cfg = flags.resolve();
  if (cfg.dataset.empty()) throw UsageError("--dataset is required");
  fs::create_directories(cfg.out);
  write_resolved_config(cfg, cfg.out);
  const fs::path ckpt = train(cfg.train, [](long it, const StepMetrics& m) {
    std::printf("iter %ld  d_loss %.4f  g_loss %.4f  D(x) %.3f  D(G(z)) %.3f\n", it, m.d_loss, m.g_loss,
                m.real_score, m.fake_score);
    std::fflush(stdout);
  });
  std::cout << "checkpoint: " << ckpt.string() << '\n';
  return kOk;
}

int cmd_sample(const ConfigFlags& flags, const std::string& grid, bool resolution_given) {
  RunConfig cfg = flags.resolve();
  if (grid != "same-z" && grid != "same-map") throw UsageError("--grid must be same-z or same-map");
  if (cfg.dataset.empty()) throw UsageError("--dataset is required (source of conditioning maps)");
  LoadedModel lm = load_model(cfg, resolution_given);
  auto& gen = lm.model.generator;
  const Index res = gen.spec().resolution;
  const auto data = load_dataset<float>(cfg.dataset, res);
  const int n = std::max(1, cfg.n);
  Rng rng(derive_seed(cfg.seed, "cli/sample"));
  const LatentBatch<float> z = sample_latent<float>(gen.spec().latent_dim, n, rng);

  // same-z: each column keeps one z while rows vary the map.
  // same-map: each column keeps one map while rows vary z.
  std::vector<std::vector<ImageF>> rows;
  for (int r = 0; r < n; ++r) {
    std::vector<ImageF> row;
    for (int c = 0; c < n; ++c) {
      const int map_index = grid == "same-z" ? r : c;
      const int z_index = grid == "same-z" ? c : r;
      const auto& map = data[std::size_t(map_index) % data.size()].map;
      if (c == 0 && grid == "same-z") row.push_back(map.to_image<float>());
      const auto out = gen.forward(z.col(z_index), stack_images(map.to_image<float>()), nn::Mode::Inference);
      row.push_back(unstack_image(out, 0));
    }
    rows.push_back(std::move(row));
  }
  if (grid == "same-map") {
    std::vector<ImageF> header;
    for (int c = 0; c < n; ++c) header.push_back(data[std::size_t(c) % data.size()].map.to_image<float>());
    rows.insert(rows.begin(), header);
  }
  fs::create_directories(cfg.out);
  save_image(make_grid(rows), cfg.out / ("grid_" + grid + ".png"));
  write_resolved_config(cfg, cfg.out);
  std::cout << "wrote " << (cfg.out / ("grid_" + grid + ".png")).string() << '\n';
  return kOk;
}

struct InpaintInputs {
  std::string image, map, landmarks, mask_file;
};

int cmd_inpaint(const ConfigFlags& flags, const InpaintInputs& in, bool resolution_given) {
  RunConfig cfg = flags.resolve();
  if (in.image.empty()) throw UsageError("--image is required");
  LoadedModel lm = load_model(cfg, resolution_given);
  const Index res = lm.model.generator.spec().resolution;
  const ImageF original = load_image<float>(in.image, res);
  const SemanticMap map = load_condition(in.map, in.landmarks, in.image, res);
  const Mask mask = resolve_mask(cfg, in.mask_file, res);
  const ImageF corrupted = apply_mask(original, mask);
  const auto result = optimize_latent(lm.model, corrupted, mask, map, cfg.inpaint);

  fs::create_directories(cfg.out);
  save_image(corrupted, cfg.out / "corrupted.png");
  save_mask(mask, cfg.out / "mask.png");
  save_image(result.generated, cfg.out / "generated.png");
  save_image(result.inpainted, cfg.out / "inpainted.png");
  write_loss_trace(result.trace, cfg.out / "loss_trace.csv");
  json manifest = result_manifest(result, cfg.inpaint, mask_spec_of(cfg));
  if (!in.mask_file.empty()) manifest["mask"] = {{"file", in.mask_file}};
  manifest["psnr_vs_input"] = psnr(result.inpainted, original);
  manifest["checkpoint"] = cfg.checkpoint.string();
  write_json(manifest, cfg.out / "result.json");
  write_resolved_config(cfg, cfg.out);
  std::printf("final loss %.6f (contextual %.6f, perceptual %.6f)\n", result.final().total,
              result.final().contextual, result.final().perceptual);
  return kOk;
}

int cmd_inpaint_seq(const ConfigFlags& flags, const InpaintInputs& in, bool resolution_given) {
  RunConfig cfg = flags.resolve();
  if (in.image.empty()) throw UsageError("--image is required");
  LoadedModel lm = load_model(cfg, resolution_given);
  const Index res = lm.model.generator.spec().resolution;
  const ImageF original = load_image<float>(in.image, res);
  const SemanticMap map = load_condition(in.map, in.landmarks, in.image, res);
  const auto seq = make_pseudo_sequence(original, cfg.mask, cfg.n, derive_seed(cfg.seed, "cli/sequence"));
  const auto results = inpaint_sequence(lm.model, seq, {map}, cfg.inpaint);

  fs::create_directories(cfg.out);
  std::vector<ImageF> restored;
  json frames = json::array();
  for (std::size_t i = 0; i < results.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "frame_%03zu", i);
    const std::string s = stem;
    save_image(seq.frames[i], cfg.out / (s + "_corrupted.png"));
    save_image(results[i].inpainted, cfg.out / (s + "_inpainted.png"));
    save_image(results[i].generated, cfg.out / (s + "_generated.png"));
    write_loss_trace(results[i].trace, cfg.out / (s + "_loss_trace.csv"));
    InpaintConfig frame_cfg = cfg.inpaint;
    frame_cfg.seed = cfg.inpaint.seed + i;
    json j = result_manifest(results[i], frame_cfg, seq.mask_specs[i]);
    j["psnr_vs_source"] = psnr(results[i].inpainted, original);
    frames.push_back(j);
    restored.push_back(results[i].inpainted);
  }
  const double eta_u = consistency(restored);
  write_json({{"frames", frames}, {"consistency", eta_u}, {"mask_kind", std::string(to_string(cfg.mask))},
              {"n", cfg.n}, {"checkpoint", cfg.checkpoint.string()}},
             cfg.out / "result.json");
  write_resolved_config(cfg, cfg.out);
  std::printf("consistency %.4f dB over %zu frames\n", eta_u, results.size());
  return kOk;
}

int cmd_eval(const ConfigFlags& flags, const std::string& protocol, bool resolution_given) {
  RunConfig cfg = flags.resolve();
  if (protocol != "correctness" && protocol != "consistency" && protocol != "both")
    throw UsageError("--protocol must be correctness, consistency or both");
  if (cfg.dataset.empty()) throw UsageError("--dataset is required");
  LoadedModel lm = load_model(cfg, resolution_given);
  const auto data = load_dataset<float>(cfg.dataset, lm.model.generator.spec().resolution);
  EvalConfig ec;
  ec.kinds = cfg.eval_kinds;
  ec.central_fraction = cfg.mask_fraction;
  ec.sequence_length = cfg.n;
  ec.seed = cfg.seed;
  ec.jobs = cfg.jobs;
  ec.metadata = {{"checkpoint", cfg.checkpoint.string()},
                 {"model_trained", lm.model.trained},
                 {"inpaint", cfg.inpaint.to_json()}};
  const auto inpainter = model_inpainter(lm.model, cfg.inpaint);
  fs::create_directories(cfg.out);
  if (protocol != "consistency") {
    const EvalReport r = correctness_eval(inpainter, data, ec);
    r.write(cfg.out, "correctness");
    std::cout << r.table();
  }
  if (protocol != "correctness") {
    const EvalReport r = consistency_eval(inpainter, data, ec);
    r.write(cfg.out, "consistency");
    std::cout << r.table();
  }
  write_resolved_config(cfg, cfg.out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantically conditioned GAN inpainting for face sequences"};
  app.require_subcommand(1);

  ConfigFlags corpus_f, maps_f, train_f, sample_f, inpaint_f, seq_f, eval_f;

  auto* corpus = app.add_subcommand("corpus", "Generate a procedural toy face corpus");
  add_common(corpus, corpus_f);
  corpus_f.add(corpus, "--n", "eval.n", "Number of faces");

  auto* maps = app.add_subcommand("maps", "Render semantic maps from landmark JSON files");
  add_common(maps, maps_f);
  std::string landmarks_in, reference_image;
  maps->add_option("--landmarks", landmarks_in, "Landmark JSON file or directory");
  maps->add_option("--reference", reference_image, "Image whose pixel frame the landmarks use");

  auto* trainer = app.add_subcommand("train", "Train generator and discriminator");
  add_common(trainer, train_f);
  train_f.add(trainer, "--dataset", "paths.dataset", "Dataset root (images/, landmarks/, maps/)");
  train_f.add(trainer, "--iterations", "train.iterations", "Iteration budget");
  train_f.add(trainer, "--batch-size", "train.batch_size", "Mini-batch size");
  train_f.add(trainer, "--base-filters", "train.base_filters", "Filters of the first conv layer");
  train_f.add(trainer, "--latent-dim", "train.latent_dim", "Latent vector length");
  train_f.add(trainer, "--log-every", "train.log_every", "Metrics cadence");
  train_f.add(trainer, "--checkpoint-every", "train.checkpoint_every", "Checkpoint cadence (0 = final only)");

  auto* sample = app.add_subcommand("sample", "Sample image grids from a checkpoint");
  add_common(sample, sample_f);
  sample_f.add(sample, "--checkpoint", "paths.checkpoint", "Trained checkpoint");
  sample_f.add(sample, "--dataset", "paths.dataset", "Dataset providing maps");
  sample_f.add(sample, "--n", "eval.n", "Grid size");
  std::string grid = "same-z";
  sample->add_option("--grid", grid, "same-z or same-map")->check(CLI::IsMember({"same-z", "same-map"}));

  InpaintInputs inpaint_in, seq_in;
  auto add_inputs = [](CLI::App* a, InpaintInputs& in) {
    a->add_option("--image", in.image, "Uncorrupted input image (PNG)");
    a->add_option("--map", in.map, "Semantic map PNG");
    a->add_option("--landmarks", in.landmarks, "Landmark JSON in the input image's pixel frame");
  };
  auto* inpaint = app.add_subcommand("inpaint", "Inpaint one corrupted image");
  add_common(inpaint, inpaint_f);
  add_inpaint_flags(inpaint, inpaint_f);
  add_inputs(inpaint, inpaint_in);
  inpaint_f.add(inpaint, "--mask", "mask.kind", "central, checkerboard, left or freehand");
  inpaint_f.add(inpaint, "--mask-fraction", "mask.fraction", "Central mask area fraction");
  inpaint->add_option("--mask-file", inpaint_in.mask_file, "Mask PNG (0 = corrupted, 255 = kept)");

  auto* seq = app.add_subcommand("inpaint-seq", "Inpaint a pseudo-sequence and report its consistency");
  add_common(seq, seq_f);
  add_inpaint_flags(seq, seq_f);
  add_inputs(seq, seq_in);
  seq_f.add(seq, "--mask", "mask.kind", "central, checkerboard, left or freehand");
  seq_f.add(seq, "--n", "eval.n", "Sequence length");

  auto* eval = app.add_subcommand("eval", "Correctness and consistency sweeps");
  add_common(eval, eval_f);
  add_inpaint_flags(eval, eval_f);
  eval_f.add(eval, "--dataset", "paths.dataset", "Dataset root");
  eval_f.add(eval, "--kind", "eval.kinds", "Comma-separated mask kinds");
  eval_f.add(eval, "--n", "eval.n", "Pseudo-sequence length");
  eval_f.add(eval, "--jobs", "eval.jobs", "Worker threads");
  eval_f.add(eval, "--mask-fraction", "mask.fraction", "Central mask area fraction for correctness");
  std::string protocol = "both";
  eval->add_option("--protocol", protocol, "correctness, consistency or both");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  auto given = [](CLI::App* a) { return a->get_option("--resolution")->count() > 0; };
  try {
    if (*corpus) return cmd_corpus(corpus_f);
    if (*maps) return cmd_maps(maps_f, landmarks_in, reference_image);
    if (*trainer) return cmd_train(train_f);
    if (*sample) return cmd_sample(sample_f, grid, given(sample));
    if (*inpaint) return cmd_inpaint(inpaint_f, inpaint_in, given(inpaint));
    if (*seq) return cmd_inpaint_seq(seq_f, seq_in, given(seq));
    if (*eval) return cmd_eval(eval_f, protocol, given(eval));
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
