#include "sgan/evaluation.hpp"

#include <atomic>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>

#include "sgan/rng.hpp"

namespace sgan {

namespace fs = std::filesystem;
using nlohmann::json;

template <typename Scalar>
PseudoSequence<Scalar> make_pseudo_sequence(const Image<Scalar>& source, MaskKind kind, int n,
                                            std::uint64_t seed) {
  PseudoSequence<Scalar> seq;
  seq.source = source;
  seq.kind = kind;
  seq.seed = seed;
  seq.mask_specs = sequence_mask_specs(kind, n, seed, source.height, source.width);
  for (const auto& spec : seq.mask_specs) {
    seq.masks.push_back(make_mask(spec, source.height, source.width));
    seq.frames.push_back(apply_mask(source, seq.masks.back()));
  }
  return seq;
}

template <typename Scalar>
double consistency(const std::vector<Image<Scalar>>& frames, const PairMetric<Scalar>& metric) {
  const std::size_t n = frames.size();
  if (n < 2) throw UsageError("consistency needs at least 2 frames");
  for (const auto& f : frames)
    if (!f.same_shape(frames.front())) throw UsageError("consistency: frames differ in shape");
  double sum = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      sum += metric ? metric(frames[i], frames[j]) : psnr(frames[i], frames[j]);
  return sum / (double(n) * double(n - 1) / 2.0);
}

template <typename Scalar>
Inpainter<Scalar> model_inpainter(const InpaintModel<Scalar>& model, const InpaintConfig& cfg) {
  auto shared = std::make_shared<const InpaintModel<Scalar>>(model);
  return [shared, cfg](const Image<Scalar>& corrupted, const Mask& mask, const SemanticMap& map,
                       std::uint64_t seed) {
    InpaintModel<Scalar> local = *shared;
    InpaintConfig c = cfg;
    c.seed = seed;
    return optimize_latent(local, corrupted, mask, map, c).inpainted;
  };
}

std::vector<MaskKind> consistency_kinds() {
  return {MaskKind::Central, MaskKind::Freehand, MaskKind::Left};
}

namespace {

/// Runs fn(i) for i in [0, count) on up to `jobs` threads. Results must be
/// written to per-index slots, which keeps output independent of scheduling.
template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(std::max(1, jobs), count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  for (auto& t : pool) t.join();
}

MaskSpec correctness_mask(MaskKind kind, const EvalConfig& cfg, std::size_t image) {
  switch (kind) {
    case MaskKind::Central: return MaskSpec::central(cfg.central_fraction);
    case MaskKind::Checkerboard: return MaskSpec::checkerboard();
    case MaskKind::Left: return MaskSpec::left();
    case MaskKind::Freehand:
      return MaskSpec::freehand(derive_seed(derive_seed(cfg.seed, "eval/freehand"), image));
  }
  throw UsageError("unknown mask kind");
}

std::uint64_t inpaint_seed(const EvalConfig& cfg, MaskKind kind, std::size_t image) {
  return derive_seed(derive_seed(cfg.seed, "eval/inpaint/" + std::string(to_string(kind))), image);
}

template <typename Scalar, typename Fn>
EvalReport run_protocol(const std::string& protocol, const std::vector<PairedSample<Scalar>>& dataset,
                        const EvalConfig& cfg, Fn&& evaluate) {
  if (dataset.empty()) throw DataError("evaluation dataset is empty");
  if (cfg.kinds.empty()) throw UsageError("no mask kinds selected");
  EvalReport report;
  report.protocol = protocol;
  const std::size_t per_kind = dataset.size();
  report.items.resize(cfg.kinds.size() * per_kind);
  parallel_for(report.items.size(), cfg.jobs, [&](std::size_t slot) {
    const MaskKind kind = cfg.kinds[slot / per_kind];
    const std::size_t image = slot % per_kind;
    EvalItem& item = report.items[slot];
    item.kind = std::string(to_string(kind));
    item.image = image;
    try {
      evaluate(kind, image, item);
    } catch (const Error& e) {
      item.failed = true;
      item.error = e.what();
    }
  });
  report.metadata = cfg.metadata;
  report.metadata["seed"] = cfg.seed;
  report.metadata["images"] = dataset.size();
  report.metadata["resolution"] = dataset.front().image.width;
  report.recompute_aggregates();
  return report;
}

}  // namespace

template <typename Scalar>
EvalReport correctness_eval(const Inpainter<Scalar>& inpainter,
                            const std::vector<PairedSample<Scalar>>& dataset, const EvalConfig& cfg) {
  EvalReport report = run_protocol<Scalar>(
      "correctness", dataset, cfg, [&](MaskKind kind, std::size_t image, EvalItem& item) {
        const auto& sample = dataset[image];
        const Mask mask =
            make_mask(correctness_mask(kind, cfg, image), sample.image.height, sample.image.width);
        const Image<Scalar> corrupted = apply_mask(sample.image, mask);
        const Image<Scalar> restored = inpainter(corrupted, mask, sample.map, inpaint_seed(cfg, kind, image));
        item.value = psnr(restored, sample.image);
      });
  report.metadata["central_fraction"] = cfg.central_fraction;
  return report;
}

template <typename Scalar>
EvalReport consistency_eval(const Inpainter<Scalar>& inpainter,
                            const std::vector<PairedSample<Scalar>>& dataset, const EvalConfig& cfg) {
  if (cfg.sequence_length < 2) throw UsageError("sequence length must be at least 2");
  EvalReport report = run_protocol<Scalar>(
      "consistency", dataset, cfg, [&](MaskKind kind, std::size_t image, EvalItem& item) {
        const auto& sample = dataset[image];
        const std::uint64_t seq_seed =
            derive_seed(derive_seed(cfg.seed, "eval/sequence/" + std::string(to_string(kind))), image);
        const auto seq = make_pseudo_sequence(sample.image, kind, cfg.sequence_length, seq_seed);
        const std::uint64_t base = inpaint_seed(cfg, kind, image);
        std::vector<Image<Scalar>> restored;
        for (std::size_t f = 0; f < seq.size(); ++f) {
          restored.push_back(inpainter(seq.frames[f], seq.masks[f], sample.map, base + f));
          item.frame_psnr.push_back(psnr(restored.back(), sample.image));
        }
        item.value = consistency(restored);
      });
  report.metadata["sequence_length"] = cfg.sequence_length;
  return report;
}

void EvalReport::recompute_aggregates() {
  aggregates.clear();
  for (const auto& item : items) {
    auto it = std::find_if(aggregates.begin(), aggregates.end(),
                           [&](const KindAggregate& a) { return a.kind == item.kind; });
    if (it == aggregates.end()) {
      aggregates.push_back({item.kind, 0, 0, 0});
      it = std::prev(aggregates.end());
    }
    if (item.failed) {
      ++it->failed;
    } else {
      it->mean += item.value;
      ++it->count;
    }
  }
  for (auto& a : aggregates) a.mean = a.count > 0 ? a.mean / double(a.count) : 0.0;
}

json EvalReport::to_json() const {
  json j;
  j["protocol"] = protocol;
  j["metadata"] = metadata;
  j["items"] = json::array();
  std::size_t failed = 0;
  for (const auto& item : items) {
    json e = {{"kind", item.kind}, {"image", item.image}, {"failed", item.failed}};
    if (item.failed) {
      e["error"] = item.error;
      ++failed;
    } else {
      e["value"] = item.value;
    }
    if (!item.frame_psnr.empty()) e["frame_psnr"] = item.frame_psnr;
    j["items"].push_back(e);
  }
  j["aggregates"] = json::array();
  for (const auto& a : aggregates)
    j["aggregates"].push_back({{"kind", a.kind}, {"mean", a.mean}, {"count", a.count}, {"failed", a.failed}});
  j["failed"] = failed;
  return j;
}

std::string EvalReport::table() const {
  std::ostringstream out;
  const char* unit = protocol == "consistency" ? "consistency (dB)" : "PSNR (dB)";
  out << protocol << '\n';
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %18s %8s %8s\n", "mask", unit, "images", "failed");
  out << line;
  for (const auto& a : aggregates) {
    std::snprintf(line, sizeof line, "%-14s %18.2f %8zu %8zu\n", a.kind.c_str(), a.mean, a.count, a.failed);
    out << line;
  }
  return out.str();
}

std::string EvalReport::csv() const {
  std::ostringstream out;
  out.precision(17);
  out << "protocol,kind,image,value,failed\n";
  for (const auto& item : items) {
    out << protocol << ',' << item.kind << ',' << item.image << ',';
    if (!item.failed) out << item.value;
    out << ',' << (item.failed ? 1 : 0) << '\n';
  }
  return out.str();
}

void EvalReport::write(const fs::path& dir, const std::string& stem) const {
  fs::create_directories(dir);
  auto put = [&](const std::string& ext, const std::string& text) {
    std::ofstream out(dir / (stem + ext), std::ios::trunc);
    if (!out) throw DataError("cannot write report in " + dir.string());
    out << text;
  };
  put(".json", to_json().dump(2) + "\n");
  put(".txt", table());
  put(".csv", csv());
}

#define SGAN_INSTANTIATE(S)                                                                         \
  template PseudoSequence<S> make_pseudo_sequence<S>(const Image<S>&, MaskKind, int, std::uint64_t); \
  template double consistency<S>(const std::vector<Image<S>>&, const PairMetric<S>&);               \
  template Inpainter<S> model_inpainter<S>(const InpaintModel<S>&, const InpaintConfig&);           \
  template EvalReport correctness_eval<S>(const Inpainter<S>&, const std::vector<PairedSample<S>>&, \
                                          const EvalConfig&);                                       \
  template EvalReport consistency_eval<S>(const Inpainter<S>&, const std::vector<PairedSample<S>>&, \
                                          const EvalConfig&);

SGAN_INSTANTIATE(float)
SGAN_INSTANTIATE(double)

#undef SGAN_INSTANTIATE

}  // namespace sgan
