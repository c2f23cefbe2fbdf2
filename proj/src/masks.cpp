#include "sgan/masks.hpp"

#include <cmath>
#include <random>
#include <set>

#include "sgan/rng.hpp"

namespace sgan {

std::string_view to_string(MaskKind kind) {
  switch (kind) {
    case MaskKind::Central: return "central";
    case MaskKind::Checkerboard: return "checkerboard";
    case MaskKind::Left: return "left";
    case MaskKind::Freehand: return "freehand";
  }
  return "unknown";
}

MaskKind parse_mask_kind(std::string_view name) {
  if (name == "central" || name == "random-central") return MaskKind::Central;
  if (name == "checkerboard" || name == "checkboard") return MaskKind::Checkerboard;
  if (name == "left") return MaskKind::Left;
  if (name == "freehand" || name == "random-freehand") return MaskKind::Freehand;
  throw UsageError("unknown mask kind '" + std::string(name) + "'");
}

Index central_side(double fraction, Index h, Index w) {
  const double area = double(h * w);
  Index side = Index(std::lround(std::sqrt(fraction * area)));
  while (double(side * side) / area < kCentralMinFraction) ++side;
  while (double(side * side) / area > kCentralMaxFraction) --side;
  return std::min({side, h, w});
}

namespace {

void stamp_disk(Mask& m, double cx, double cy, double r) {
  const Index y0 = std::max<Index>(0, Index(std::floor(cy - r)));
  const Index y1 = std::min<Index>(m.height - 1, Index(std::ceil(cy + r)));
  const Index x0 = std::max<Index>(0, Index(std::floor(cx - r)));
  const Index x1 = std::min<Index>(m.width - 1, Index(std::ceil(cx + r)));
  for (Index y = y0; y <= y1; ++y)
    for (Index x = x0; x <= x1; ++x) {
      const double dx = double(x) - cx, dy = double(y) - cy;
      if (dx * dx + dy * dy <= r * r) m(y, x) = 0;
    }
}

/// Three random-walk brush strokes grown round-robin until the corrupted
/// fraction first reaches target - tolerance / 2. One stamp adds at most
/// pi r^2 / (h w) < tolerance for r = min(h, w) / 16, so the result lands in
/// the tolerance band.
Mask freehand_mask(double target, std::uint64_t seed, Index h, Index w) {
  Mask m(h, w, 1);
  Rng rng(seed);
  const double r = std::max(1.0, double(std::min(h, w)) / 16.0);
  std::uniform_real_distribution<double> ux(r, double(w - 1) - r), uy(r, double(h - 1) - r);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * 3.14159265358979323846);
  std::normal_distribution<double> turn(0.0, 0.5);
  struct Head {
    double x, y, theta;
  };
  std::vector<Head> heads;
  for (int s = 0; s < kFreehandStrokes; ++s) heads.push_back({ux(rng), uy(rng), angle(rng)});
  const double stop_at = target - kFreehandTolerance / 2.0;
  const Index total = h * w;
  const double step = r;
  for (long it = 0; it < 1'000'000; ++it) {
    Head& hd = heads[std::size_t(it % kFreehandStrokes)];
    if (it >= kFreehandStrokes) {
      hd.theta += turn(rng);
      hd.x += step * std::cos(hd.theta);
      hd.y += step * std::sin(hd.theta);
      if (hd.x < 0 || hd.x > double(w - 1)) {
        hd.x = std::clamp(hd.x, 0.0, double(w - 1));
        hd.theta = 3.14159265358979323846 - hd.theta;
      }
      if (hd.y < 0 || hd.y > double(h - 1)) {
        hd.y = std::clamp(hd.y, 0.0, double(h - 1));
        hd.theta = -hd.theta;
      }
    }
    stamp_disk(m, hd.x, hd.y, r);
    if (double(m.count_zeros()) / double(total) >= stop_at) return m;
  }
  throw NumericalError("freehand mask did not reach its target fraction");
}

}  // namespace

Mask make_mask(const MaskSpec& spec, Index h, Index w) {
  if (h < 16 || w < 16) throw UsageError("masks need at least 16 x 16 pixels");
  switch (spec.kind) {
    case MaskKind::Central: {
      if (spec.fraction < kCentralMinFraction || spec.fraction > kCentralMaxFraction)
        throw UsageError("central mask fraction must lie in [0.5, 0.7]");
      const Index side = central_side(spec.fraction, h, w);
      Mask m(h, w, 1);
      const Index top = (h - side) / 2, left = (w - side) / 2;
      for (Index y = top; y < top + side; ++y)
        for (Index x = left; x < left + side; ++x) m(y, x) = 0;
      return m;
    }
    case MaskKind::Checkerboard: {
      const Index cell = spec.cell > 0 ? spec.cell : std::max<Index>(1, w / 8);
      if (cell > std::min(h, w)) throw UsageError("checkerboard cell larger than the image");
      Mask m(h, w, 1);
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w; ++x) m(y, x) = ((y / cell + x / cell) % 2 == 0) ? 0 : 1;
      return m;
    }
    case MaskKind::Left: {
      if (std::abs(spec.fraction - kLeftFraction) > 1e-12)
        throw UsageError("left mask fraction must be 0.5");
      Mask m(h, w, 1);
      for (Index y = 0; y < h; ++y)
        for (Index x = 0; x < w / 2; ++x) m(y, x) = 0;
      return m;
    }
    case MaskKind::Freehand:
      if (std::abs(spec.fraction - kFreehandFraction) > 1e-12)
        throw UsageError("freehand mask fraction must be 0.25");
      return freehand_mask(spec.fraction, spec.seed, h, w);
  }
  throw UsageError("unknown mask kind");
}

std::vector<MaskSpec> sequence_mask_specs(MaskKind kind, int n, std::uint64_t seed, Index h, Index w) {
  if (n < 2) throw UsageError("a pseudo-sequence needs at least 2 frames");
  std::vector<MaskSpec> specs;
  Rng rng(derive_seed(seed, "sequence-masks"));
  std::uniform_real_distribution<double> fraction(kCentralMinFraction, kCentralMaxFraction);
  // Central draws are redrawn while their block side repeats an earlier
  // frame's, as long as unused admissible sides remain.
  std::set<Index> used_sides;
  const Index admissible =
      central_side(kCentralMaxFraction, h, w) - central_side(kCentralMinFraction, h, w) + 1;
  for (int i = 0; i < n; ++i) {
    switch (kind) {
      case MaskKind::Central: {
        double f = fraction(rng);
        while (Index(used_sides.size()) < admissible && used_sides.count(central_side(f, h, w)))
          f = fraction(rng);
        used_sides.insert(central_side(f, h, w));
        specs.push_back(MaskSpec::central(f));
        break;
      }
      case MaskKind::Freehand:
        specs.push_back(MaskSpec::freehand(derive_seed(seed, std::uint64_t(i))));
        break;
      case MaskKind::Left: specs.push_back(MaskSpec::left()); break;
      case MaskKind::Checkerboard: specs.push_back(MaskSpec::checkerboard()); break;
    }
  }
  return specs;
}

std::vector<Mask> make_sequence_masks(MaskKind kind, int n, std::uint64_t seed, Index h, Index w) {
  std::vector<Mask> masks;
  for (const auto& spec : sequence_mask_specs(kind, n, seed, h, w)) masks.push_back(make_mask(spec, h, w));
  return masks;
}

}  // namespace sgan
