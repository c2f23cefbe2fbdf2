#include <gtest/gtest.h>

#include "sgan/toy_corpus.hpp"
#include "test_support.hpp"

using namespace sgan;
using sgan::testing::read_bytes;
using sgan::testing::TempDir;

namespace {

FaceSpec base_spec(Index res = 64) {
  FaceSpec s;
  s.seed = 1;
  s.pose.center_x = double(res - 1) / 2 + 0.75;
  s.pose.center_y = double(res - 1) / 2 - 0.5;
  s.pose.scale = 0.31 * double(res);
  s.pose.tilt = 0.08;
  s.pose.eye_openness = 0.6;
  s.pose.mouth_curvature = 0.0;
  return s;
}

bool is_color(const Image<double>& img, Index y, Index x, const Color& c) {
  for (Index k = 0; k < 3; ++k)
    if (std::abs(img(k, y, x) - (2.0 * c[std::size_t(k)] - 1.0)) > 1e-12) return false;
  return true;
}

double segment_distance(Point2 p, Point2 a, Point2 b) {
  const double abx = b.x - a.x, aby = b.y - a.y;
  const double t = std::clamp(((p.x - a.x) * abx + (p.y - a.y) * aby) / (abx * abx + aby * aby), 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * abx), p.y - (a.y + t * aby));
}

}  // namespace

TEST(RenderFace, Deterministic) {
  const FaceSpec s = sample_face(42, 64, 64);
  const auto a = render_face<double>(s, 64, 64), b = render_face<double>(s, 64, 64);
  EXPECT_EQ(a.image, b.image);
  EXPECT_EQ(a.map, b.map);
  EXPECT_TRUE(in_generator_range(a.image));
}

TEST(RenderFace, MapIsRenderMapOfThePose) {
  const FaceSpec s = sample_face(43, 32, 32);
  EXPECT_EQ(render_face<double>(s, 32, 32).map, render_map(synth_landmarks(s.pose, 32, 32), 32, 32));
}

TEST(RenderFace, MapIndependentOfAppearance) {
  FaceSpec a = base_spec(), b = base_spec();
  a.appearance = sample_appearance(1);
  b.appearance = sample_appearance(2);
  ASSERT_FALSE(a.appearance == b.appearance);
  const auto ra = render_face<double>(a, 64, 64), rb = render_face<double>(b, 64, 64);
  EXPECT_EQ(ra.map, rb.map);
  EXPECT_FALSE(ra.image == rb.image);
}

TEST(RenderFace, CurvatureChangesOnlyTheMouthRegion) {
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    FaceSpec up = sample_face(seed, 64, 64), down = up;
    up.pose.mouth_curvature = 1.0;
    down.pose.mouth_curvature = -1.0;
    const auto a = render_face<double>(up, 64, 64), b = render_face<double>(down, 64, 64);
    // Oracle region: bounding box of both maps' mouth pixels, grown by the
    // toy mouth stroke radius.
    const Mask ma = group_mask(a.map, FaceGroup::Mouth), mb = group_mask(b.map, FaceGroup::Mouth);
    Index y0 = 64, y1 = -1, x0 = 64, x1 = -1;
    for (Index y = 0; y < 64; ++y)
      for (Index x = 0; x < 64; ++x)
        if (ma(y, x) || mb(y, x)) {
          y0 = std::min(y0, y), y1 = std::max(y1, y), x0 = std::min(x0, x), x1 = std::max(x1, x);
        }
    const Index grow = Index(std::ceil(kToyMouthRadius * up.pose.scale));
    int differing = 0;
    for (Index y = 0; y < 64; ++y)
      for (Index x = 0; x < 64; ++x) {
        bool same = true;
        for (Index k = 0; k < 3; ++k) same = same && a.image(k, y, x) == b.image(k, y, x);
        if (same) continue;
        ++differing;
        EXPECT_TRUE(y >= y0 - grow && y <= y1 + grow && x >= x0 - grow && x <= x1 + grow)
            << "seed " << seed << " pixel " << y << "," << x;
      }
    EXPECT_GT(differing, 0);
  }
}

TEST(RenderFace, ClosedEyesAreLinesOfStrokeWidth) {
  FaceSpec s = base_spec();
  s.pose.eye_openness = 0.0;
  const auto r = render_face<double>(s, 64, 64);
  const LandmarkSet lms = synth_landmarks(s.pose, 64, 64);
  const double radius = stroke_width(64) / 2.0;
  int eye_pixels = 0;
  for (Index y = 0; y < 64; ++y)
    for (Index x = 0; x < 64; ++x)
      if (is_color(r.image, y, x, kToyEyeColor)) {
        ++eye_pixels;
        const Point2 p{double(x), double(y)};
        const double d = std::min(segment_distance(p, lms.points[36], lms.points[39]),
                                  segment_distance(p, lms.points[42], lms.points[45]));
        EXPECT_LE(d, radius + 1e-9) << y << "," << x;
      }
  EXPECT_GT(eye_pixels, 0);
  // Open eyes cover strictly more pixels.
  s.pose.eye_openness = 1.0;
  const auto open = render_face<double>(s, 64, 64);
  int open_pixels = 0;
  for (Index y = 0; y < 64; ++y)
    for (Index x = 0; x < 64; ++x) open_pixels += is_color(open.image, y, x, kToyEyeColor);
  EXPECT_GT(open_pixels, eye_pixels);
}

TEST(RenderFace, InvalidSpec) {
  FaceSpec s = base_spec();
  s.appearance.skin[0] = 1.5;
  EXPECT_THROW(render_face<double>(s, 64, 64), UsageError);
  s = base_spec();
  s.pose.scale = 60;
  EXPECT_THROW(render_face<double>(s, 64, 64), UsageError);
}

TEST(Sampler, ColorMeansMatchConfiguration) {
  Color skin{0, 0, 0}, hair{0, 0, 0};
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const Appearance a = sample_face(derive_seed(7, std::uint64_t(i)), 64, 64).appearance;
    for (std::size_t k = 0; k < 3; ++k) {
      skin[k] += a.skin[k] / n;
      hair[k] += a.hair[k] / n;
    }
  }
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_NEAR(skin[k], toy_sampler::kSkinMean[k], 0.05 * toy_sampler::kSkinMean[k]) << k;
    EXPECT_NEAR(hair[k], toy_sampler::kHairMean[k], 0.05 * toy_sampler::kHairMean[k]) << k;
  }
}

TEST(Sampler, PosesFitTheFrame) {
  for (std::uint64_t s = 0; s < 200; ++s)
    for (Index res : {32, 64, 128}) EXPECT_NO_THROW(validate(sample_face(s, res, res), res, res));
}

TEST(Sampler, AppearanceAndPoseStreamsAreIndependent) {
  const FaceSpec a = sample_face(5, 64, 64);
  EXPECT_EQ(a.appearance, sample_appearance(derive_seed(5, "appearance")));
  EXPECT_EQ(a.pose, sample_pose(derive_seed(5, "pose"), 64, 64));
}

TEST(MakeCorpus, FilesPairedByStem) {
  TempDir dir("corpus");
  make_corpus(8, 3, 32, 32, dir.path());
  for (const char* sub : {"images", "landmarks", "maps"}) {
    std::set<std::string> stems;
    for (const auto& e : std::filesystem::directory_iterator(dir / sub)) stems.insert(e.path().stem().string());
    ASSERT_EQ(stems.size(), 8u) << sub;
    EXPECT_EQ(*stems.begin(), "face_0000");
    EXPECT_EQ(*stems.rbegin(), "face_0007");
  }
  const auto listing = nlohmann::json::parse(std::ifstream(dir / "corpus.json"));
  EXPECT_EQ(listing.at("faces").size(), 8u);
  EXPECT_EQ(listing.at("faces")[3].at("stem"), "face_0003");
}

TEST(MakeCorpus, ByteIdenticalReruns) {
  TempDir a("corpa"), b("corpb");
  make_corpus(4, 11, 32, 32, a.path());
  make_corpus(4, 11, 32, 32, b.path());
  int files = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(e.path(), a.path());
    EXPECT_EQ(read_bytes(e.path()), read_bytes(b.path() / rel)) << rel;
    ++files;
  }
  EXPECT_EQ(files, 4 * 3 + 1);
}

TEST(MakeCorpus, Errors) {
  TempDir dir("corperr");
  EXPECT_THROW(make_corpus(0, 1, 32, 32, dir.path()), UsageError);
  sgan::testing::write_text(dir / "file", "x");
  EXPECT_THROW(make_corpus(1, 1, 32, 32, dir / "file" / "sub"), DataError);
}

TEST(CurvatureStatistic, SignFollowsRenderedMouth) {
  int agree = 0, total = 0;
  for (std::uint64_t s = 0; s < 40; ++s)
    for (double k : {1.0, -1.0}) {
      FaceSpec spec = sample_face(s, 32, 32);
      spec.pose.mouth_curvature = k * (0.5 + 0.5 * double(s % 2));
      const auto r = render_face<double>(spec, 32, 32);
      const double stat = mouth_curvature_statistic(r.image, r.map);
      agree += (stat > 0) == (k > 0);
      ++total;
    }
  EXPECT_EQ(agree, total);
}

TEST(SkinRegion, MeanRecoversSkinColor) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const FaceSpec spec = sample_face(s, 32, 32);
    const auto r = render_face<double>(spec, 32, 32);
    const Mask region = skin_region(r.map);
    ASSERT_GT(region.count_ones(), 0);
    const Color mean = region_mean(r.image, region);
    // The nose stroke may fall inside the region; allow its darker shade.
    for (std::size_t k = 0; k < 3; ++k) {
      const double skin = 2.0 * spec.appearance.skin[k] - 1.0;
      EXPECT_LE(mean[k], skin + 1e-9);
      EXPECT_GE(mean[k], 2.0 * 0.8 * spec.appearance.skin[k] - 1.0 - 1e-9);
    }
  }
}
