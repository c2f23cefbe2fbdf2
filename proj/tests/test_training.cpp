#include <gtest/gtest.h>

#include <set>

#include "sgan/toy_corpus.hpp"
#include "sgan/training.hpp"
#include "test_support.hpp"

using namespace sgan;
using sgan::testing::TempDir;

namespace {

nn::Vector<double> scores(std::initializer_list<double> v) {
  nn::Vector<double> out(Index(v.size()));
  Index i = 0;
  for (double s : v) out(i++) = s;
  return out;
}

TrainConfig mini_config(std::uint64_t seed = 5) {
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.resolution = 32;
  cfg.latent_dim = 4;
  cfg.base_filters = 2;
  cfg.max_filters = 16;
  cfg.seed = seed;
  return cfg;
}

std::vector<PairedSample<double>> toy_data(int n, std::uint64_t seed) {
  std::vector<PairedSample<double>> data;
  for (int i = 0; i < n; ++i) data.push_back(render_face<double>(sample_face(derive_seed(seed, std::uint64_t(i)), 32, 32), 32, 32));
  return data;
}

std::vector<const PairedSample<double>*> pointers(const std::vector<PairedSample<double>>& data) {
  std::vector<const PairedSample<double>*> out;
  for (const auto& s : data) out.push_back(&s);
  return out;
}

template <typename Net>
bool same_trainable(Net& a, Net& b) {
  const auto pa = a.trainable_parameters(), pb = b.trainable_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i)
    if (!(pa[i]->value == pb[i]->value)) return false;
  return true;
}

std::size_t count_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

}  // namespace

TEST(DLoss, SymmetricIgnorance) {
  EXPECT_NEAR(d_loss<double>(scores({0.5, 0.5}), scores({0.5, 0.5})), 2.0 * std::log(2.0), 1e-15);
  EXPECT_NEAR(d_loss<double>(scores({0.5}), scores({0.5})), 1.3863, 5e-5);
}

TEST(DLoss, PerfectDiscriminator) {
  const double loss = d_loss<double>(scores({1.0, 1.0}), scores({0.0, 0.0}));
  EXPECT_NEAR(loss, 2.0 * std::log(1.0 / (1.0 - kScoreEpsilon)), 1e-12);
  EXPECT_LT(loss, 1e-6);
}

TEST(DLoss, DirectEvaluation) {
  EXPECT_NEAR(d_loss<double>(scores({0.8}), scores({0.3})), -std::log(0.8) - std::log(0.7), 1e-12);
  EXPECT_NEAR(d_loss<double>(scores({0.8}), scores({0.3})), 0.5798, 5e-5);
}

TEST(DLoss, FiniteWhenSaturated) {
  EXPECT_TRUE(std::isfinite(d_loss<double>(scores({0.0}), scores({1.0}))));
  EXPECT_NEAR(d_loss<double>(scores({0.0}), scores({1.0})), -2.0 * std::log(kScoreEpsilon), 1e-9);
  EXPECT_TRUE(std::isfinite(d_loss<float>(nn::Vector<float>::Zero(3), nn::Vector<float>::Ones(3))));
}

TEST(GLoss, Examples) {
  EXPECT_NEAR(g_loss<double>(scores({1.0 - kScoreEpsilon})), 0.0, 1e-6);
  EXPECT_NEAR(g_loss<double>(scores({0.5})), std::log(2.0), 1e-15);
  EXPECT_NEAR(g_loss<double>(scores({0.25})), std::log(4.0), 1e-15);
  EXPECT_NEAR(g_loss<double>(scores({0.25, 0.25})), 1.3863, 5e-5);
  EXPECT_TRUE(std::isfinite(g_loss<double>(scores({0.0}))));
}

TEST(TrainConfig, Validation) {
  TrainConfig cfg = mini_config();
  EXPECT_NO_THROW(cfg.validate());
  cfg.batch_size = 1;
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg = mini_config();
  cfg.learning_rate = -1;
  EXPECT_THROW(cfg.validate(), UsageError);
  cfg = mini_config();
  cfg.resolution = 48;
  EXPECT_THROW(cfg.validate(), UsageError);
}

TEST(TrainConfig, Defaults) {
  const TrainConfig cfg;
  EXPECT_EQ(cfg.batch_size, 64);
  EXPECT_EQ(cfg.learning_rate, 2e-4);
  EXPECT_EQ(cfg.beta1, 0.5);
  EXPECT_EQ(cfg.beta2, 0.5);
  EXPECT_EQ(cfg.latent_dim, 100);
}

TEST(TrainStep, ZeroLearningRateLeavesParametersUnchanged) {
  TrainConfig cfg = mini_config();
  cfg.learning_rate = 0;
  GanTrainer<double> t(cfg), fresh(cfg);
  const auto data = toy_data(2, 1);
  for (int i = 0; i < 3; ++i) t.train_step(pointers(data));
  EXPECT_TRUE(same_trainable(t.generator(), fresh.generator()));
  EXPECT_TRUE(same_trainable(t.discriminator(), fresh.discriminator()));
}

TEST(TrainStep, Deterministic) {
  const auto data = toy_data(2, 2);
  GanTrainer<double> a(mini_config(9)), b(mini_config(9));
  for (int i = 0; i < 3; ++i) {
    const StepMetrics ma = a.train_step(pointers(data));
    const StepMetrics mb = b.train_step(pointers(data));
    EXPECT_EQ(ma.d_loss, mb.d_loss);
    EXPECT_EQ(ma.g_loss, mb.g_loss);
  }
  EXPECT_EQ(a.generator().export_tensors(), b.generator().export_tensors());
  EXPECT_EQ(a.discriminator().export_tensors(), b.discriminator().export_tensors());
  EXPECT_EQ(a.iteration(), 3);
}

TEST(TrainStep, SeedChangesInitialization) {
  GanTrainer<double> a(mini_config(1)), b(mini_config(2));
  EXPECT_FALSE(same_trainable(a.generator(), b.generator()));
}

TEST(TrainStep, DiscriminatorLossDecreasesOnSameBatch) {
  for (std::uint64_t seed : {3, 4, 5}) {
    TrainConfig cfg = mini_config(seed);
    cfg.learning_rate = 1e-3;
    GanTrainer<double> t(cfg);
    const auto data = toy_data(2, seed);
    std::vector<Image<double>> imgs{data[0].image, data[1].image};
    const auto x = stack_images<double>(imgs);
    const auto c = stack_maps<double>({&data[0].map, &data[1].map});
    Rng rng(seed);
    const auto z = sample_latent<double>(4, 2, rng);
    const double before = t.evaluate_d_loss(x, c, z);
    const StepMetrics m = t.discriminator_step(x, c, z);
    EXPECT_DOUBLE_EQ(m.d_loss, before);
    const double after = t.evaluate_d_loss(x, c, z);
    EXPECT_LT(after, before) << seed;
  }
}

TEST(TrainStep, BatchSizeMismatch) {
  GanTrainer<double> t(mini_config());
  const auto data = toy_data(3, 1);
  EXPECT_THROW(t.train_step(pointers(data)), UsageError);
}

TEST(TrainStep, MetricsAreProbabilities) {
  GanTrainer<double> t(mini_config());
  const auto data = toy_data(2, 7);
  const StepMetrics m = t.train_step(pointers(data));
  EXPECT_GT(m.real_score, 0.0);
  EXPECT_LT(m.real_score, 1.0);
  EXPECT_GT(m.fake_score, 0.0);
  EXPECT_LT(m.fake_score, 1.0);
  EXPECT_TRUE(std::isfinite(m.d_loss));
  EXPECT_TRUE(std::isfinite(m.g_loss));
}

TEST(BatchSampler, EpochsCoverTheDataset) {
  BatchSampler s(5, 11);
  std::multiset<std::size_t> seen;
  for (int i = 0; i < 5; ++i)
    for (std::size_t k : s.next(2)) seen.insert(k);
  for (std::size_t k = 0; k < 5; ++k) EXPECT_EQ(seen.count(k), 2u);
  EXPECT_THROW(BatchSampler(0, 1), DataError);
}

TEST(Train, BudgetZeroEqualsInitialization) {
  TempDir dir("budget0");
  TrainConfig cfg = mini_config(21);
  cfg.iterations = 0;
  cfg.out_dir = dir.path();
  const auto path = train<double>(cfg, toy_data(2, 1));
  const auto ck = load_checkpoint<double>(path);
  GanTrainer<double> fresh(cfg);
  EXPECT_EQ(ck.generator.tensors, fresh.generator().export_tensors());
  EXPECT_EQ(ck.discriminator.tensors, fresh.discriminator().export_tensors());
  EXPECT_EQ(ck.metadata.at("iteration"), 0);
  EXPECT_EQ(ck.metadata.at("trained"), false);
  EXPECT_EQ(count_lines(dir / "metrics.csv"), 1u);
}

TEST(Train, MetricsLogAndCheckpointCadence) {
  TempDir dir("cadence");
  TrainConfig cfg = mini_config(22);
  cfg.iterations = 6;
  cfg.log_every = 2;
  cfg.checkpoint_every = 3;
  cfg.out_dir = dir.path();
  std::vector<long> logged;
  train<double>(cfg, toy_data(3, 2), [&](long it, const StepMetrics&) { logged.push_back(it); });
  EXPECT_EQ(count_lines(dir / "metrics.csv"), 1u + 6u / 2u);
  EXPECT_EQ(logged, (std::vector<long>{2, 4, 6}));
  std::ifstream in(dir / "metrics.csv");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "iter,d_loss,g_loss,real_score,fake_score");
  EXPECT_TRUE(std::filesystem::exists(dir / "ckpt_3.sgan"));
  EXPECT_TRUE(std::filesystem::exists(dir / "checkpoint.sgan"));
  const auto ck = load_checkpoint<double>(dir / "checkpoint.sgan");
  EXPECT_EQ(ck.metadata.at("iteration"), 6);
  EXPECT_EQ(ck.metadata.at("trained"), true);
}

TEST(Train, ReproducibleCheckpointBytes) {
  TempDir a("repa"), b("repb");
  TrainConfig cfg = mini_config(23);
  cfg.iterations = 3;
  cfg.out_dir = a.path();
  train<double>(cfg, toy_data(3, 3));
  cfg.out_dir = b.path();
  train<double>(cfg, toy_data(3, 3));
  // The out_dir is recorded in the metadata, so compare tensors and metrics.
  EXPECT_EQ(sgan::testing::read_bytes(a / "metrics.csv"), sgan::testing::read_bytes(b / "metrics.csv"));
  EXPECT_EQ(load_checkpoint<double>(a / "checkpoint.sgan").generator.tensors,
            load_checkpoint<double>(b / "checkpoint.sgan").generator.tensors);
}

TEST(Train, Errors) {
  TempDir dir("errs");
  TrainConfig cfg = mini_config();
  cfg.out_dir = dir.path();
  EXPECT_THROW(train<double>(cfg, {}), DataError);
  auto data = toy_data(2, 1);
  cfg.resolution = 64;
  EXPECT_THROW(train<double>(cfg, data), DataError);
  cfg.dataset_root = dir / "nowhere";
  EXPECT_THROW(train(cfg), DataError);
}

TEST(LoadDataset, PairsByStemAndRendersMaps) {
  TempDir dir("ds");
  make_corpus(3, 4, 64, 64, dir.path());
  const auto at64 = load_dataset<double>(dir.path(), 64);
  ASSERT_EQ(at64.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    const FaceSpec spec = sample_face(derive_seed(4, std::uint64_t(i)), 64, 64);
    const auto expected = render_face<double>(spec, 64, 64);
    EXPECT_EQ(at64[std::size_t(i)].map, expected.map);
    EXPECT_LE((at64[std::size_t(i)].image.data - expected.image.data).cwiseAbs().maxCoeff(), 1.0 / 255.0 + 1e-9);
  }
  // A different resolution re-renders maps from rescaled landmarks.
  const auto at32 = load_dataset<double>(dir.path(), 32);
  ASSERT_EQ(at32.size(), 3u);
  EXPECT_EQ(at32[0].map.width, 32);
  EXPECT_EQ(at32[0].image.width, 32);
}

TEST(LoadDataset, MissingLandmarks) {
  TempDir dir("ds2");
  make_corpus(2, 4, 32, 32, dir.path());
  std::filesystem::remove_all(dir / "maps");
  std::filesystem::remove(dir.path() / "landmarks" / "face_0001.json");
  EXPECT_THROW(load_dataset<double>(dir.path(), 32), DataError);
}
