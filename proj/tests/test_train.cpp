// Copyright 2026 The lesacache Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "lesa/train.hpp"
#include "support.hpp"

namespace lesa {
namespace {

using testing::TempDir;

std::vector<Trajectory> synth_data(std::size_t count, std::size_t dim = 8, std::uint64_t first = 0) {
  SynthParams p;
  p.dim = dim;
  std::vector<Trajectory> out;
  for (std::uint64_t s = first; s < first + count; ++s) {
    p.seed = s;
    out.push_back(synth_trajectory(p));
  }
  return out;
}

StagePredictor fresh(std::size_t dim = 8, ModulatorKind kind = ModulatorKind::kKan) {
  PredictorSpec spec;
  spec.dim = dim;
  spec.modulator = kind;
  spec.seed = 1;
  return make_stage_predictor(spec);
}

const StepPlan kPlan = build_plan({50, 10, 16, 41});

TEST(Optimizer, ZeroGradientZeroDecayIsNoOp) {
  std::vector<double> p{1.0, -2.0, 3.0};
  const std::vector<double> g(3, 0.0);
  TrainConfig cfg;
  cfg.weight_decay = 0.0;
  OptimState st;
  const std::vector<std::span<double>> ps{p};
  const std::vector<std::span<const double>> gs{g};
  for (int i = 0; i < 5; ++i) optimizer_step(ps, gs, st, cfg);
  EXPECT_EQ(p, (std::vector<double>{1.0, -2.0, 3.0}));
  EXPECT_EQ(st.step, 5u);
}

TEST(Optimizer, OneStepByHand) {
  std::vector<double> p{0.75};
  const std::vector<double> g{1.0};
  TrainConfig cfg;
  cfg.lr = 1e-2;
  cfg.weight_decay = 0.1;
  OptimState st;
  const std::vector<std::span<double>> ps{p};
  const std::vector<std::span<const double>> gs{g};
  optimizer_step(ps, gs, st, cfg);
  const double expected = 0.75 - cfg.lr * (1.0 / (1.0 + cfg.eps)) - cfg.lr * cfg.weight_decay * 0.75;
  EXPECT_NEAR(p[0], expected, 1e-15);
}

TEST(Optimizer, ClipsByGlobalNorm) {
  // Gradient (6, 8) has norm 10; clip 1 scales it by 0.1.
  std::vector<double> a{0.0}, b{0.0};
  const std::vector<double> ga{6.0}, gb{8.0};
  TrainConfig cfg;
  OptimState st;
  const std::vector<std::span<double>> ps{a, b};
  const std::vector<std::span<const double>> gs{ga, gb};
  EXPECT_DOUBLE_EQ(optimizer_step(ps, gs, st, cfg), 10.0);
  EXPECT_NEAR(st.first[0][0], (1.0 - cfg.beta1) * 0.6, 1e-15);
  EXPECT_NEAR(st.first[1][0], (1.0 - cfg.beta1) * 0.8, 1e-15);
  EXPECT_NEAR(st.second[1][0], (1.0 - cfg.beta2) * 0.64, 1e-15);
}

TEST(Optimizer, ClippingNeverIncreasesNorm) {
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    const double norm = std::abs(rng.normal()) * std::pow(10.0, rng.normal());
    const double clip = 0.1 + rng.uniform();
    const double post = norm * clip_scale(norm, clip);
    EXPECT_LE(post, norm);
    EXPECT_LE(post, clip + 1e-12);
  }
}

TEST(Optimizer, RejectsNonFiniteAndMismatch) {
  std::vector<double> p{1.0};
  const std::vector<double> g{std::nan("")};
  OptimState st;
  const std::vector<std::span<double>> ps{p};
  const std::vector<std::span<const double>> gs{g};
  EXPECT_THROW(optimizer_step(ps, gs, st, TrainConfig{}), Error);
  const std::vector<double> g2{1.0, 2.0};
  const std::vector<std::span<const double>> gs2{g2};
  EXPECT_THROW(optimizer_step(ps, gs2, st, TrainConfig{}), Error);
  TrainConfig bad;
  bad.lr = 0.0;
  EXPECT_THROW(validate(bad), Error);
  bad = TrainConfig{};
  bad.clip_norm = -1.0;
  EXPECT_THROW(validate(bad), Error);
}

TEST(Dataset, WritesOneFilePerSeed) {
  TempDir dir;
  SynthParams p;
  std::vector<std::uint64_t> seeds(100);
  for (std::uint64_t i = 0; i < 100; ++i) seeds[i] = i;
  const auto data = prepare_dataset(SynthBackbone{p}, seeds, Schedule(50), dir.path());
  ASSERT_EQ(data.size(), 100u);
  std::size_t files = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir.path())) files += entry.path().extension() == ".lesa";
  EXPECT_EQ(files, 100u);
  const auto back = read_trajectory(dir / "traj_7.lesa");
  EXPECT_EQ(back.steps(), 50u);
  EXPECT_EQ(back, quantize(data[7]));
}

TEST(Dataset, SameSeedGivesIdenticalFiles) {
  TempDir a, b;
  const std::vector<std::uint64_t> seeds{3};
  const Backbone bb = GmmBackbone{make_gmm(4, 3, 4.0, 0.5, 0)};
  prepare_dataset(bb, seeds, Schedule(20), a.path());
  prepare_dataset(bb, seeds, Schedule(20), b.path());
  EXPECT_EQ(binary::read_file(a / "traj_3.lesa"), binary::read_file(b / "traj_3.lesa"));
}

TEST(Dataset, DivergenceNamesSeed) {
  GmmSpec spec{1, {{1.0, {1e7}, 1.0}}};
  const std::vector<std::uint64_t> seeds{0, 42};
  try {
    prepare_dataset(GmmBackbone{spec}, seeds, Schedule(10));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIntegration);
    EXPECT_NE(std::string(e.what()).find("seed 0"), std::string::npos);
  }
  EXPECT_THROW(prepare_dataset(GmmBackbone{spec}, std::span<const std::uint64_t>{}, Schedule(10)), Error);
}

// Zero residual means pure reuse of the previous ground-truth feature.
TEST(GtGuided, InitialLossIsReuseLoss) {
  const auto data = synth_data(1);
  auto sp = fresh();
  const auto curve = train_gt_guided(sp, data, kPlan, TrainConfig{}, 1);
  double reuse = 0.0;
  std::size_t n = 0;
  for (std::size_t t = 1; t < 50; ++t) {
    if (kPlan.is_full(t)) continue;
    for (std::size_t d = 0; d < 8; ++d) reuse += std::abs(data[0].features[t - 1][d] - data[0].features[t][d]) / 8.0;
    ++n;
  }
  ASSERT_EQ(curve.size(), 1u);
  EXPECT_NEAR(curve[0], reuse / static_cast<double>(n), 1e-12);
}

// Epoch-mean loss on one trajectory decreases monotonically through the
// descent phase at the default learning rate.
TEST(GtGuided, OverfitLossNonIncreasingDuringDescent) {
  const auto data = synth_data(1, 16);
  auto sp = fresh(16);
  const auto curve = train_gt_guided(sp, data, kPlan, TrainConfig{}, 500);
  for (std::size_t i = 1; i < curve.size(); ++i) ASSERT_LE(curve[i], curve[i - 1]) << "epoch " << i;
  EXPECT_LT(curve.back(), 0.5 * curve.front());
}

TEST(GtGuided, FiniteOverTwentySeeds) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto sp = fresh();
    TrainConfig cfg;
    cfg.seed = seed;
    const auto curve = train_gt_guided(sp, synth_data(1, 8, seed), kPlan, cfg, 3);
    for (double v : curve) EXPECT_TRUE(std::isfinite(v));
    validate(sp);
  }
}

TEST(GtGuided, DeterministicBitIdentical) {
  const auto data = synth_data(3);
  auto a = fresh(8, ModulatorKind::kKan);
  auto b = fresh(8, ModulatorKind::kKan);
  train_gt_guided(a, data, kPlan, TrainConfig{}, 4);
  train_gt_guided(b, data, kPlan, TrainConfig{}, 4);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, fresh());
}

TEST(GtGuided, StageIsolation) {
  // Only steps 20..25 are predicted, all inside stage 2.
  StepPlan plan = all_full_plan(50);
  for (std::size_t s = 20; s <= 25; ++s) plan.labels[s] = StepKind::kPredict;
  auto sp = fresh();
  const auto before = sp;
  train_gt_guided(sp, synth_data(2), plan, TrainConfig{}, 2);
  EXPECT_EQ(sp.experts[0], before.experts[0]);
  EXPECT_NE(sp.experts[1], before.experts[1]);
  EXPECT_EQ(sp.experts[2], before.experts[2]);
}

TEST(GtGuided, LogsOneRowPerTrajectoryAndEpoch) {
  std::vector<TrainLogRow> rows;
  auto sp = fresh();
  const auto curve = train_gt_guided(sp, synth_data(3), kPlan, TrainConfig{}, 2,
                                     [&](const TrainLogRow& r) { rows.push_back(r); });
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[4].epoch, 1u);
  EXPECT_EQ(rows[4].trajectory, 1u);
  EXPECT_EQ(rows[0].phase, TrainPhase::kGroundTruth);
  EXPECT_NEAR(curve[1], (rows[3].mean_l1 + rows[4].mean_l1 + rows[5].mean_l1) / 3.0, 1e-15);
  EXPECT_STREQ(phase_name(TrainPhase::kClosedLoop), "cl");
}

TEST(GtGuided, RejectsBadData) {
  auto sp = fresh();
  EXPECT_THROW(train_gt_guided(sp, std::vector<Trajectory>{}, kPlan, TrainConfig{}, 1), Error);
  EXPECT_THROW(train_gt_guided(sp, synth_data(1, 4), kPlan, TrainConfig{}, 1), Error);
  EXPECT_THROW(train_gt_guided(sp, synth_data(1), build_plan({40, 10, 16, 30}), TrainConfig{}, 1), Error);
  auto bad = synth_data(1);
  bad[0].features[12][3] = std::nan("");
  try {
    train_gt_guided(sp, bad, kPlan, TrainConfig{}, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumeric);
    EXPECT_NE(std::string(e.what()).find("gt loss"), std::string::npos);
  }
}

TEST(ClosedLoop, AllFullPlanLeavesParametersUnchanged) {
  auto sp = fresh();
  const auto before = sp;
  const auto curve = train_closed_loop(sp, synth_data(2), all_full_plan(50), TrainConfig{}, 2);
  EXPECT_EQ(sp, before);
  EXPECT_EQ(curve, (std::vector<double>{0.0, 0.0}));
}

// With a zero residual every prediction repeats the newest full feature, so
// the first closed-loop loss is the reuse loss against the last full step.
TEST(ClosedLoop, FirstLossFeedsOwnPredictions) {
  const auto data = synth_data(1);
  auto sp = fresh();
  const auto curve = train_closed_loop(sp, data, kPlan, TrainConfig{}, 1);
  double loss = 0.0;
  std::size_t n = 0, last_full = 0;
  for (std::size_t t = 0; t < 50; ++t) {
    if (kPlan.is_full(t)) {
      last_full = t;
      continue;
    }
    for (std::size_t d = 0; d < 8; ++d) loss += std::abs(data[0].features[last_full][d] - data[0].features[t][d]) / 8.0;
    ++n;
  }
  EXPECT_NEAR(curve[0], loss / static_cast<double>(n), 1e-12);
}

TEST(ClosedLoop, LongHorizonStaysFiniteOverTwentySeeds) {
  const StepPlan plan = build_plan({50, 50, 16, 41});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto sp = fresh();
    const auto data = synth_data(1, 8, seed);
    train_gt_guided(sp, data, plan, TrainConfig{}, 1);
    const auto curve = train_closed_loop(sp, data, plan, TrainConfig{}, 2);
    for (double v : curve) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(ClosedLoop, DeterministicAndUsesConfigEpochs) {
  const auto data = synth_data(2);
  auto a = fresh(8, ModulatorKind::kMlp);
  auto b = fresh(8, ModulatorKind::kMlp);
  TrainConfig cfg;
  cfg.epochs_cl = 3;
  EXPECT_EQ(train_closed_loop(a, data, kPlan, cfg).size(), 3u);
  train_closed_loop(b, data, kPlan, cfg);
  EXPECT_EQ(a, b);
}

}  // namespace
}  // namespace lesa
