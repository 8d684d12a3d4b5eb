// Copyright 2026 The lesacache Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lesa/backbone.hpp"
#include "lesa/core.hpp"
#include "lesa/error.hpp"
#include "lesa/io.hpp"
#include "lesa/optim.hpp"
#include "lesa/predictor.hpp"
#include "lesa/schedule.hpp"

namespace lesa {

inline std::filesystem::path trajectory_filename(std::uint64_t seed) {
  return "traj_" + std::to_string(seed) + ".lesa";
}

// One full-compute trajectory per seed, optionally persisted under `out_dir`.
inline std::vector<Trajectory> prepare_dataset(const Backbone& backbone, std::span<const std::uint64_t> seeds,
                                               const Schedule& schedule,
                                               const std::filesystem::path& out_dir = {}) {
  detail::require(!seeds.empty(), "dataset needs at least one seed");
  std::vector<Trajectory> data;
  data.reserve(seeds.size());
  for (std::uint64_t seed : seeds) {
    try {
      data.push_back(record_full(backbone, schedule, seed));
    } catch (const Error& e) {
      throw Error(e.code(), "seed " + std::to_string(seed) + ": " + e.what());
    }
    if (!out_dir.empty()) write_trajectory(data.back(), out_dir / trajectory_filename(seed));
  }
  return data;
}

enum class TrainPhase { kGroundTruth, kClosedLoop };

struct TrainLogRow {
  TrainPhase phase;
  std::size_t epoch;
  std::size_t trajectory;
  double mean_l1;
};

inline const char* phase_name(TrainPhase p) { return p == TrainPhase::kGroundTruth ? "gt" : "cl"; }

using TrainLogger = std::function<void(const TrainLogRow&)>;

namespace detail {

struct ExpertGrad {
  LesaExpert grad;
  std::size_t contributions = 0;
};

inline std::vector<ExpertGrad> zero_grads(const StagePredictor& sp) {
  std::vector<ExpertGrad> g;
  for (const auto& e : sp.experts) g.push_back({e.zeros_like(), 0});
  return g;
}

inline void accumulate(LesaExpert& into, const LesaExpert& g) {
  auto dst = into.tensors();
  auto src = g.tensors();
  for (std::size_t t = 0; t < dst.size(); ++t)
    for (std::size_t i = 0; i < dst[t].size(); ++i) dst[t][i] += src[t][i];
}

// L1 between a prediction and its target (mean over channels). Accumulates
// the gradient scaled by `weight` into the owning expert.
inline double l1_step(const StagePredictor& sp, std::vector<ExpertGrad>& grads, std::size_t stage,
                      const Prediction& pred, const Feature& target, double weight) {
  const std::size_t dim = target.size();
  std::vector<double> g(dim);
  double loss = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double r = pred.value[d] - target[d];
    loss += std::abs(r);
    g[d] = (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) * weight / static_cast<double>(dim);
  }
  auto& slot = grads[stage - 1];
  accumulate(slot.grad, predict_backward(sp.experts[stage - 1], pred.cache, g));
  ++slot.contributions;
  return loss / static_cast<double>(dim);
}

// Global-norm clip over every expert, then update only experts that received
// gradient from this batch.
inline void apply_batch(StagePredictor& sp, std::vector<OptimState>& states, std::vector<ExpertGrad>& grads,
                        const TrainConfig& cfg) {
  std::vector<std::span<const double>> all;
  for (const auto& g : grads)
    for (auto t : g.grad.tensors()) {
      if (!all_finite(t)) fail(ErrorCode::kNumeric, "non-finite gradient during training");
      all.push_back(t);
    }
  const double scale = clip_scale(global_norm(all), cfg.clip_norm);
  for (std::size_t i = 0; i < sp.experts.size(); ++i) {
    if (grads[i].contributions == 0) continue;
    auto params = sp.experts[i].tensors();
    const auto gs = std::as_const(grads[i].grad).tensors();
    adam_decoupled_update(params, gs, states[i], cfg, scale);
  }
}

inline void check_data(const StagePredictor& sp, std::span<const Trajectory> data, const StepPlan& plan) {
  require(!data.empty(), "training data is empty");
  validate(sp);
  require(plan.steps() == sp.steps, "plan has ", plan.steps(), " steps, predictor expects ", sp.steps);
  for (const auto& traj : data) {
    require(traj.steps() == sp.steps, "trajectory ", traj.seed, " has ", traj.steps(), " steps, predictor expects ",
            sp.steps);
    require(traj.feature_dim() == sp.dim(), "trajectory ", traj.seed, " has feature dim ", traj.feature_dim(),
            ", predictor expects ", sp.dim());
  }
}

inline void check_loss(double loss, TrainPhase phase, std::size_t epoch, const Trajectory& traj) {
  if (!std::isfinite(loss)) {
    fail(ErrorCode::kNumeric, "non-finite ", phase_name(phase), " loss at epoch ", epoch, " on trajectory seed ",
         traj.seed);
  }
}

}  // namespace detail

// Ground-truth guided phase: at every Predict step the history is the true
// feature sequence up to the previous step. One optimizer step per
// trajectory. Returns the mean L1 of each epoch.
inline std::vector<double> train_gt_guided(StagePredictor& sp, std::span<const Trajectory> data, const StepPlan& plan,
                                           const TrainConfig& cfg, std::size_t epochs,
                                           const TrainLogger& log = {}) {
  detail::check_data(sp, data, plan);
  validate(cfg);
  const Schedule schedule(sp.steps);
  std::vector<OptimState> states(sp.experts.size());
  std::vector<double> curve;
  const std::size_t predicts = plan.predict_count();
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t ti = 0; ti < data.size(); ++ti) {
      const auto& traj = data[ti];
      auto grads = detail::zero_grads(sp);
      double loss = 0.0;
      for (std::size_t t = 1; t < sp.steps; ++t) {
        if (plan.is_full(t)) continue;
        const std::size_t stage = expert_for_step(sp, t);
        const auto history = std::span<const Feature>(traj.features).first(t);
        const auto pred = predict(sp.experts[stage - 1], history, schedule, t);
        loss += detail::l1_step(sp, grads, stage, pred, traj.features[t], 1.0 / static_cast<double>(predicts));
      }
      if (predicts == 0) continue;
      loss /= static_cast<double>(predicts);
      detail::check_loss(loss, TrainPhase::kGroundTruth, epoch, traj);
      detail::apply_batch(sp, states, grads, cfg);
      epoch_loss += loss;
      if (log) log({TrainPhase::kGroundTruth, epoch, ti, loss});
    }
    curve.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  return curve;
}

inline std::vector<double> train_gt_guided(StagePredictor& sp, std::span<const Trajectory> data, const StepPlan& plan,
                                           const TrainConfig& cfg, const TrainLogger& log = {}) {
  return train_gt_guided(sp, data, plan, cfg, cfg.epochs_gt, log);
}

// Closed-loop autoregressive phase: walk the plan, feeding ground truth at
// Full steps and the predictor's own outputs at Predict steps. Predictions
// are recomputed with the current parameters and act as constants for the
// gradient. Returns the mean L1 of each epoch.
inline std::vector<double> train_closed_loop(StagePredictor& sp, std::span<const Trajectory> data,
                                             const StepPlan& plan, const TrainConfig& cfg, std::size_t epochs,
                                             const TrainLogger& log = {}) {
  detail::check_data(sp, data, plan);
  validate(cfg);
  const Schedule schedule(sp.steps);
  std::vector<OptimState> states(sp.experts.size());
  std::vector<double> curve;
  const std::size_t predicts = plan.predict_count();
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t ti = 0; ti < data.size(); ++ti) {
      const auto& traj = data[ti];
      auto grads = detail::zero_grads(sp);
      std::vector<Feature> history;
      history.reserve(sp.steps);
      double loss = 0.0;
      for (std::size_t t = 0; t < sp.steps; ++t) {
        if (plan.is_full(t)) {
          history.push_back(traj.features[t]);
          continue;
        }
        detail::require(!history.empty(), "plan must start with a full step");
        const std::size_t stage = expert_for_step(sp, t);
        auto pred = predict(sp.experts[stage - 1], history, schedule, t);
        loss += detail::l1_step(sp, grads, stage, pred, traj.features[t], 1.0 / static_cast<double>(predicts));
        history.push_back(std::move(pred.value));
      }
      if (predicts == 0) continue;
      loss /= static_cast<double>(predicts);
      detail::check_loss(loss, TrainPhase::kClosedLoop, epoch, traj);
      detail::apply_batch(sp, states, grads, cfg);
      epoch_loss += loss;
      if (log) log({TrainPhase::kClosedLoop, epoch, ti, loss});
    }
    curve.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  return curve;
}

inline std::vector<double> train_closed_loop(StagePredictor& sp, std::span<const Trajectory> data,
                                             const StepPlan& plan, const TrainConfig& cfg,
                                             const TrainLogger& log = {}) {
  return train_closed_loop(sp, data, plan, cfg, cfg.epochs_cl, log);
}

}  // namespace lesa
