// Copyright 2026 The lesacache Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "lesa/error.hpp"

namespace lesa {

struct StageConfig {
  std::size_t steps = 50;
  std::size_t interval = 1;
  std::size_t b1 = 16;
  std::size_t b2 = 41;
};

inline void validate(const StageConfig& cfg) {
  detail::require(cfg.steps >= 2, "plan needs at least 2 steps");
  detail::require(cfg.interval >= 1 && cfg.interval <= cfg.steps, "interval must satisfy 1 <= N <= S");
  detail::require(0 < cfg.b1 && cfg.b1 < cfg.b2 && cfg.b2 < cfg.steps, "stage boundaries must satisfy 0 < b1 < b2 < S");
}

enum class StepKind : unsigned char { kFull, kPredict };

struct StepPlan {
  std::vector<StepKind> labels;

  std::size_t steps() const noexcept { return labels.size(); }
  bool is_full(std::size_t step) const { return labels.at(step) == StepKind::kFull; }
  std::size_t full_count() const {
    std::size_t n = 0;
    for (auto l : labels) n += l == StepKind::kFull;
    return n;
  }
  std::size_t predict_count() const { return steps() - full_count(); }

  bool operator==(const StepPlan&) const = default;
};

// Full at every multiple of N, at step 0, at both stage boundaries and at the
// final step; predicted everywhere else.
inline StepPlan build_plan(const StageConfig& cfg) {
  validate(cfg);
  StepPlan plan;
  plan.labels.assign(cfg.steps, StepKind::kPredict);
  for (std::size_t s = 0; s < cfg.steps; s += cfg.interval) plan.labels[s] = StepKind::kFull;
  plan.labels[cfg.b1] = StepKind::kFull;
  plan.labels[cfg.b2] = StepKind::kFull;
  plan.labels[cfg.steps - 1] = StepKind::kFull;
  return plan;
}

inline StepPlan all_full_plan(std::size_t steps) {
  return StepPlan{std::vector<StepKind>(steps, StepKind::kFull)};
}

struct CostModel {
  double full_cost = 1.0;
  double predict_cost = 0.0;
};

struct FlopAccount {
  double total = 0.0;
  double baseline = 0.0;
  double speedup = 0.0;
};

inline FlopAccount flop_account(const StepPlan& plan, const CostModel& cm = {}) {
  detail::require(cm.full_cost > 0.0 && cm.predict_cost >= 0.0, "cost model needs c_full > 0 and c_pred >= 0");
  FlopAccount out;
  out.baseline = static_cast<double>(plan.steps()) * cm.full_cost;
  out.total = static_cast<double>(plan.full_count()) * cm.full_cost +
              static_cast<double>(plan.predict_count()) * cm.predict_cost;
  if (out.total <= 0.0) detail::fail(ErrorCode::kValidation, "plan has zero total cost");
  out.speedup = out.baseline / out.total;
  return out;
}

}  // namespace lesa
