// Copyright 2026 The lesacache Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "lesa/core.hpp"
#include "lesa/error.hpp"

namespace lesa {

// Finite-difference table over full-compute features.
//
// Sign convention: every level is "older minus newer", so
//   D^0 = F(s0),  D^1 = F(s1) - F(s0),  D^2 = D^1_old - D^1_new, ...
// where s0 is the newest full step and s1 the previous one. With this choice
// the truncated expansion F + sum_i D^i / (i! N^i) (-k)^i extrapolates linear
// streams exactly.
//
// Full steps need not be exactly `spacing` apart (forced full steps break the
// regular grid). Levels are kept as scaled divided differences,
//   D^i = (-N)^i i! f[s0, s1, ..., si],
// which coincide with the plain differences above on a regular grid.
struct DiffTable {
  std::size_t spacing = 1;
  std::size_t max_order = 2;
  std::vector<Feature> levels;
  std::vector<double> nodes;  // step positions, newest first
  std::size_t count = 0;

  std::size_t available_order() const noexcept { return levels.empty() ? 0 : levels.size() - 1; }
  std::optional<double> newest_step() const {
    return nodes.empty() ? std::nullopt : std::optional<double>(nodes.front());
  }
};

inline DiffTable make_diff_table(std::size_t spacing, std::size_t max_order = 2) {
  detail::require(spacing >= 1, "difference table spacing must be >= 1");
  detail::require(max_order <= 4, "difference table order must be <= 4");
  DiffTable t;
  t.spacing = spacing;
  t.max_order = max_order;
  return t;
}

// Absorbs a full-compute feature observed at `step`.
inline DiffTable table_update(DiffTable table, Feature f_new, double step) {
  if (!table.levels.empty()) {
    detail::require(f_new.size() == table.levels.front().size(), "feature dimension ", f_new.size(),
                    " does not match table dimension ", table.levels.front().size());
    detail::require(step > table.nodes.front(), "full steps must be absorbed in increasing order");
  }
  const double n = static_cast<double>(table.spacing);
  table.nodes.insert(table.nodes.begin(), step);
  const std::size_t order = std::min(table.count, table.max_order);
  std::vector<Feature> next;
  next.reserve(order + 1);
  next.push_back(std::move(f_new));
  for (std::size_t i = 1; i <= order; ++i) {
    const Feature& newer = next[i - 1];
    const Feature& older = table.levels[i - 1];
    // Exactly 1 on a regular grid.
    const double scale = static_cast<double>(i) * n / (table.nodes[0] - table.nodes[i]);
    Feature level(newer.size());
    for (std::size_t d = 0; d < newer.size(); ++d) level[d] = (older[d] - newer[d]) * scale;
    next.push_back(std::move(level));
  }
  table.levels = std::move(next);
  if (table.nodes.size() > table.max_order + 1) table.nodes.resize(table.max_order + 1);
  ++table.count;
  return table;
}

// Regular-grid form: the previous full step is assumed `spacing` steps back.
inline DiffTable table_update(DiffTable table, Feature f_new) {
  const double step = table.nodes.empty() ? 0.0 : table.nodes.front() + static_cast<double>(table.spacing);
  return table_update(std::move(table), std::move(f_new), step);
}

enum class TaylorForm {
  // Newton backward form: exact for streams polynomial of degree <= m.
  kNewton,
  // Plain truncated expansion sum_i D^i / (i! N^i) (-k)^i. Matches kNewton for
  // m <= 1 on a regular grid; biased at m >= 2.
  kTruncated,
};

struct Forecast {
  Feature value;
  std::size_t order_used = 0;
};

// Forecast k steps past the newest full step using differences up to order m,
// falling back to the largest available order when history is short.
inline Forecast taylor_forecast(const DiffTable& table, double k, std::size_t m,
                                TaylorForm form = TaylorForm::kNewton) {
  if (table.levels.empty()) detail::fail(ErrorCode::kState, "forecast from an empty difference table");
  detail::require(k >= 1.0, "forecast offset must be >= 1");
  const std::size_t order = std::min(m, table.available_order());
  const double n = static_cast<double>(table.spacing);
  Forecast out{table.levels[0], order};
  double factor = 1.0;
  for (std::size_t i = 1; i <= order; ++i) {
    // factor = prod_{j<i} (-k - (s0 - s_j)) / (i! N^i), or (-k)^i / (i! N^i).
    const double gap = form == TaylorForm::kNewton ? table.nodes[0] - table.nodes[i - 1] : 0.0;
    factor *= (-k - gap) / (static_cast<double>(i) * n);
    const Feature& level = table.levels[i];
    for (std::size_t d = 0; d < out.value.size(); ++d) out.value[d] += factor * level[d];
  }
  return out;
}

inline Feature reuse_forecast(const DiffTable& table) {
  if (table.levels.empty()) detail::fail(ErrorCode::kState, "reuse from an empty difference table");
  return table.levels[0];
}

}  // namespace lesa
