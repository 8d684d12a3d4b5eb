// Copyright 2026 The lesacache Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lesa/error.hpp"

namespace lesa {

// One feature vector per denoising step. Storage is binary32 on disk,
// computation is binary64 in memory.
using Feature = std::vector<double>;

inline bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

// Uniform schedule t_s = 1 - s/(S-1), descending from 1 to 0.
class Schedule {
 public:
  explicit Schedule(std::size_t num_steps) : num_steps_(num_steps) {
    detail::require(num_steps >= 2, "schedule needs at least 2 steps, got ", num_steps);
  }

  std::size_t size() const noexcept { return num_steps_; }

  double t(std::size_t step) const {
    detail::require(step < num_steps_, "step ", step, " out of range [0,", num_steps_, ")");
    return 1.0 - static_cast<double>(step) / static_cast<double>(num_steps_ - 1);
  }

  std::vector<double> timesteps() const {
    std::vector<double> ts(num_steps_);
    for (std::size_t s = 0; s < num_steps_; ++s) ts[s] = t(s);
    return ts;
  }

  bool operator==(const Schedule&) const = default;

 private:
  std::size_t num_steps_;
};

struct Trajectory {
  std::vector<double> timesteps;
  std::vector<Feature> features;
  std::vector<Feature> states;
  std::uint64_t seed = 0;
  // In-memory label only; not persisted by the trajectory file format.
  std::string backbone_tag;

  std::size_t steps() const noexcept { return timesteps.size(); }
  std::size_t feature_dim() const noexcept { return features.empty() ? 0 : features.front().size(); }
  std::size_t state_dim() const noexcept { return states.empty() ? 0 : states.front().size(); }

  bool operator==(const Trajectory&) const = default;
};

inline void validate(const Trajectory& traj) {
  const std::size_t steps = traj.timesteps.size();
  detail::require(steps >= 2, "trajectory needs at least 2 steps, got ", steps);
  detail::require(traj.features.size() == steps && traj.states.size() == steps,
                  "trajectory arrays must all have length ", steps);
  detail::require(std::abs(traj.timesteps.front() - 1.0) <= 1e-12, "timesteps[0] must be 1.0");
  detail::require(std::abs(traj.timesteps.back()) <= 1e-12, "timesteps[S-1] must be 0.0");
  for (std::size_t s = 1; s < steps; ++s) {
    detail::require(traj.timesteps[s] < traj.timesteps[s - 1],
                    "timesteps must be strictly decreasing at index ", s);
  }
  const std::size_t dim = traj.features.front().size();
  const std::size_t state_dim = traj.states.front().size();
  detail::require(dim >= 1, "feature dimension must be >= 1");
  for (std::size_t s = 0; s < steps; ++s) {
    detail::require(traj.features[s].size() == dim, "feature ", s, " has inconsistent dimension");
    detail::require(traj.states[s].size() == state_dim, "state ", s, " has inconsistent dimension");
    detail::require(all_finite(traj.features[s]), "feature ", s, " is not finite");
    detail::require(all_finite(traj.states[s]), "state ", s, " is not finite");
  }
}

// Last K entries of an oldest-to-newest history. Short histories are
// left-padded by repeating the oldest entry.
inline std::vector<Feature> window(std::span<const Feature> history, std::size_t k) {
  detail::require(!history.empty(), "window over an empty history");
  detail::require(k >= 1, "window length must be >= 1");
  std::vector<Feature> out;
  out.reserve(k);
  if (history.size() >= k) {
    out.assign(history.end() - static_cast<std::ptrdiff_t>(k), history.end());
    return out;
  }
  out.assign(k - history.size(), history.front());
  out.insert(out.end(), history.begin(), history.end());
  return out;
}

inline double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

}  // namespace lesa
