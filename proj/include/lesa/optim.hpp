// Copyright 2026 The lesacache Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "lesa/core.hpp"
#include "lesa/error.hpp"

namespace lesa {

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double clip_norm = 1.0;
  std::size_t epochs_gt = 1;
  std::size_t epochs_cl = 2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;
};

inline void validate(const TrainConfig& cfg) {
  detail::require(cfg.lr > 0.0, "learning rate must be positive");
  detail::require(cfg.clip_norm > 0.0, "clip norm must be positive");
  detail::require(cfg.weight_decay >= 0.0, "weight decay must be non-negative");
  detail::require(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0 && cfg.beta2 >= 0.0 && cfg.beta2 < 1.0,
                  "betas must lie in [0,1)");
  detail::require(cfg.eps > 0.0, "eps must be positive");
}

// First and second moments per parameter tensor.
struct OptimState {
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
  std::size_t step = 0;
};

inline double global_norm(std::span<const std::span<const double>> grads) {
  double acc = 0.0;
  for (auto g : grads)
    for (double v : g) acc += v * v;
  return std::sqrt(acc);
}

// Factor that brings a gradient of norm `norm` within `clip_norm`.
inline double clip_scale(double norm, double clip_norm) {
  if (!std::isfinite(norm)) detail::fail(ErrorCode::kNumeric, "non-finite gradient norm");
  return norm > clip_norm ? clip_norm / norm : 1.0;
}

// Decoupled-weight-decay Adam update with gradients pre-multiplied by
// `grad_scale`:
//   p <- p - lr * mhat / (sqrt(vhat) + eps) - lr * wd * p
inline void adam_decoupled_update(std::span<const std::span<double>> params,
                                  std::span<const std::span<const double>> grads, OptimState& state,
                                  const TrainConfig& cfg, double grad_scale = 1.0) {
  detail::require(params.size() == grads.size(), "parameter and gradient lists differ in length");
  if (state.first.empty()) {
    for (auto p : params) {
      state.first.emplace_back(p.size(), 0.0);
      state.second.emplace_back(p.size(), 0.0);
    }
  }
  detail::require(state.first.size() == params.size(), "optimizer state does not match parameters");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto p = params[t];
    auto g = grads[t];
    auto& m = state.first[t];
    auto& v = state.second[t];
    detail::require(p.size() == g.size() && m.size() == p.size(), "tensor ", t, " shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] * grad_scale;
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      p[i] = p[i] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps) - cfg.lr * cfg.weight_decay * p[i];
    }
  }
}

// Clips by global norm, then applies the decoupled update. Returns the
// pre-clip gradient norm.
inline double optimizer_step(std::span<const std::span<double>> params, std::span<const std::span<const double>> grads,
                             OptimState& state, const TrainConfig& cfg) {
  for (auto g : grads) {
    if (!all_finite(g)) detail::fail(ErrorCode::kNumeric, "non-finite gradient");
  }
  const double norm = global_norm(grads);
  adam_decoupled_update(params, grads, state, cfg, clip_scale(norm, cfg.clip_norm));
  return norm;
}

}  // namespace lesa
