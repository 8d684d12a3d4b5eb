// Copyright 2026 The lesacache Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <variant>
#include <vector>

#include "lesa/core.hpp"
#include "lesa/error.hpp"
#include "lesa/rng.hpp"

namespace lesa {

inline constexpr double kDivergenceLimit = 1e6;

struct GmmComponent {
  double weight = 1.0;
  std::vector<double> mean;
  double stddev = 1.0;
};

struct GmmSpec {
  std::size_t dim = 0;
  std::vector<GmmComponent> components;
};

inline void validate(const GmmSpec& spec) {
  detail::require(spec.dim >= 1, "gmm dimension must be >= 1");
  detail::require(!spec.components.empty(), "gmm needs at least one component");
  double total = 0.0;
  for (const auto& c : spec.components) {
    detail::require(c.weight > 0.0, "gmm weights must be positive");
    detail::require(c.stddev > 0.0, "gmm stddev must be positive");
    detail::require(c.mean.size() == spec.dim, "gmm mean has wrong dimension");
    total += c.weight;
  }
  detail::require(std::abs(total - 1.0) <= 1e-12, "gmm weights must sum to 1, got ", total);
}

// Equal-weight mixture with means on a seeded sphere.
inline GmmSpec make_gmm(std::size_t dim, std::size_t components, double radius, double stddev,
                        std::uint64_t seed) {
  detail::require(dim >= 1 && components >= 1, "gmm needs dim >= 1 and components >= 1");
  Rng rng(derive_seed(seed, 0x6D6D));
  GmmSpec spec;
  spec.dim = dim;
  for (std::size_t k = 0; k < components; ++k) {
    auto mean = rng.normal_vector(dim);
    const double norm = l2_norm(mean);
    for (auto& v : mean) v *= radius / norm;
    spec.components.push_back({1.0 / static_cast<double>(components), std::move(mean), stddev});
  }
  double total = 0.0;
  for (const auto& c : spec.components) total += c.weight;
  spec.components.back().weight += 1.0 - total;
  return spec;
}

// Exact conditional velocity E[eps - x0 | x_t] for x_t = (1-t) x0 + t eps,
// x0 drawn from the mixture and eps standard normal.
inline Feature gmm_velocity(const GmmSpec& spec, std::span<const double> x, double t) {
  detail::require(x.size() == spec.dim, "state has dimension ", x.size(), ", expected ", spec.dim);
  detail::require(t >= 0.0 && t <= 1.0, "time ", t, " outside [0,1]");
  if (!all_finite(x)) detail::fail(ErrorCode::kNumeric, "non-finite state passed to gmm_velocity");

  const std::size_t n = spec.components.size();
  const double one_minus_t = 1.0 - t;
  std::vector<double> log_resp(n);
  std::vector<double> var(n);
  double max_log = -INFINITY;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& c = spec.components[k];
    var[k] = one_minus_t * one_minus_t * c.stddev * c.stddev + t * t;
    double dist2 = 0.0;
    for (std::size_t d = 0; d < spec.dim; ++d) {
      const double diff = x[d] - one_minus_t * c.mean[d];
      dist2 += diff * diff;
    }
    log_resp[k] = std::log(c.weight) - 0.5 * dist2 / var[k] -
                  0.5 * static_cast<double>(spec.dim) * std::log(2.0 * std::numbers::pi * var[k]);
    max_log = std::max(max_log, log_resp[k]);
  }
  double norm = 0.0;
  for (auto& lr : log_resp) {
    lr = std::exp(lr - max_log);
    norm += lr;
  }

  Feature v(spec.dim, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& c = spec.components[k];
    const double r = log_resp[k] / norm;
    const double gain = (t - one_minus_t * c.stddev * c.stddev) / var[k];
    for (std::size_t d = 0; d < spec.dim; ++d) {
      v[d] += r * (gain * (x[d] - one_minus_t * c.mean[d]) - c.mean[d]);
    }
  }
  return v;
}

inline Feature sample_init(std::uint64_t seed, std::size_t dim) {
  Rng rng(derive_seed(seed, 0x1017));
  return rng.normal_vector(dim);
}

inline void check_divergence(std::span<const double> x, std::size_t step) {
  for (double v : x) {
    if (!std::isfinite(v) || std::abs(v) > kDivergenceLimit) {
      detail::fail(ErrorCode::kIntegration, "integration diverged at step ", step);
    }
  }
}

// Explicit Euler from t=1 to t=0, recording the velocity as the feature.
inline Trajectory integrate_full(const GmmSpec& spec, const Schedule& schedule, Feature x_init,
                                 std::uint64_t seed = 0) {
  validate(spec);
  detail::require(x_init.size() == spec.dim, "initial state has wrong dimension");
  Trajectory traj;
  traj.seed = seed;
  traj.backbone_tag = "gmm";
  traj.timesteps = schedule.timesteps();
  Feature x = std::move(x_init);
  for (std::size_t s = 0; s < schedule.size(); ++s) {
    check_divergence(x, s);
    Feature v = gmm_velocity(spec, x, traj.timesteps[s]);
    traj.states.push_back(x);
    if (s + 1 < schedule.size()) {
      const double dt = traj.timesteps[s + 1] - traj.timesteps[s];
      for (std::size_t d = 0; d < x.size(); ++d) x[d] = x[d] + dt * v[d];
    }
    traj.features.push_back(std::move(v));
  }
  return traj;
}

struct SynthParams {
  std::size_t dim = 16;
  std::size_t steps = 50;
  std::size_t b1 = 16;
  std::size_t b2 = 41;
  std::array<double, 3> rho{0.70, 0.995, 0.90};
  double drift = 4.0;
  double osc_amplitude = 0.5;
  double osc_frequency = 0.8;
  // Seeds the per-trajectory initial feature and innovations.
  std::uint64_t seed = 0;
  // Seeds the drift and oscillation directions shared by every trajectory.
  std::uint64_t structure_seed = 0;
};

inline void validate(const SynthParams& p) {
  detail::require(p.dim >= 1, "synth dimension must be >= 1");
  detail::require(p.steps >= 2, "synth needs at least 2 steps");
  detail::require(0 < p.b1 && p.b1 < p.b2 && p.b2 < p.steps, "synth boundaries must satisfy 0 < b1 < b2 < S");
  for (double r : p.rho) detail::require(r >= 0.0 && r <= 1.0, "synth rho must lie in [0,1]");
}

inline std::size_t synth_stage(const SynthParams& p, std::size_t step) {
  return step < p.b1 ? 0 : (step < p.b2 ? 1 : 2);
}

// Stage-dependent AR(1) feature stream: a noisy first stage, a smooth
// drifting middle stage, and an oscillating refinement stage.
inline Trajectory synth_trajectory(const SynthParams& p) {
  validate(p);
  Rng structure(derive_seed(p.structure_seed, 0x5717));
  auto unit = [&](Rng& rng) {
    auto v = rng.normal_vector(p.dim);
    const double n = l2_norm(v);
    for (auto& x : v) x /= n;
    return v;
  };
  const Feature drift_dir = unit(structure);
  const Feature osc_dir = unit(structure);

  Rng rng(derive_seed(p.seed, 0x5EED));
  Trajectory traj;
  traj.seed = p.seed;
  traj.backbone_tag = "synth";
  traj.timesteps = Schedule(p.steps).timesteps();
  traj.features.push_back(unit(rng));
  const double steps = static_cast<double>(p.steps);
  for (std::size_t s = 1; s < p.steps; ++s) {
    const std::size_t stage = synth_stage(p, s);
    const double rho = p.rho[stage];
    const double innovation = std::sqrt(1.0 - rho * rho);
    const Feature& prev = traj.features.back();
    Feature next(p.dim);
    for (std::size_t d = 0; d < p.dim; ++d) {
      double drift = 0.0;
      if (stage == 1) {
        drift = p.drift * static_cast<double>(s - p.b1 + 1) / steps * drift_dir[d];
      } else if (stage == 2) {
        drift = p.osc_amplitude * std::sin(p.osc_frequency * static_cast<double>(s)) * osc_dir[d];
      }
      next[d] = rho * prev[d] + drift + innovation * rng.normal();
    }
    traj.features.push_back(std::move(next));
  }
  traj.states = traj.features;
  return traj;
}

struct GmmBackbone {
  GmmSpec spec;
};

struct SynthBackbone {
  SynthParams params;
};

// Scripted open-loop feature stream (feature independent of the state);
// the state is the Euler integral of the emitted features from zero.
struct StreamBackbone {
  std::vector<Feature> features;
};

using Backbone = std::variant<GmmBackbone, SynthBackbone, StreamBackbone>;

inline std::size_t feature_dim(const Backbone& bb) {
  return std::visit(
      [](const auto& b) -> std::size_t {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, GmmBackbone>) return b.spec.dim;
        else if constexpr (std::is_same_v<T, SynthBackbone>) return b.params.dim;
        else return b.features.empty() ? 0 : b.features.front().size();
      },
      bb);
}

// Ground-truth full-compute run for one seed.
inline Trajectory record_full(const Backbone& bb, const Schedule& schedule, std::uint64_t seed) {
  return std::visit(
      [&](const auto& b) -> Trajectory {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, GmmBackbone>) {
          return integrate_full(b.spec, schedule, sample_init(seed, b.spec.dim), seed);
        } else if constexpr (std::is_same_v<T, SynthBackbone>) {
          SynthParams p = b.params;
          detail::require(p.steps == schedule.size(), "synth steps do not match schedule");
          p.seed = seed;
          return synth_trajectory(p);
        } else {
          detail::require(b.features.size() == schedule.size(), "stream length does not match schedule");
          Trajectory traj;
          traj.seed = seed;
          traj.backbone_tag = "stream";
          traj.timesteps = schedule.timesteps();
          traj.features = b.features;
          Feature x(b.features.front().size(), 0.0);
          for (std::size_t s = 0; s < schedule.size(); ++s) {
            traj.states.push_back(x);
            if (s + 1 < schedule.size()) {
              const double dt = traj.timesteps[s + 1] - traj.timesteps[s];
              for (std::size_t d = 0; d < x.size(); ++d) x[d] = x[d] + dt * b.features[s][d];
            }
          }
          return traj;
        }
      },
      bb);
}

}  // namespace lesa
