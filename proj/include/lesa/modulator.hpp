// Copyright 2026 The lesacache Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "lesa/core.hpp"
#include "lesa/error.hpp"
#include "lesa/rng.hpp"
#include "lesa/spline.hpp"

namespace lesa {

// Scalar KAN modulator:
//   alpha(dt) = b + sum_m w_m * phi_m(clamp(a_m . dt)),
//   phi_m(z)  = sum_j c_{m,j} B_j(z)
// with B_j the clamped B-spline basis of `grid`.
struct KanScalar {
  std::size_t inputs = 0;
  SplineGrid grid{};
  std::vector<double> proj;    // M x inputs, row-major (a_m)
  std::vector<double> weight;  // M (w_m)
  std::vector<double> coef;    // M x (G+k), row-major (c_{m,j})
  double bias = 0.0;

  std::size_t components() const noexcept { return weight.size(); }

  KanScalar zeros_like() const {
    KanScalar z = *this;
    std::fill(z.proj.begin(), z.proj.end(), 0.0);
    std::fill(z.weight.begin(), z.weight.end(), 0.0);
    std::fill(z.coef.begin(), z.coef.end(), 0.0);
    z.bias = 0.0;
    return z;
  }

  // Parameter tensors in declaration order.
  std::vector<std::span<double>> tensors() {
    return {std::span<double>(proj), std::span<double>(weight), std::span<double>(coef),
            std::span<double>(&bias, 1)};
  }
  std::vector<std::span<const double>> tensors() const {
    return {std::span<const double>(proj), std::span<const double>(weight), std::span<const double>(coef),
            std::span<const double>(&bias, 1)};
  }

  bool operator==(const KanScalar&) const = default;
};

inline void validate(const KanScalar& kan) {
  validate(kan.grid);
  const std::size_t m = kan.components();
  detail::require(m >= 1, "KAN needs at least one component");
  detail::require(kan.inputs >= 1, "KAN needs at least one input");
  detail::require(kan.proj.size() == m * kan.inputs, "KAN projection has wrong size");
  detail::require(kan.coef.size() == m * kan.grid.num_basis(), "KAN spline coefficients have wrong size");
}

inline KanScalar kan_init(std::size_t inputs, std::size_t components, const SplineGrid& grid, std::uint64_t seed) {
  detail::require(inputs >= 1 && components >= 1, "kan_init needs L >= 1 and M >= 1");
  validate(grid);
  Rng rng(derive_seed(seed, 0x4B41));
  KanScalar kan;
  kan.inputs = inputs;
  kan.grid = grid;
  kan.proj = rng.normal_vector(components * inputs, 1.0 / std::sqrt(static_cast<double>(inputs)));
  kan.weight = rng.normal_vector(components, 1.0 / std::sqrt(static_cast<double>(components)));
  kan.coef = rng.normal_vector(components * grid.num_basis(), 0.1);
  kan.bias = 0.0;
  return kan;
}

inline KanScalar kan_init(std::size_t inputs, std::size_t components, std::size_t intervals, std::uint64_t seed) {
  SplineGrid grid;
  grid.intervals = intervals;
  return kan_init(inputs, components, grid, seed);
}

struct KanCache {
  std::vector<double> input;
  std::vector<double> projection;  // unclamped a_m . dt
  std::vector<double> phi;         // phi_m at the clamped projection
  std::vector<double> dphi;        // phi_m' at the clamped projection
  std::vector<std::vector<double>> basis;
};

struct KanForward {
  double alpha = 0.0;
  KanCache cache;
};

inline KanForward kan_forward(const KanScalar& kan, std::span<const double> dt) {
  detail::require(dt.size() == kan.inputs, "KAN input has length ", dt.size(), ", expected ", kan.inputs);
  if (!all_finite(dt)) detail::fail(ErrorCode::kNumeric, "non-finite KAN input");
  const std::size_t m_count = kan.components();
  const std::size_t nb = kan.grid.num_basis();
  const auto knots = kan.grid.knots();
  KanForward out;
  out.cache.input.assign(dt.begin(), dt.end());
  out.cache.projection.resize(m_count);
  out.cache.phi.resize(m_count);
  out.cache.dphi.resize(m_count);
  out.cache.basis.resize(m_count);
  double alpha = kan.bias;
  for (std::size_t m = 0; m < m_count; ++m) {
    const double z = dot(std::span(kan.proj).subspan(m * kan.inputs, kan.inputs), dt);
    auto bd = bspline_basis_with_derivative(kan.grid, knots, z);
    double phi = 0.0;
    double dphi = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
      phi += kan.coef[m * nb + j] * bd.value[j];
      dphi += kan.coef[m * nb + j] * bd.derivative[j];
    }
    alpha += kan.weight[m] * phi;
    out.cache.projection[m] = z;
    out.cache.phi[m] = phi;
    out.cache.dphi[m] = dphi;
    out.cache.basis[m] = std::move(bd.value);
  }
  out.alpha = alpha;
  return out;
}

struct KanGrad {
  KanScalar params;
  std::vector<double> input;
};

// Gradients of dalpha * alpha. The clamp passes no gradient to inputs that
// fall outside the grid range.
inline KanGrad kan_backward(const KanScalar& kan, std::span<const double> dt, const KanCache& cache,
                            double dalpha) {
  const std::size_t m_count = kan.components();
  const std::size_t nb = kan.grid.num_basis();
  if (cache.phi.size() != m_count || cache.input.size() != dt.size() ||
      !std::equal(dt.begin(), dt.end(), cache.input.begin())) {
    detail::fail(ErrorCode::kState, "KAN cache does not match the given model and input");
  }
  KanGrad g{kan.zeros_like(), std::vector<double>(dt.size(), 0.0)};
  g.params.bias = dalpha;
  for (std::size_t m = 0; m < m_count; ++m) {
    g.params.weight[m] = dalpha * cache.phi[m];
    const double scale = dalpha * kan.weight[m];
    for (std::size_t j = 0; j < nb; ++j) g.params.coef[m * nb + j] = scale * cache.basis[m][j];
    const double z = cache.projection[m];
    if (z < kan.grid.lo || z > kan.grid.hi) continue;
    const double dz = scale * cache.dphi[m];
    for (std::size_t i = 0; i < kan.inputs; ++i) {
      g.params.proj[m * kan.inputs + i] = dz * dt[i];
      g.input[i] += dz * kan.proj[m * kan.inputs + i];
    }
  }
  return g;
}

// One-hidden-layer MLP with SiLU: alpha(dt) = sum_h v_h silu(u_h . dt + c_h).
struct MlpScalar {
  std::size_t inputs = 0;
  std::vector<double> hidden_weight;  // H x inputs, row-major (U)
  std::vector<double> hidden_bias;    // H (c)
  std::vector<double> out_weight;     // H (v)

  std::size_t hidden() const noexcept { return out_weight.size(); }

  MlpScalar zeros_like() const {
    MlpScalar z = *this;
    std::fill(z.hidden_weight.begin(), z.hidden_weight.end(), 0.0);
    std::fill(z.hidden_bias.begin(), z.hidden_bias.end(), 0.0);
    std::fill(z.out_weight.begin(), z.out_weight.end(), 0.0);
    return z;
  }

  std::vector<std::span<double>> tensors() {
    return {std::span<double>(hidden_weight), std::span<double>(hidden_bias), std::span<double>(out_weight)};
  }
  std::vector<std::span<const double>> tensors() const {
    return {std::span<const double>(hidden_weight), std::span<const double>(hidden_bias),
            std::span<const double>(out_weight)};
  }

  bool operator==(const MlpScalar&) const = default;
};

inline void validate(const MlpScalar& mlp) {
  detail::require(mlp.hidden() >= 1, "MLP needs at least one hidden unit");
  detail::require(mlp.inputs >= 1, "MLP needs at least one input");
  detail::require(mlp.hidden_weight.size() == mlp.hidden() * mlp.inputs, "MLP hidden weight has wrong size");
  detail::require(mlp.hidden_bias.size() == mlp.hidden(), "MLP hidden bias has wrong size");
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }
inline double silu_derivative(double x) {
  const double s = sigmoid(x);
  return x * s + s * (1.0 - x * s);
}

inline MlpScalar mlp_init(std::size_t inputs, std::size_t hidden, std::uint64_t seed) {
  detail::require(inputs >= 1 && hidden >= 1, "mlp_init needs L >= 1 and H >= 1");
  Rng rng(derive_seed(seed, 0x4D4C));
  MlpScalar mlp;
  mlp.inputs = inputs;
  mlp.hidden_weight = rng.normal_vector(hidden * inputs, 1.0 / std::sqrt(static_cast<double>(inputs)));
  mlp.hidden_bias.assign(hidden, 0.0);
  mlp.out_weight = rng.normal_vector(hidden, 1.0 / std::sqrt(static_cast<double>(hidden)));
  return mlp;
}

struct MlpCache {
  std::vector<double> input;
  std::vector<double> pre;
};

struct MlpForward {
  double alpha = 0.0;
  MlpCache cache;
};

inline MlpForward mlp_forward(const MlpScalar& mlp, std::span<const double> dt) {
  detail::require(dt.size() == mlp.inputs, "MLP input has length ", dt.size(), ", expected ", mlp.inputs);
  if (!all_finite(dt)) detail::fail(ErrorCode::kNumeric, "non-finite MLP input");
  MlpForward out;
  out.cache.input.assign(dt.begin(), dt.end());
  out.cache.pre.resize(mlp.hidden());
  for (std::size_t h = 0; h < mlp.hidden(); ++h) {
    const double pre = dot(std::span(mlp.hidden_weight).subspan(h * mlp.inputs, mlp.inputs), dt) + mlp.hidden_bias[h];
    out.cache.pre[h] = pre;
    out.alpha += mlp.out_weight[h] * silu(pre);
  }
  return out;
}

struct MlpGrad {
  MlpScalar params;
  std::vector<double> input;
};

inline MlpGrad mlp_backward(const MlpScalar& mlp, std::span<const double> dt, const MlpCache& cache, double dalpha) {
  if (cache.pre.size() != mlp.hidden() || cache.input.size() != dt.size() ||
      !std::equal(dt.begin(), dt.end(), cache.input.begin())) {
    detail::fail(ErrorCode::kState, "MLP cache does not match the given model and input");
  }
  MlpGrad g{mlp.zeros_like(), std::vector<double>(dt.size(), 0.0)};
  for (std::size_t h = 0; h < mlp.hidden(); ++h) {
    const double pre = cache.pre[h];
    g.params.out_weight[h] = dalpha * silu(pre);
    const double dpre = dalpha * mlp.out_weight[h] * silu_derivative(pre);
    g.params.hidden_bias[h] = dpre;
    for (std::size_t i = 0; i < mlp.inputs; ++i) {
      g.params.hidden_weight[h * mlp.inputs + i] = dpre * dt[i];
      g.input[i] += dpre * mlp.hidden_weight[h * mlp.inputs + i];
    }
  }
  return g;
}

enum class ModulatorKind : std::uint8_t { kKan = 0, kMlp = 1 };

using Modulator = std::variant<KanScalar, MlpScalar>;
using ModulatorCache = std::variant<KanCache, MlpCache>;

inline ModulatorKind modulator_kind(const Modulator& m) {
  return std::holds_alternative<KanScalar>(m) ? ModulatorKind::kKan : ModulatorKind::kMlp;
}

inline std::size_t modulator_inputs(const Modulator& m) {
  return std::visit([](const auto& x) { return x.inputs; }, m);
}

}  // namespace lesa
