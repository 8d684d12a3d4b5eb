// Copyright 2026 The lesacache Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "lesa/core.hpp"
#include "lesa/error.hpp"
#include "lesa/io.hpp"
#include "lesa/modulator.hpp"

namespace lesa {

// Relative offsets t(pred_step) - t(i) for i = S-1 down to 0, so the oldest
// (lowest-noise) timestep comes first.
inline std::vector<double> offsets(const Schedule& schedule, std::size_t pred_step) {
  const std::size_t steps = schedule.size();
  const double t_pred = schedule.t(pred_step);
  std::vector<double> out(steps);
  for (std::size_t j = 0; j < steps; ++j) out[j] = t_pred - schedule.t(steps - 1 - j);
  return out;
}

// Residual expert: z = W [h_{t-K+1} .. h_t] + b, alpha = modulator(offsets),
// prediction = h_t + alpha * z.
struct LesaExpert {
  std::size_t window = 1;
  std::size_t dim = 1;
  std::vector<double> weight;  // dim x (window * dim), row-major
  std::vector<double> bias;    // dim
  Modulator modulator = KanScalar{};

  LesaExpert zeros_like() const {
    LesaExpert z = *this;
    std::fill(z.weight.begin(), z.weight.end(), 0.0);
    std::fill(z.bias.begin(), z.bias.end(), 0.0);
    std::visit([](auto& m) { m = m.zeros_like(); }, z.modulator);
    return z;
  }

  std::vector<std::span<double>> tensors() {
    std::vector<std::span<double>> out{std::span<double>(weight), std::span<double>(bias)};
    std::visit([&](auto& m) { for (auto t : m.tensors()) out.push_back(t); }, modulator);
    return out;
  }
  std::vector<std::span<const double>> tensors() const {
    std::vector<std::span<const double>> out{std::span<const double>(weight), std::span<const double>(bias)};
    std::visit([&](const auto& m) { for (auto t : m.tensors()) out.push_back(t); }, modulator);
    return out;
  }

  bool operator==(const LesaExpert&) const = default;
};

inline void validate(const LesaExpert& e) {
  detail::require(e.window >= 1 && e.dim >= 1, "expert needs window >= 1 and dim >= 1");
  detail::require(e.weight.size() == e.dim * e.window * e.dim, "expert projection has wrong size");
  detail::require(e.bias.size() == e.dim, "expert bias has wrong size");
  std::visit([](const auto& m) { validate(m); }, e.modulator);
  for (auto t : e.tensors()) detail::require(all_finite(t), "expert parameters are not finite");
}

// Zero residual projection, so an untrained expert reproduces plain reuse.
inline LesaExpert make_expert(std::size_t window, std::size_t dim, Modulator modulator) {
  LesaExpert e;
  e.window = window;
  e.dim = dim;
  e.weight.assign(dim * window * dim, 0.0);
  e.bias.assign(dim, 0.0);
  e.modulator = std::move(modulator);
  validate(e);
  return e;
}

struct PredictCache {
  std::vector<double> input;  // oldest-first concatenation of the window
  std::vector<double> residual;
  std::vector<double> offsets;
  double alpha = 0.0;
  ModulatorCache modulator;
};

struct Prediction {
  Feature value;
  PredictCache cache;
};

inline Prediction predict(const LesaExpert& e, std::span<const Feature> history, const Schedule& schedule,
                          std::size_t pred_step) {
  detail::require(!history.empty(), "predict needs a non-empty history");
  detail::require(modulator_inputs(e.modulator) == schedule.size(),
                  "modulator expects ", modulator_inputs(e.modulator), " offsets, schedule has ", schedule.size());
  const auto win = window(history, e.window);
  Prediction out;
  auto& c = out.cache;
  c.input.reserve(e.window * e.dim);
  for (const auto& h : win) {
    detail::require(h.size() == e.dim, "history feature has dimension ", h.size(), ", expected ", e.dim);
    c.input.insert(c.input.end(), h.begin(), h.end());
  }
  const std::size_t in = c.input.size();
  c.residual.resize(e.dim);
  for (std::size_t d = 0; d < e.dim; ++d) {
    c.residual[d] = dot(std::span(e.weight).subspan(d * in, in), c.input) + e.bias[d];
  }
  c.offsets = offsets(schedule, pred_step);
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, KanScalar>) {
          auto f = kan_forward(m, c.offsets);
          c.alpha = f.alpha;
          c.modulator = std::move(f.cache);
        } else {
          auto f = mlp_forward(m, c.offsets);
          c.alpha = f.alpha;
          c.modulator = std::move(f.cache);
        }
      },
      e.modulator);
  const Feature& newest = history.back();
  out.value.resize(e.dim);
  for (std::size_t d = 0; d < e.dim; ++d) out.value[d] = newest[d] + c.alpha * c.residual[d];
  return out;
}

// Gradients of <grad, prediction> with respect to the expert's parameters.
// History is treated as constant.
inline LesaExpert predict_backward(const LesaExpert& e, const PredictCache& cache, std::span<const double> grad) {
  detail::require(grad.size() == e.dim, "gradient has wrong dimension");
  if (cache.input.size() != e.window * e.dim || cache.residual.size() != e.dim) {
    detail::fail(ErrorCode::kState, "prediction cache does not match the expert");
  }
  LesaExpert g = e.zeros_like();
  const std::size_t in = cache.input.size();
  double dalpha = 0.0;
  for (std::size_t d = 0; d < e.dim; ++d) {
    dalpha += grad[d] * cache.residual[d];
    const double dz = cache.alpha * grad[d];
    if (dz == 0.0) continue;
    g.bias[d] = dz;
    for (std::size_t i = 0; i < in; ++i) g.weight[d * in + i] = dz * cache.input[i];
  }
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, KanScalar>) {
          const auto* mc = std::get_if<KanCache>(&cache.modulator);
          if (mc == nullptr) detail::fail(ErrorCode::kState, "prediction cache holds an MLP cache for a KAN expert");
          g.modulator = kan_backward(m, cache.offsets, *mc, dalpha).params;
        } else {
          const auto* mc = std::get_if<MlpCache>(&cache.modulator);
          if (mc == nullptr) detail::fail(ErrorCode::kState, "prediction cache holds a KAN cache for an MLP expert");
          g.modulator = mlp_backward(m, cache.offsets, *mc, dalpha).params;
        }
      },
      e.modulator);
  return g;
}

// Routes steps to experts by stage boundaries. The usual configuration has
// boundaries (b1, b2) and three experts; an empty boundary list means a
// single unsegmented expert.
struct StagePredictor {
  std::size_t steps = 0;
  std::vector<std::size_t> boundaries;
  std::vector<LesaExpert> experts;

  bool segmented() const noexcept { return !boundaries.empty(); }
  std::size_t dim() const noexcept { return experts.empty() ? 0 : experts.front().dim; }

  bool operator==(const StagePredictor&) const = default;
};

inline void validate(const StagePredictor& sp) {
  detail::require(sp.steps >= 2, "predictor needs at least 2 steps");
  detail::require(sp.experts.size() == sp.boundaries.size() + 1, "predictor needs one expert per stage");
  detail::require(sp.boundaries.empty() || sp.boundaries.size() == 2, "predictor supports 1 or 3 stages");
  if (sp.boundaries.size() == 2) {
    const auto b1 = sp.boundaries[0];
    const auto b2 = sp.boundaries[1];
    detail::require(0 < b1 && b1 < b2 && b2 < sp.steps, "stage boundaries must satisfy 0 < b1 < b2 < S");
  }
  for (const auto& e : sp.experts) {
    validate(e);
    detail::require(e.dim == sp.experts.front().dim, "experts disagree on feature dimension");
    detail::require(modulator_inputs(e.modulator) == sp.steps, "modulator input length must equal S");
  }
}

// 1-based stage id owning `step`; a boundary step belongs to the later stage.
inline std::size_t expert_for_step(const StagePredictor& sp, std::size_t step) {
  detail::require(step < sp.steps, "step ", step, " out of range [0,", sp.steps, ")");
  std::size_t stage = 1;
  for (std::size_t b : sp.boundaries) {
    if (step >= b) ++stage;
  }
  return stage;
}

struct PredictorSpec {
  std::size_t steps = 50;
  std::size_t dim = 16;
  std::optional<std::array<std::size_t, 2>> boundaries = std::array<std::size_t, 2>{16, 41};
  std::array<std::size_t, 3> windows{4, 8, 8};
  ModulatorKind modulator = ModulatorKind::kKan;
  std::size_t components = 16;  // M for KAN, H for MLP
  SplineGrid grid{};
  std::uint64_t seed = 0;
};

inline StagePredictor make_stage_predictor(const PredictorSpec& spec) {
  StagePredictor sp;
  sp.steps = spec.steps;
  std::size_t experts = 1;
  if (spec.boundaries) {
    sp.boundaries = {(*spec.boundaries)[0], (*spec.boundaries)[1]};
    experts = 3;
  }
  for (std::size_t i = 0; i < experts; ++i) {
    // An unsegmented predictor uses the longest configured window.
    const std::size_t window = spec.boundaries ? spec.windows[i] : *std::max_element(spec.windows.begin(), spec.windows.end());
    const std::uint64_t seed = derive_seed(spec.seed, i + 1);
    Modulator m = spec.modulator == ModulatorKind::kKan
                      ? Modulator(kan_init(spec.steps, spec.components, spec.grid, seed))
                      : Modulator(mlp_init(spec.steps, spec.components, seed));
    sp.experts.push_back(make_expert(window, spec.dim, std::move(m)));
  }
  validate(sp);
  return sp;
}

inline Prediction predict_step(const StagePredictor& sp, std::span<const Feature> history, const Schedule& schedule,
                               std::size_t pred_step) {
  return predict(sp.experts[expert_for_step(sp, pred_step) - 1], history, schedule, pred_step);
}

inline constexpr std::array<char, 4> kModelMagic{'L', 'E', 'S', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

// LESM model file: magic, u32 version, u32 S, u32 D, u32 b1, u32 b2, then per
// expert u32 K, u8 kind, u32 (M|H), u32 G, u32 k, and all parameters as f64
// in declaration order. b1 = b2 = 0 marks a single unsegmented expert.
inline std::vector<char> encode_model(const StagePredictor& sp) {
  validate(sp);
  binary::Writer w;
  w.bytes(kModelMagic.data(), kModelMagic.size());
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(sp.steps));
  w.u32(static_cast<std::uint32_t>(sp.dim()));
  w.u32(sp.segmented() ? static_cast<std::uint32_t>(sp.boundaries[0]) : 0);
  w.u32(sp.segmented() ? static_cast<std::uint32_t>(sp.boundaries[1]) : 0);
  for (const auto& e : sp.experts) {
    w.u32(static_cast<std::uint32_t>(e.window));
    w.u8(static_cast<std::uint8_t>(modulator_kind(e.modulator)));
    if (const auto* kan = std::get_if<KanScalar>(&e.modulator)) {
      w.u32(static_cast<std::uint32_t>(kan->components()));
      w.u32(static_cast<std::uint32_t>(kan->grid.intervals));
      w.u32(static_cast<std::uint32_t>(kan->grid.order));
    } else {
      w.u32(static_cast<std::uint32_t>(std::get<MlpScalar>(e.modulator).hidden()));
      w.u32(0);
      w.u32(0);
    }
    for (auto t : e.tensors())
      for (double v : t) w.f64(v);
  }
  return w.buffer();
}

inline StagePredictor decode_model(std::vector<char> bytes) {
  binary::Reader r(std::move(bytes));
  if (r.remaining() < 4 || r.magic() != kModelMagic) detail::fail(ErrorCode::kFormat, "not a model file (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kModelVersion) detail::fail(ErrorCode::kUnsupportedVersion, "unsupported model version ", version);
  StagePredictor sp;
  sp.steps = r.u32();
  const std::size_t dim = r.u32();
  const std::size_t b1 = r.u32();
  const std::size_t b2 = r.u32();
  std::size_t experts = 1;
  if (b1 != 0 || b2 != 0) {
    sp.boundaries = {b1, b2};
    experts = 3;
  }
  detail::require(sp.steps >= 2 && sp.steps < (1u << 20) && dim >= 1 && dim < (1u << 16),
                  "model header has implausible sizes");
  for (std::size_t i = 0; i < experts; ++i) {
    const std::size_t window = r.u32();
    const auto kind = r.u8();
    const std::size_t width = r.u32();
    const std::size_t intervals = r.u32();
    const std::size_t order = r.u32();
    detail::require(window >= 1 && window < 4096 && width >= 1 && width < (1u << 20),
                    "model expert header has implausible sizes");
    Modulator m;
    if (kind == static_cast<std::uint8_t>(ModulatorKind::kKan)) {
      detail::require(intervals >= 1 && intervals < 4096 && order < 64, "model spline grid is implausible");
      KanScalar kan;
      kan.inputs = sp.steps;
      kan.grid.intervals = intervals;
      kan.grid.order = order;
      kan.proj.resize(width * sp.steps);
      kan.weight.resize(width);
      kan.coef.resize(width * kan.grid.num_basis());
      m = std::move(kan);
    } else if (kind == static_cast<std::uint8_t>(ModulatorKind::kMlp)) {
      MlpScalar mlp;
      mlp.inputs = sp.steps;
      mlp.hidden_weight.resize(width * sp.steps);
      mlp.hidden_bias.resize(width);
      mlp.out_weight.resize(width);
      m = std::move(mlp);
    } else {
      detail::fail(ErrorCode::kFormat, "unknown modulator kind ", static_cast<int>(kind));
    }
    LesaExpert e;
    e.window = window;
    e.dim = dim;
    e.weight.resize(dim * window * dim);
    e.bias.resize(dim);
    e.modulator = std::move(m);
    for (auto t : e.tensors())
      for (double& v : t) v = r.f64();
    sp.experts.push_back(std::move(e));
  }
  if (r.remaining() != 0) detail::fail(ErrorCode::kLength, "model file has ", r.remaining(), " trailing bytes");
  validate(sp);
  return sp;
}

inline void write_model(const StagePredictor& sp, const std::filesystem::path& path) {
  binary::write_file(path, encode_model(sp));
}

inline StagePredictor read_model(const std::filesystem::path& path) {
  try {
    return decode_model(binary::read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace lesa
