// Copyright 2026 The lesacache Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <exception>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "lesa/backbone.hpp"
#include "lesa/core.hpp"
#include "lesa/error.hpp"
#include "lesa/forecast.hpp"
#include "lesa/metrics.hpp"
#include "lesa/predictor.hpp"
#include "lesa/schedule.hpp"

namespace lesa {

enum class MethodKind { kFull, kReuse, kTaylor, kLesa };

struct Method {
  MethodKind kind = MethodKind::kFull;
  std::size_t order = 0;
  std::shared_ptr<const StagePredictor> model;
  std::string label;

  static Method full() { return {MethodKind::kFull, 0, nullptr, {}}; }
  static Method reuse() { return {MethodKind::kReuse, 0, nullptr, {}}; }
  static Method taylor(std::size_t m) { return {MethodKind::kTaylor, m, nullptr, {}}; }
  static Method lesa(std::shared_ptr<const StagePredictor> model, std::string label = {}) {
    return {MethodKind::kLesa, 0, std::move(model), std::move(label)};
  }

  std::string name() const {
    if (!label.empty()) return label;
    switch (kind) {
      case MethodKind::kFull: return "full";
      case MethodKind::kReuse: return "reuse";
      case MethodKind::kTaylor: return "taylor:" + std::to_string(order);
      case MethodKind::kLesa:
        if (model && !model->experts.empty() &&
            modulator_kind(model->experts.front().modulator) == ModulatorKind::kMlp) {
          return "lesa-mlp";
        }
        return "lesa";
    }
    return "unknown";
  }
};

// Parses full | reuse | taylor:m | lesa. A lesa method needs its model
// attached before use.
inline Method parse_method(const std::string& text) {
  if (text == "full") return Method::full();
  if (text == "reuse") return Method::reuse();
  if (text == "lesa" || text == "lesa-mlp") return {MethodKind::kLesa, 0, nullptr, text};
  if (text.rfind("taylor:", 0) == 0) {
    const std::string digits = text.substr(7);
    detail::require(digits.size() == 1 && digits[0] >= '0' && digits[0] <= '2', "taylor order must be 0, 1 or 2, got '",
                    digits, "'");
    return Method::taylor(static_cast<std::size_t>(digits[0] - '0'));
  }
  detail::fail(ErrorCode::kValidation, "unknown method '", text, "'");
}

namespace detail {

enum class StateRule { kEuler, kMirror };

// Shared walk over the plan. `full_feature(step, state)` supplies the true
// model output.
// The difference table restarts at every stage boundary in `stage_starts`,
// so forecasts never extrapolate across a change of regime.
template <typename FullFeature>
Trajectory accelerate(const Schedule& schedule, const StepPlan& plan, const Method& method,
                      std::span<const std::size_t> stage_starts, Feature x, StateRule rule,
                      FullFeature&& full_feature) {
  const std::size_t steps = schedule.size();
  require(plan.steps() == steps, "plan has ", plan.steps(), " steps, schedule has ", steps);
  const bool all_full = method.kind == MethodKind::kFull;
  require(all_full || plan.is_full(0), "plan must start with a full step");
  if (method.kind == MethodKind::kLesa) {
    if (!method.model) fail(ErrorCode::kValidation, "method ", method.name(), " has no model loaded");
    require(method.model->steps == steps, "model expects ", method.model->steps, " steps, run has ", steps);
  }
  if (method.kind == MethodKind::kTaylor) require(method.order <= 2, "taylor order must be <= 2");

  Trajectory traj;
  traj.timesteps = schedule.timesteps();
  // Forecasts use the Newton form, which depends only on the recorded step
  // positions, so unit spacing is as good as any.
  DiffTable table = make_diff_table(1, 2);
  std::vector<Feature> history;
  history.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    if (rule == StateRule::kEuler) check_divergence(x, s);
    Feature f;
    if (all_full || plan.is_full(s)) {
      f = full_feature(s, x);
      if (method.kind == MethodKind::kReuse || method.kind == MethodKind::kTaylor) {
        if (std::find(stage_starts.begin(), stage_starts.end(), s) != stage_starts.end()) {
          table = make_diff_table(1, 2);
        }
        table = table_update(std::move(table), f, static_cast<double>(s));
      }
    } else {
      switch (method.kind) {
        case MethodKind::kReuse:
          f = reuse_forecast(table);
          break;
        case MethodKind::kTaylor:
          f = taylor_forecast(table, static_cast<double>(s) - *table.newest_step(), method.order).value;
          break;
        case MethodKind::kLesa:
          f = predict_step(*method.model, history, schedule, s).value;
          break;
        case MethodKind::kFull:
          break;
      }
      if (!all_finite(f)) fail(ErrorCode::kIntegration, "non-finite prediction at step ", s);
    }
    if (rule == StateRule::kMirror) {
      traj.states.push_back(f);
    } else {
      traj.states.push_back(x);
      if (s + 1 < steps) {
        const double dt = traj.timesteps[s + 1] - traj.timesteps[s];
        for (std::size_t d = 0; d < x.size(); ++d) x[d] = x[d] + dt * f[d];
      }
    }
    history.push_back(f);
    traj.features.push_back(std::move(f));
  }
  return traj;
}

}  // namespace detail

// Runs the sampler for one seed, substituting the method's forecast for the
// model output at every Predict step. The Full method ignores the plan.
inline Trajectory run_accelerated(const Backbone& backbone, const StepPlan& plan, const Method& method,
                                  std::uint64_t seed, std::span<const std::size_t> stage_starts = {}) {
  const Schedule schedule(plan.steps());
  Trajectory traj = std::visit(
      [&](const auto& b) -> Trajectory {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, GmmBackbone>) {
          validate(b.spec);
          const auto ts = schedule.timesteps();
          return detail::accelerate(schedule, plan, method, stage_starts, sample_init(seed, b.spec.dim), detail::StateRule::kEuler,
                                    [&](std::size_t s, const Feature& x) { return gmm_velocity(b.spec, x, ts[s]); });
        } else if constexpr (std::is_same_v<T, SynthBackbone>) {
          SynthParams p = b.params;
          p.seed = seed;
          detail::require(p.steps == schedule.size(), "synth steps do not match plan");
          const Trajectory gt = synth_trajectory(p);
          return detail::accelerate(schedule, plan, method, stage_starts, Feature(p.dim, 0.0), detail::StateRule::kMirror,
                                    [&](std::size_t s, const Feature&) { return gt.features[s]; });
        } else {
          detail::require(b.features.size() == schedule.size(), "stream length does not match plan");
          return detail::accelerate(schedule, plan, method, stage_starts, Feature(b.features.front().size(), 0.0),
                                    detail::StateRule::kEuler,
                                    [&](std::size_t s, const Feature&) { return b.features[s]; });
        }
      },
      backbone);
  traj.seed = seed;
  traj.backbone_tag = std::visit(
      [](const auto& b) -> std::string {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, GmmBackbone>) return "gmm";
        else if constexpr (std::is_same_v<T, SynthBackbone>) return "synth";
        else return "stream";
      },
      backbone);
  return traj;
}

inline double endpoint_rel_error(const Trajectory& test, const Trajectory& ref) {
  const auto& a = test.states.back();
  const auto& b = ref.states.back();
  detail::require(a.size() == b.size(), "endpoint dimensions differ");
  Feature diff(a.size());
  for (std::size_t d = 0; d < a.size(); ++d) diff[d] = a[d] - b[d];
  const double denom = l2_norm(b);
  return denom > 0.0 ? l2_norm(diff) / denom : l2_norm(diff);
}

// Mean absolute feature error over the steps the plan predicts (all steps
// when `plan` is null).
inline double feature_mae(const Trajectory& test, const Trajectory& ref, const StepPlan* plan = nullptr) {
  detail::require(test.steps() == ref.steps() && test.feature_dim() == ref.feature_dim(),
                  "trajectories differ in shape");
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t s = 0; s < test.steps(); ++s) {
    if (plan != nullptr && plan->is_full(s)) continue;
    for (std::size_t d = 0; d < test.feature_dim(); ++d) total += std::abs(test.features[s][d] - ref.features[s][d]);
    count += test.feature_dim();
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

struct ReportRow {
  std::string method;
  std::size_t interval = 1;
  std::size_t full_steps = 0;
  double speedup = 1.0;
  double endpoint_rel_err = 0.0;
  double feature_mae = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;

  bool operator==(const ReportRow&) const = default;
};

struct Report {
  std::vector<ReportRow> rows;
  bool operator==(const Report&) const = default;
};

inline constexpr const char* kReportHeader = "method,N,full_steps,speedup,endpoint_rel_err,feature_mae,psnr_db,ssim";

inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// Rounds to the 9 significant digits used on output, so reports built from
// rounded values survive an emit/parse cycle unchanged.
inline double round_reported(double v) { return std::stod(format_number(v)); }

inline std::string emit_csv(const Report& report) {
  std::ostringstream os;
  os << kReportHeader << '\n';
  for (const auto& r : report.rows) {
    os << r.method << ',' << r.interval << ',' << r.full_steps << ',' << format_number(r.speedup) << ','
       << format_number(r.endpoint_rel_err) << ',' << format_number(r.feature_mae) << ',' << format_number(r.psnr_db)
       << ',' << format_number(r.ssim) << '\n';
  }
  return os.str();
}

inline Report parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  detail::require(static_cast<bool>(std::getline(in, line)) && line == kReportHeader, "report CSV has a bad header");
  Report report;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    detail::require(cells.size() == 8, "report CSV row has ", cells.size(), " cells, expected 8");
    ReportRow r;
    r.method = cells[0];
    try {
      r.interval = std::stoull(cells[1]);
      r.full_steps = std::stoull(cells[2]);
      r.speedup = std::stod(cells[3]);
      r.endpoint_rel_err = std::stod(cells[4]);
      r.feature_mae = std::stod(cells[5]);
      r.psnr_db = std::stod(cells[6]);
      r.ssim = std::stod(cells[7]);
    } catch (const std::logic_error&) {
      detail::fail(ErrorCode::kFormat, "report CSV row '", line, "' has a non-numeric cell");
    }
    report.rows.push_back(std::move(r));
  }
  return report;
}

struct CompareConfig {
  std::size_t steps = 50;
  std::size_t b1 = 16;
  std::size_t b2 = 41;
  double raster_radius = 6.0;
  std::size_t jobs = 1;
};

namespace detail {

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results must be written
// to per-index slots so the reduction order stays fixed.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  const std::size_t workers = std::min(jobs, n);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

// One report row per (method, N) over the given seeds, measured against the
// full-compute reference run of each seed.
inline Report compare(const std::vector<Method>& methods, const std::vector<std::size_t>& intervals,
                      const std::vector<std::uint64_t>& seeds, const Backbone& backbone, const CompareConfig& cfg = {}) {
  detail::require(!seeds.empty(), "compare needs at least one seed");
  for (const auto& m : methods) {
    if (m.kind == MethodKind::kLesa && !m.model) {
      detail::fail(ErrorCode::kValidation, "method ", m.name(), " has no model loaded");
    }
  }
  const Schedule schedule(cfg.steps);
  const std::array<std::size_t, 2> stages{cfg.b1, cfg.b2};
  std::vector<Trajectory> refs(seeds.size());
  detail::parallel_for(seeds.size(), cfg.jobs,
                       [&](std::size_t i) { refs[i] = record_full(backbone, schedule, seeds[i]); });
  std::vector<Feature> ref_endpoints;
  for (const auto& r : refs) ref_endpoints.push_back(r.states.back());
  const Grid ref_grid = rasterize(ref_endpoints, cfg.raster_radius);

  Report report;
  for (const auto& method : methods) {
    for (std::size_t n : intervals) {
      const StepPlan plan = method.kind == MethodKind::kFull ? all_full_plan(cfg.steps)
                                                             : build_plan({cfg.steps, n, cfg.b1, cfg.b2});
      std::vector<Trajectory> runs(seeds.size());
      detail::parallel_for(seeds.size(), cfg.jobs,
                           [&](std::size_t i) { runs[i] = run_accelerated(backbone, plan, method, seeds[i], stages); });
      ReportRow row;
      row.method = method.name();
      row.interval = n;
      row.full_steps = plan.full_count();
      row.speedup = flop_account(plan).speedup;
      std::vector<Feature> endpoints;
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        row.endpoint_rel_err += endpoint_rel_error(runs[i], refs[i]) / static_cast<double>(seeds.size());
        row.feature_mae += feature_mae(runs[i], refs[i], &plan) / static_cast<double>(seeds.size());
        endpoints.push_back(runs[i].states.back());
      }
      const Grid grid = rasterize(endpoints, cfg.raster_radius);
      row.psnr_db = round_reported(psnr(grid, ref_grid));
      row.ssim = round_reported(ssim(grid, ref_grid));
      row.speedup = round_reported(row.speedup);
      row.endpoint_rel_err = round_reported(row.endpoint_rel_err);
      row.feature_mae = round_reported(row.feature_mae);
      report.rows.push_back(std::move(row));
    }
  }
  return report;
}

}  // namespace lesa
