// Copyright 2026 The lesacache Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

// Batch command-line front end. `run_cli` is kept separate from `main` so the
// test suite can drive it with captured streams.

#pragma once

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lesa/lesa.hpp"

namespace lesa::cli {

// Inclusive seed range `A..B`, or a comma-separated list of seeds.
inline std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  auto to_u64 = [&](std::string_view s) {
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    detail::require(!s.empty() && ec == std::errc() && ptr == s.data() + s.size(), "bad seed '", std::string(s),
                    "' in '", text, "'");
    return v;
  };
  std::vector<std::uint64_t> seeds;
  if (auto dots = text.find(".."); dots != std::string::npos) {
    const std::uint64_t a = to_u64(std::string_view(text).substr(0, dots));
    const std::uint64_t b = to_u64(std::string_view(text).substr(dots + 2));
    detail::require(a <= b, "seed range '", text, "' is empty");
    for (std::uint64_t s = a; s <= b; ++s) seeds.push_back(s);
    return seeds;
  }
  std::istringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) seeds.push_back(to_u64(tok));
  detail::require(!seeds.empty(), "no seeds given");
  return seeds;
}

inline std::vector<std::size_t> parse_sizes(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  std::istringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    detail::require(!tok.empty() && ec == std::errc() && ptr == tok.data() + tok.size(), "bad ", what, " entry '",
                    tok, "'");
    out.push_back(v);
  }
  detail::require(!out.empty(), "empty ", what);
  return out;
}

inline std::array<std::size_t, 2> parse_stages(const std::string& text) {
  const auto v = parse_sizes(text, "stage list");
  detail::require(v.size() == 2, "--stages expects b1,b2");
  return {v[0], v[1]};
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    if (!tok.empty()) out.push_back(tok);
  }
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  binary::write_file(path, std::vector<char>(text.begin(), text.end()));
}

// Trajectory files of a directory in lexicographic order.
inline std::vector<Trajectory> load_dataset(const std::filesystem::path& dir) {
  std::error_code ec;
  detail::require(std::filesystem::is_directory(dir, ec), "data directory ", dir.string(), " does not exist");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".lesa") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  detail::require(!files.empty(), "no .lesa files in ", dir.string());
  std::vector<Trajectory> data;
  for (const auto& f : files) data.push_back(read_trajectory(f));
  return data;
}

struct Options {
  // record
  std::string backbone = "gmm";
  std::string seeds = "0..0";
  std::size_t steps = 50;
  std::size_t dim = 8;
  std::string out;
  std::string config;
  // train
  std::string data;
  std::string stages = "16,41";
  std::string windows = "4,8,8";
  std::string modulator = "kan";
  std::size_t components = 16;
  std::size_t grid = 8;
  std::size_t interval = 10;
  TrainConfig train{};
  std::string log;
  // run / report
  std::string model;
  std::string mlp_model;
  std::string method = "full";
  std::uint64_t seed = 0;
  std::string methods = "full,reuse,taylor:1,taylor:2";
  std::string ns = "5,7,10";
  std::size_t jobs = 1;
  bool header = false;
  // eval
  std::string ref;
  std::string test;
  std::string csv;
};

inline BackboneConfig backbone_from(const Options& o) {
  return o.config.empty() ? BackboneConfig{} : load_backbone_config(o.config);
}

inline int cmd_record(const Options& o, const CLI::App& app, std::ostream& out) {
  BackboneConfig cfg = backbone_from(o);
  // Explicit flags override the config file.
  if (o.config.empty() || app.count("--backbone") > 0) {
    detail::require(o.backbone == "gmm" || o.backbone == "synth", "--backbone must be gmm or synth");
    cfg.kind = o.backbone == "gmm" ? BackboneKind::kGmm : BackboneKind::kSynth;
  }
  if (o.config.empty() || app.count("--steps") > 0) cfg.steps = o.steps;
  if (o.config.empty() || app.count("--dim") > 0) cfg.dim = o.dim;
  const auto seeds = parse_seeds(o.seeds);
  std::filesystem::create_directories(o.out);
  prepare_dataset(cfg.make(), seeds, Schedule(cfg.steps), o.out);
  out << "recorded " << seeds.size() << " trajectories to " << o.out << '\n';
  return 0;
}

inline int cmd_train(const Options& o, std::ostream& out) {
  const auto data = load_dataset(o.data);
  PredictorSpec spec;
  spec.steps = data.front().steps();
  spec.dim = data.front().feature_dim();
  if (o.stages == "none") {
    spec.boundaries.reset();
  } else {
    spec.boundaries = parse_stages(o.stages);
  }
  const auto w = parse_sizes(o.windows, "window list");
  detail::require(w.size() == 3, "--windows expects k1,k2,k3");
  spec.windows = {w[0], w[1], w[2]};
  detail::require(o.modulator == "kan" || o.modulator == "mlp", "--modulator must be kan or mlp");
  spec.modulator = o.modulator == "kan" ? ModulatorKind::kKan : ModulatorKind::kMlp;
  spec.components = o.components;
  spec.grid.intervals = o.grid;
  spec.seed = o.train.seed;
  validate(o.train);
  StagePredictor sp = make_stage_predictor(spec);

  // The plan's forced boundaries follow the predictor when segmented and the
  // default stage split otherwise.
  const auto b = spec.boundaries.value_or(std::array<std::size_t, 2>{16, 41});
  const StepPlan plan = build_plan({spec.steps, o.interval, b[0], b[1]});

  std::ostringstream log;
  log << "phase,epoch,trajectory,mean_l1\n";
  const TrainLogger logger = [&](const TrainLogRow& r) {
    log << phase_name(r.phase) << ',' << r.epoch << ',' << r.trajectory << ',' << format_number(r.mean_l1) << '\n';
  };
  const auto gt = train_gt_guided(sp, data, plan, o.train, logger);
  const auto cl = train_closed_loop(sp, data, plan, o.train, logger);
  write_model(sp, o.out);
  if (!o.log.empty()) write_text(o.log, log.str());
  out << "trained on " << data.size() << " trajectories";
  if (!gt.empty()) out << ", gt loss " << format_number(gt.back());
  if (!cl.empty()) out << ", cl loss " << format_number(cl.back());
  out << '\n';
  return 0;
}

inline Method resolve_method(const std::string& text, const std::string& model, const std::string& mlp_model) {
  Method m = parse_method(text);
  if (m.kind != MethodKind::kLesa) return m;
  const std::string& path = text == "lesa-mlp" && !mlp_model.empty() ? mlp_model : model;
  detail::require(!path.empty(), "method ", text, " needs a model file");
  return Method::lesa(std::make_shared<const StagePredictor>(read_model(path)), text);
}

inline int cmd_run(const Options& o, std::ostream& out) {
  const BackboneConfig cfg = backbone_from(o);
  const Method method = resolve_method(o.method, o.model, o.model);
  const auto b = parse_stages(o.stages);
  if (method.model) {
    detail::require(method.model->steps == cfg.steps, "model has ", method.model->steps, " steps, backbone has ",
                    cfg.steps);
    detail::require(method.model->experts.front().dim == cfg.dim, "model dim ", method.model->experts.front().dim,
                    " does not match backbone dim ", cfg.dim);
  }
  const StepPlan plan = build_plan({cfg.steps, o.interval, b[0], b[1]});
  const Trajectory traj = run_accelerated(cfg.make(), plan, method, o.seed, b);
  write_trajectory(traj, o.out);
  out << "wrote " << o.out << " (" << plan.full_count() << " full steps of " << plan.steps() << ")\n";
  return 0;
}

inline int cmd_eval(const Options& o, std::ostream& out) {
  const Trajectory ref = read_trajectory(o.ref);
  const Trajectory test = read_trajectory(o.test);
  std::ostringstream csv;
  csv << "steps,dim,endpoint_rel_err,feature_mae\n"
      << ref.steps() << ',' << ref.feature_dim() << ',' << format_number(endpoint_rel_error(test, ref)) << ','
      << format_number(feature_mae(test, ref)) << '\n';
  if (o.csv.empty()) {
    out << csv.str();
  } else {
    write_text(o.csv, csv.str());
  }
  return 0;
}

inline int cmd_flops(const Options& o, std::ostream& out) {
  const auto b = parse_stages(o.stages);
  const StepPlan plan = build_plan({o.steps, o.interval, b[0], b[1]});
  const FlopAccount acc = flop_account(plan);
  if (o.header) out << "steps,N,b1,b2,full,predict,speedup\n";
  out << o.steps << ',' << o.interval << ',' << b[0] << ',' << b[1] << ',' << plan.full_count() << ','
      << plan.predict_count() << ',' << format_number(acc.speedup) << '\n';
  return 0;
}

inline int cmd_report(const Options& o, std::ostream& out) {
  const BackboneConfig bc = backbone_from(o);
  std::vector<Method> methods;
  for (const auto& name : split_list(o.methods)) methods.push_back(resolve_method(name, o.model, o.mlp_model));
  detail::require(!methods.empty(), "--methods is empty");
  const auto b = parse_stages(o.stages);
  CompareConfig cc;
  cc.steps = bc.steps;
  cc.b1 = b[0];
  cc.b2 = b[1];
  cc.jobs = o.jobs;
  const Report report = compare(methods, parse_sizes(o.ns, "interval list"), parse_seeds(o.seeds), bc.make(), cc);
  if (o.out.empty()) {
    out << emit_csv(report);
  } else {
    write_text(o.out, emit_csv(report));
  }
  return 0;
}

inline void print_error(std::ostream& err, std::string_view code, std::string_view message) {
  err << "error: " << code << ": " << message << '\n';
}

// Exit codes: 0 success, 1 validation or usage error, 2 runtime error.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Stage-aware learned feature forecasting for flow samplers", "lesa"};
  app.require_subcommand(1);
  app.allow_extras(false);
  Options o;

  auto* record = app.add_subcommand("record", "Record full-compute trajectories");
  record->add_option("--backbone", o.backbone, "Backbone kind: gmm or synth")->capture_default_str();
  record->add_option("--seeds", o.seeds, "Seed range A..B (inclusive) or list")->capture_default_str();
  record->add_option("--steps", o.steps, "Number of sampler steps S")->capture_default_str();
  record->add_option("--dim", o.dim, "Feature dimension D")->capture_default_str();
  record->add_option("--out", o.out, "Output directory")->required();
  record->add_option("--config", o.config, "Backbone config file (key=value)");

  auto* train = app.add_subcommand("train", "Train a stage predictor (GT-guided then closed-loop)");
  train->add_option("--data", o.data, "Directory of .lesa trajectories")->required();
  train->add_option("--stages", o.stages, "Stage boundaries b1,b2, or 'none' for one expert")->capture_default_str();
  train->add_option("--windows", o.windows, "History windows k1,k2,k3")->capture_default_str();
  train->add_option("--modulator", o.modulator, "Modulator: kan or mlp")->capture_default_str();
  train->add_option("--m-components", o.components, "KAN components M or MLP hidden width")->capture_default_str();
  train->add_option("--grid", o.grid, "Spline grid intervals G")->capture_default_str();
  train->add_option("--n", o.interval, "Full-compute interval N")->capture_default_str();
  train->add_option("--epochs-gt", o.train.epochs_gt, "GT-guided epochs")->capture_default_str();
  train->add_option("--epochs-cl", o.train.epochs_cl, "Closed-loop epochs")->capture_default_str();
  train->add_option("--lr", o.train.lr, "Learning rate")->capture_default_str();
  train->add_option("--wd", o.train.weight_decay, "Decoupled weight decay")->capture_default_str();
  train->add_option("--clip", o.train.clip_norm, "Global gradient clip norm")->capture_default_str();
  train->add_option("--seed", o.train.seed, "Initialization seed")->capture_default_str();
  train->add_option("--out", o.out, "Output model file")->required();
  train->add_option("--log", o.log, "Training log CSV (phase,epoch,trajectory,mean_l1)");

  auto* run = app.add_subcommand("run", "Run the accelerated sampler for one seed");
  run->add_option("--model", o.model, "Model file (lesa methods)");
  run->add_option("--method", o.method, "full | reuse | taylor:m | lesa")->capture_default_str();
  run->add_option("--n", o.interval, "Full-compute interval N")->capture_default_str();
  run->add_option("--seed", o.seed, "Sampler seed")->capture_default_str();
  run->add_option("--stages", o.stages, "Stage boundaries b1,b2")->capture_default_str();
  run->add_option("--backbone-config", o.config, "Backbone config file (default: gmm, D=8, S=50)");
  run->add_option("--out", o.out, "Output trajectory file")->required();

  auto* eval = app.add_subcommand("eval", "Compare a trajectory against a reference");
  eval->add_option("--ref", o.ref, "Reference trajectory")->required();
  eval->add_option("--test", o.test, "Test trajectory")->required();
  eval->add_option("--csv", o.csv, "Output CSV (default: stdout)");

  auto* flops = app.add_subcommand("flops", "FLOP accounting of a step plan");
  flops->add_option("--steps", o.steps, "Number of sampler steps S")->capture_default_str();
  flops->add_option("--n", o.interval, "Full-compute interval N")->capture_default_str();
  flops->add_option("--stages", o.stages, "Stage boundaries b1,b2")->capture_default_str();
  flops->add_flag("--header", o.header, "Print the CSV header line first");

  auto* report = app.add_subcommand("report", "Method comparison report");
  report->add_option("--methods", o.methods, "Comma-separated methods")->capture_default_str();
  report->add_option("--ns", o.ns, "Comma-separated intervals")->capture_default_str();
  report->add_option("--seeds", o.seeds, "Seed range A..B (inclusive) or list")->capture_default_str();
  report->add_option("--out", o.out, "Output CSV (default: stdout)");
  report->add_option("--backbone-config", o.config, "Backbone config file (default: gmm, D=8, S=50)");
  report->add_option("--model", o.model, "Model file for lesa");
  report->add_option("--mlp-model", o.mlp_model, "Model file for lesa-mlp");
  report->add_option("--stages", o.stages, "Stage boundaries b1,b2")->capture_default_str();
  report->add_option("--jobs", o.jobs, "Parallel seeds")->capture_default_str()->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what());
    err << app.help();
    return 1;
  }

  try {
    if (record->parsed()) return cmd_record(o, *record, out);
    if (train->parsed()) return cmd_train(o, out);
    if (run->parsed()) return cmd_run(o, out);
    if (eval->parsed()) return cmd_eval(o, out);
    if (flops->parsed()) return cmd_flops(o, out);
    if (report->parsed()) return cmd_report(o, out);
  } catch (const Error& e) {
    print_error(err, error_code_name(e.code()), e.what());
    return e.code() == ErrorCode::kValidation ? 1 : 2;
  } catch (const std::exception& e) {
    print_error(err, "runtime", e.what());
    return 2;
  }
  return 1;
}

}  // namespace lesa::cli
