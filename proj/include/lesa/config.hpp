// Copyright 2026 The lesacache Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "lesa/backbone.hpp"
#include "lesa/error.hpp"
#include "lesa/io.hpp"

namespace lesa {

enum class BackboneKind { kGmm, kSynth };

struct BackboneConfig {
  BackboneKind kind = BackboneKind::kGmm;
  std::size_t dim = 8;
  std::size_t steps = 50;
  std::uint64_t seed = 0;
  std::size_t gmm_components = 4;
  double gmm_radius = 4.0;
  double gmm_sigma = 0.5;
  SynthParams synth{};

  Backbone make() const {
    if (kind == BackboneKind::kGmm) return GmmBackbone{make_gmm(dim, gmm_components, gmm_radius, gmm_sigma, seed)};
    SynthParams p = synth;
    p.dim = dim;
    p.steps = steps;
    p.structure_seed = seed;
    validate(p);
    return SynthBackbone{p};
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  if constexpr (std::is_floating_point_v<T>) {
    std::size_t used = 0;
    try {
      value = static_cast<T>(std::stod(text, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    require(used == text.size() && !text.empty(), "config key ", key, ": not a number: '", text, "'");
  } else {
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    require(ec == std::errc() && ptr == text.data() + text.size(), "config key ", key,
            ": not an integer: '", text, "'");
  }
  return value;
}

}  // namespace detail

// Parses `key=value` lines; '#' starts a comment. Unknown keys are rejected.
inline BackboneConfig parse_backbone_config(const std::string& text, BackboneConfig cfg = {}) {
  static const std::set<std::string> kKeys = {
      "backbone",   "dim",        "steps",      "seed",        "gmm.components", "gmm.radius",
      "gmm.sigma",  "synth.b1",   "synth.b2",   "synth.rho1",  "synth.rho2",     "synth.rho3",
      "synth.c",    "synth.eps",  "synth.omega"};
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    detail::require(eq != std::string::npos, "config line ", lineno, ": expected key=value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    detail::require(kKeys.contains(key), "config line ", lineno, ": unknown key '", key, "'");
    using detail::parse_number;
    if (key == "backbone") {
      detail::require(value == "gmm" || value == "synth", "backbone must be gmm or synth, got '", value, "'");
      cfg.kind = value == "gmm" ? BackboneKind::kGmm : BackboneKind::kSynth;
    } else if (key == "dim") {
      cfg.dim = parse_number<std::size_t>(key, value);
    } else if (key == "steps") {
      cfg.steps = parse_number<std::size_t>(key, value);
    } else if (key == "seed") {
      cfg.seed = parse_number<std::uint64_t>(key, value);
    } else if (key == "gmm.components") {
      cfg.gmm_components = parse_number<std::size_t>(key, value);
    } else if (key == "gmm.radius") {
      cfg.gmm_radius = parse_number<double>(key, value);
    } else if (key == "gmm.sigma") {
      cfg.gmm_sigma = parse_number<double>(key, value);
    } else if (key == "synth.b1") {
      cfg.synth.b1 = parse_number<std::size_t>(key, value);
    } else if (key == "synth.b2") {
      cfg.synth.b2 = parse_number<std::size_t>(key, value);
    } else if (key == "synth.rho1") {
      cfg.synth.rho[0] = parse_number<double>(key, value);
    } else if (key == "synth.rho2") {
      cfg.synth.rho[1] = parse_number<double>(key, value);
    } else if (key == "synth.rho3") {
      cfg.synth.rho[2] = parse_number<double>(key, value);
    } else if (key == "synth.c") {
      cfg.synth.drift = parse_number<double>(key, value);
    } else if (key == "synth.eps") {
      cfg.synth.osc_amplitude = parse_number<double>(key, value);
    } else if (key == "synth.omega") {
      cfg.synth.osc_frequency = parse_number<double>(key, value);
    }
  }
  detail::require(cfg.dim >= 1, "dim must be >= 1");
  detail::require(cfg.steps >= 2, "steps must be >= 2");
  return cfg;
}

inline BackboneConfig load_backbone_config(const std::filesystem::path& path, BackboneConfig defaults = {}) {
  const auto bytes = binary::read_file(path);
  return parse_backbone_config(std::string(bytes.begin(), bytes.end()), defaults);
}

}  // namespace lesa
