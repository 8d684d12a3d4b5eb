// Copyright 2026 The lesacache Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "lesa/core.hpp"
#include "lesa/error.hpp"
#include "lesa/rng.hpp"

namespace lesa {

// Cosine similarity of each pair of adjacent features.
inline std::vector<double> cosine_curve(std::span<const Feature> features) {
  detail::require(features.size() >= 2, "cosine curve needs at least 2 features");
  std::vector<double> norms(features.size());
  for (std::size_t s = 0; s < features.size(); ++s) {
    norms[s] = l2_norm(features[s]);
    if (norms[s] == 0.0) detail::fail(ErrorCode::kNumeric, "zero-norm feature at index ", s);
  }
  std::vector<double> out(features.size() - 1);
  for (std::size_t s = 0; s + 1 < features.size(); ++s) {
    const double c = dot(features[s], features[s + 1]) / (norms[s] * norms[s + 1]);
    out[s] = std::clamp(c, -1.0, 1.0);
  }
  return out;
}

inline std::vector<double> cosine_curve(const Trajectory& traj) { return cosine_curve(traj.features); }

struct PcaResult {
  std::vector<std::array<double, 2>> points;
  std::array<Feature, 2> components;
  std::array<double, 2> variances{};
  double total_variance = 0.0;
};

namespace detail {

inline void fix_sign(Feature& v) {
  for (double x : v) {
    if (std::abs(x) > 1e-12) {
      if (x < 0.0)
        for (auto& y : v) y = -y;
      return;
    }
  }
}

// Leading eigenvector of a symmetric PSD matrix by power iteration.
inline Feature power_iteration(const std::vector<double>& cov, std::size_t dim, Feature v, double scale) {
  auto normalize = [](Feature& x) {
    const double n = l2_norm(x);
    for (auto& y : x) y /= n;
    return n;
  };
  normalize(v);
  for (int iter = 0; iter < 1000; ++iter) {
    Feature next(dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) next[i] += cov[i * dim + j] * v[j];
    if (l2_norm(next) <= 1e-14 * scale) return v;  // null space: any unit vector will do
    normalize(next);
    double delta = 0.0;
    for (std::size_t i = 0; i < dim; ++i) delta = std::max(delta, std::abs(next[i] - v[i]));
    v = std::move(next);
    if (delta < 1e-9) break;
  }
  return v;
}

}  // namespace detail

// Projects features onto their top two principal directions.
inline PcaResult pca_project(std::span<const Feature> features) {
  detail::require(features.size() >= 3, "PCA needs at least 3 points");
  const std::size_t n = features.size();
  const std::size_t dim = features.front().size();
  Feature mean(dim, 0.0);
  for (const auto& f : features)
    for (std::size_t d = 0; d < dim; ++d) mean[d] += f[d] / static_cast<double>(n);
  std::vector<Feature> centered(features.begin(), features.end());
  for (auto& f : centered)
    for (std::size_t d = 0; d < dim; ++d) f[d] -= mean[d];
  std::vector<double> cov(dim * dim, 0.0);
  for (const auto& f : centered)
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) cov[i * dim + j] += f[i] * f[j] / static_cast<double>(n);
  double trace = 0.0;
  for (std::size_t i = 0; i < dim; ++i) trace += cov[i * dim + i];
  if (trace <= 0.0) detail::fail(ErrorCode::kNumeric, "PCA on rank-0 data");

  PcaResult out;
  out.total_variance = trace;
  Rng rng(0x9CA);
  for (std::size_t c = 0; c < 2; ++c) {
    Feature start = rng.normal_vector(dim);
    if (c == 1) {
      const double proj = dot(start, out.components[0]);
      for (std::size_t d = 0; d < dim; ++d) start[d] -= proj * out.components[0][d];
    }
    Feature v = dim >= 1 ? detail::power_iteration(cov, dim, std::move(start), trace) : Feature{};
    detail::fix_sign(v);
    double lambda = 0.0;
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) lambda += v[i] * cov[i * dim + j] * v[j];
    out.variances[c] = lambda;
    for (std::size_t i = 0; i < dim; ++i)
      for (std::size_t j = 0; j < dim; ++j) cov[i * dim + j] -= lambda * v[i] * v[j];
    out.components[c] = std::move(v);
  }
  out.points.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    out.points[s] = {dot(centered[s], out.components[0]), dot(centered[s], out.components[1])};
  }
  return out;
}

inline PcaResult pca_project(const Trajectory& traj) { return pca_project(traj.features); }

struct Grid {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
  bool operator==(const Grid&) const = default;
};

// Normalized 2D histogram of the first two coordinates over [-R, R]^2.
inline Grid rasterize(std::span<const Feature> points, double radius = 6.0, std::size_t size = 64) {
  detail::require(!points.empty(), "rasterize needs at least one point");
  detail::require(radius > 0.0 && size >= 1, "rasterize needs R > 0 and a non-empty grid");
  Grid g{size, size, std::vector<double>(size * size, 0.0)};
  const double cell = 2.0 * radius / static_cast<double>(size);
  for (const auto& p : points) {
    detail::require(p.size() >= 2, "rasterize needs points of dimension >= 2");
    const double cx = std::floor((p[0] + radius) / cell);
    const double cy = std::floor((p[1] + radius) / cell);
    if (cx < 0.0 || cy < 0.0 || cx >= static_cast<double>(size) || cy >= static_cast<double>(size)) continue;
    g.values[static_cast<std::size_t>(cy) * size + static_cast<std::size_t>(cx)] += 1.0;
  }
  const double peak = *std::max_element(g.values.begin(), g.values.end());
  if (peak > 0.0)
    for (auto& v : g.values) v /= peak;
  return g;
}

inline double psnr(const Grid& a, const Grid& b) {
  detail::require(a.rows == b.rows && a.cols == b.cols, "PSNR on grids of different shapes");
  double mse = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.values.size());
  if (mse < 1e-10) return 100.0;
  return 10.0 * std::log10(1.0 / mse);
}

// Mean SSIM over all valid 11x11 Gaussian windows (sigma 1.5), data range 1.
inline double ssim(const Grid& a, const Grid& b) {
  detail::require(a.rows == b.rows && a.cols == b.cols, "SSIM on grids of different shapes");
  constexpr std::size_t kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  detail::require(a.rows >= kWin && a.cols >= kWin, "SSIM needs grids of at least 11x11");
  std::array<double, kWin * kWin> w{};
  double wsum = 0.0;
  for (std::size_t i = 0; i < kWin; ++i)
    for (std::size_t j = 0; j < kWin; ++j) {
      const double di = static_cast<double>(i) - 5.0;
      const double dj = static_cast<double>(j) - 5.0;
      w[i * kWin + j] = std::exp(-(di * di + dj * dj) / (2.0 * kSigma * kSigma));
      wsum += w[i * kWin + j];
    }
  for (auto& x : w) x /= wsum;

  double total = 0.0;
  std::size_t windows = 0;
  for (std::size_t r = 0; r + kWin <= a.rows; ++r) {
    for (std::size_t c = 0; c + kWin <= a.cols; ++c) {
      double mx = 0.0, my = 0.0;
      for (std::size_t i = 0; i < kWin; ++i)
        for (std::size_t j = 0; j < kWin; ++j) {
          mx += w[i * kWin + j] * a.at(r + i, c + j);
          my += w[i * kWin + j] * b.at(r + i, c + j);
        }
      double vx = 0.0, vy = 0.0, cxy = 0.0;
      for (std::size_t i = 0; i < kWin; ++i)
        for (std::size_t j = 0; j < kWin; ++j) {
          const double dx = a.at(r + i, c + j) - mx;
          const double dy = b.at(r + i, c + j) - my;
          vx += w[i * kWin + j] * dx * dx;
          vy += w[i * kWin + j] * dy * dy;
          cxy += w[i * kWin + j] * dx * dy;
        }
      total += ((2.0 * mx * my + kC1) * (2.0 * cxy + kC2)) / ((mx * mx + my * my + kC1) * (vx + vy + kC2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

}  // namespace lesa
