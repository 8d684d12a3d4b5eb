// Copyright 2026 The lesacache Authors. All Rights Reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "lesa/error.hpp"

namespace lesa {

// Clamped uniform B-spline grid: G interior intervals on [lo, hi], order k,
// end knots repeated so the knot vector has G + 2k + 1 entries.
struct SplineGrid {
  double lo = -1.25;
  double hi = 1.25;
  std::size_t intervals = 8;
  std::size_t order = 3;

  std::size_t num_basis() const noexcept { return intervals + order; }
  std::size_t num_knots() const noexcept { return intervals + 2 * order + 1; }

  double clamp(double z) const noexcept { return std::clamp(z, lo, hi); }

  std::vector<double> knots() const {
    std::vector<double> t(num_knots());
    const double h = (hi - lo) / static_cast<double>(intervals);
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (i <= order) {
        t[i] = lo;
      } else if (i >= intervals + order) {
        t[i] = hi;
      } else {
        t[i] = lo + static_cast<double>(i - order) * h;
      }
    }
    return t;
  }

  bool operator==(const SplineGrid&) const = default;
};

inline void validate(const SplineGrid& grid) {
  detail::require(grid.lo < grid.hi, "spline range must satisfy lo < hi");
  detail::require(grid.intervals >= 1, "spline grid needs at least one interval");
}

namespace detail {

// Cox-de Boor: basis values of every order 0..max_order at z (already in
// range). Row p holds num_knots - p - 1 values.
inline std::vector<std::vector<double>> cox_de_boor(const SplineGrid& grid, const std::vector<double>& t,
                                                    double z, std::size_t max_order) {
  const std::size_t nk = t.size();
  std::vector<std::vector<double>> rows(max_order + 1);
  rows[0].assign(nk - 1, 0.0);
  // Half-open intervals; the right end point belongs to the last non-empty one.
  std::size_t span = grid.intervals + grid.order - 1;
  if (z < grid.hi) {
    span = static_cast<std::size_t>(std::upper_bound(t.begin(), t.end(), z) - t.begin()) - 1;
  }
  rows[0][span] = 1.0;
  for (std::size_t p = 1; p <= max_order; ++p) {
    const auto& prev = rows[p - 1];
    auto& cur = rows[p];
    cur.assign(nk - p - 1, 0.0);
    for (std::size_t j = 0; j < cur.size(); ++j) {
      double v = 0.0;
      const double left = t[j + p] - t[j];
      if (left > 0.0 && prev[j] != 0.0) v += (z - t[j]) / left * prev[j];
      const double right = t[j + p + 1] - t[j + 1];
      if (right > 0.0 && prev[j + 1] != 0.0) v += (t[j + p + 1] - z) / right * prev[j + 1];
      cur[j] = v;
    }
  }
  return rows;
}

}  // namespace detail

// Values of the G+k basis functions at clamp(z).
inline std::vector<double> bspline_basis(const SplineGrid& grid, double z) {
  const auto t = grid.knots();
  auto rows = detail::cox_de_boor(grid, t, grid.clamp(z), grid.order);
  return std::move(rows.back());
}

struct BasisWithDerivative {
  std::vector<double> value;
  std::vector<double> derivative;
};

// Basis values and their derivatives with respect to z, both at clamp(z).
inline BasisWithDerivative bspline_basis_with_derivative(const SplineGrid& grid, const std::vector<double>& knots,
                                                         double z) {
  const std::size_t k = grid.order;
  auto rows = detail::cox_de_boor(grid, knots, grid.clamp(z), k);
  BasisWithDerivative out;
  out.value = std::move(rows[k]);
  out.derivative.assign(out.value.size(), 0.0);
  if (k == 0) return out;
  const auto& lower = rows[k - 1];
  const double kk = static_cast<double>(k);
  for (std::size_t j = 0; j < out.value.size(); ++j) {
    double d = 0.0;
    const double left = knots[j + k] - knots[j];
    if (left > 0.0) d += kk / left * lower[j];
    const double right = knots[j + k + 1] - knots[j + 1];
    if (right > 0.0) d -= kk / right * lower[j + 1];
    out.derivative[j] = d;
  }
  return out;
}

}  // namespace lesa
