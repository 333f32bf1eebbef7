// Copyright 2026 The NSS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Maps unconstrained network outputs onto valid basis parameters and back-
// propagates basis-parameter gradients to the raw outputs.
//
// Raw layouts (K = knot count):
//   c-spline  [offset, width_raw x K, height_logit x K]            1 + 2K
//   p-spline  [z0, spacing_raw x K, density_raw x (K + 1)]         2K + 2
//   gaussian  [mu, sigma_raw]                                      2

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "nss/errors.hpp"
#include "nss/spline.hpp"

namespace nss {

inline constexpr double kPositiveFloor = 1e-6;
// Mixing weight keeping every c-spline height strictly positive.
inline constexpr double kHeightFloor = 1e-9;

inline double softplus(double x) {
  if (x > 30.0) return x;
  if (x < -30.0) return std::exp(x);
  return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double inverse_softplus(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

struct HeadSpec {
  BasisKind kind = BasisKind::cspline;
  int knots = 32;

  std::size_t raw_size() const {
    const auto k = static_cast<std::size_t>(knots);
    switch (kind) {
      case BasisKind::cspline: return 1 + 2 * k;
      case BasisKind::pspline: return 2 * k + 2;
      case BasisKind::gaussian: return 2;
    }
    return 0;
  }

  void validate() const {
    if (kind != BasisKind::gaussian && knots < 1)
      throw ConfigError("spline heads need at least one knot");
  }

  /// Raw values that produce a spread-out distribution over roughly
  /// [-span/2, span/2] in normalized target units. Used as the output-layer
  /// bias at initialization.
  std::vector<double> neutral_raw(double span = 6.0) const {
    std::vector<double> raw(raw_size(), 0.0);
    const double k = static_cast<double>(knots);
    switch (kind) {
      case BasisKind::cspline:
        raw[0] = -0.5 * span;
        for (int i = 0; i < knots; ++i) raw[1 + i] = inverse_softplus(span / k - kPositiveFloor);
        break;
      case BasisKind::pspline:
        raw[0] = -0.5 * span;
        for (int i = 0; i < knots; ++i) raw[1 + i] = inverse_softplus(span / k - kPositiveFloor);
        break;
      case BasisKind::gaussian:
        raw[1] = inverse_softplus(1.0 - kPositiveFloor);
        break;
    }
    return raw;
  }
};

inline Basis constrain(const HeadSpec& head, std::span<const double> raw) {
  if (raw.size() != head.raw_size())
    throw ContractError("head expects " + std::to_string(head.raw_size()) + " raw outputs, got " +
                        std::to_string(raw.size()));
  const auto k = static_cast<std::size_t>(head.knots);
  switch (head.kind) {
    case BasisKind::cspline: {
      std::vector<double> widths(k), heights(k);
      double peak = raw[1 + k];
      for (std::size_t i = 1; i < k; ++i) peak = std::max(peak, raw[1 + k + i]);
      double total = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        widths[i] = softplus(raw[1 + i]) + kPositiveFloor;
        heights[i] = std::exp(raw[1 + k + i] - peak);
        total += heights[i];
      }
      const double denom = 1.0 + static_cast<double>(k) * kHeightFloor;
      for (double& h : heights) h = (h / total + kHeightFloor) / denom;
      return CSpline(raw[0], std::move(widths), std::move(heights));
    }
    case BasisKind::pspline: {
      std::vector<double> z(k + 1), e(k + 1);
      z[0] = raw[0];
      for (std::size_t j = 1; j <= k; ++j) z[j] = z[j - 1] + softplus(raw[j]) + kPositiveFloor;
      for (std::size_t j = 0; j <= k; ++j) e[j] = softplus(raw[1 + k + j]) + kPositiveFloor;
      return PSpline::normalized(std::move(z), std::move(e));
    }
    case BasisKind::gaussian:
      return Gaussian(raw[0], softplus(raw[1]) + kPositiveFloor);
  }
  throw ContractError("unknown basis kind");
}

/// raw_grad = J^T param_grad where J is the Jacobian of `constrain` at raw.
/// `basis` must be the value constrain(head, raw) returned.
inline void constrain_backward(const HeadSpec& head, std::span<const double> raw,
                               const Basis& basis, std::span<const double> param_grad,
                               std::span<double> raw_grad) {
  const auto k = static_cast<std::size_t>(head.knots);
  switch (head.kind) {
    case BasisKind::cspline: {
      const auto& spline = std::get<CSpline>(basis);
      raw_grad[0] = param_grad[0];
      for (std::size_t i = 0; i < k; ++i) raw_grad[1 + i] = param_grad[1 + i] * sigmoid(raw[1 + i]);
      // h = (softmax + eta) / (1 + K eta); softmax = h (1 + K eta) - eta.
      const double denom = 1.0 + static_cast<double>(k) * kHeightFloor;
      double dot = 0.0;
      std::vector<double> soft(k);
      for (std::size_t i = 0; i < k; ++i) {
        soft[i] = spline.heights()[i] * denom - kHeightFloor;
        dot += param_grad[1 + k + i] * soft[i];
      }
      for (std::size_t i = 0; i < k; ++i)
        raw_grad[1 + k + i] = soft[i] * (param_grad[1 + k + i] - dot) / denom;
      return;
    }
    case BasisKind::pspline: {
      const auto& spline = std::get<PSpline>(basis);
      const auto& z = spline.knot_locations();
      const auto& d = spline.densities();
      const std::size_t n = k + 1;
      // d = e / I with I = trapezoid integral of e over z. Since e = d I,
      // dI/de_j and dI/dz_j can be written with d and then scaled by I.
      std::vector<double> e(n);
      for (std::size_t j = 0; j < n; ++j) e[j] = softplus(raw[1 + k + j]) + kPositiveFloor;
      double integral = 0.0;
      for (std::size_t j = 0; j + 1 < n; ++j) integral += 0.5 * (e[j] + e[j + 1]) * (z[j + 1] - z[j]);

      double gd_dot_d = 0.0;
      for (std::size_t j = 0; j < n; ++j) gd_dot_d += param_grad[n + j] * d[j];
      // dL/dI = -sum_k g_d_k e_k / I^2 = -gd_dot_d / I
      const double g_integral = -gd_dot_d / integral;

      std::vector<double> gz(param_grad.begin(), param_grad.begin() + static_cast<long>(n));
      for (std::size_t j = 0; j < n; ++j) {
        double di_de = 0.0;
        if (j > 0) di_de += 0.5 * (z[j] - z[j - 1]);
        if (j + 1 < n) di_de += 0.5 * (z[j + 1] - z[j]);
        const double g_e = param_grad[n + j] / integral + g_integral * di_de;
        raw_grad[1 + k + j] = g_e * sigmoid(raw[1 + k + j]);

        double di_dz = 0.0;
        if (j > 0) di_dz += 0.5 * (e[j - 1] + e[j]);
        if (j + 1 < n) di_dz -= 0.5 * (e[j] + e[j + 1]);
        gz[j] += g_integral * di_dz;
      }
      // z_j = z0 + sum_{i<=j} (softplus(raw_i) + floor)
      double suffix = 0.0;
      for (std::size_t j = n; j-- > 1;) {
        suffix += gz[j];
        raw_grad[j] = suffix * sigmoid(raw[j]);
      }
      raw_grad[0] = suffix + gz[0];
      return;
    }
    case BasisKind::gaussian:
      raw_grad[0] = param_grad[0];
      raw_grad[1] = param_grad[1] * sigmoid(raw[1]);
      return;
  }
}

}  // namespace nss
