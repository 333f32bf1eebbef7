// Copyright 2026 The NSS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Basis quantile functions. Every basis is monotone in alpha by
// construction and exposes:
//   quantile(alpha), cdf(y), dquantile_dalpha(alpha),
//   accumulate_gradient(alpha, scale, out)   -- out += scale * dq/dparams
//   lower()/upper() and their parameter gradients (bounded bases only).
// Parameter order inside gradient buffers matches `parameters()`.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "nss/errors.hpp"
#include "nss/normal.hpp"

namespace nss {

enum class BasisKind { cspline, pspline, gaussian };

inline std::string_view to_string(BasisKind kind) {
  switch (kind) {
    case BasisKind::cspline: return "cspline";
    case BasisKind::pspline: return "pspline";
    case BasisKind::gaussian: return "gaussian";
  }
  return "?";
}

inline BasisKind parse_basis_kind(std::string_view text) {
  if (text == "cspline" || text == "c-spline" || text == "c") return BasisKind::cspline;
  if (text == "pspline" || text == "p-spline" || text == "p") return BasisKind::pspline;
  if (text == "gaussian" || text == "g") return BasisKind::gaussian;
  throw ConfigError("unknown basis kind '" + std::string(text) + "'");
}

using BasisGradient = std::vector<double>;

namespace detail {

inline void check_alpha_closed(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw DomainError("quantile level " + std::to_string(alpha) + " outside [0, 1]");
}

}  // namespace detail

/// Quantile function with knots in CDF space: bins of width w_i (target
/// units) and probability mass h_i, linearly interpolated between knots.
class CSpline {
 public:
  CSpline(double offset, std::vector<double> widths, std::vector<double> heights)
      : offset_(offset), widths_(std::move(widths)), heights_(std::move(heights)) {
    if (widths_.empty() || widths_.size() != heights_.size())
      throw InvariantError("c-spline needs matching non-empty widths and heights");
    if (!std::isfinite(offset_)) throw InvariantError("c-spline offset is not finite");
    const std::size_t k = widths_.size();
    locations_.resize(k + 1);
    levels_.resize(k + 1);
    locations_[0] = offset_;
    levels_[0] = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (!(widths_[i] > 0.0) || !std::isfinite(widths_[i]))
        throw InvariantError("c-spline width " + std::to_string(i) + " must be positive");
      if (!(heights_[i] > 0.0) || !std::isfinite(heights_[i]))
        throw InvariantError("c-spline height " + std::to_string(i) + " must be positive");
      locations_[i + 1] = locations_[i] + widths_[i];
      levels_[i + 1] = levels_[i] + heights_[i];
    }
    if (std::abs(levels_[k] - 1.0) > 1e-9)
      throw InvariantError("c-spline heights sum to " + std::to_string(levels_[k]) + ", expected 1");
    if (!std::isfinite(locations_[k])) throw InvariantError("c-spline support overflows");
  }

  std::size_t knots() const { return widths_.size(); }
  std::size_t parameter_count() const { return 1 + 2 * widths_.size(); }
  double offset() const { return offset_; }
  const std::vector<double>& widths() const { return widths_; }
  const std::vector<double>& heights() const { return heights_; }
  const std::vector<double>& knot_locations() const { return locations_; }
  const std::vector<double>& knot_levels() const { return levels_; }

  double lower() const { return locations_.front(); }
  double upper() const { return locations_.back(); }

  double quantile(double alpha) const {
    detail::check_alpha_closed(alpha);
    if (alpha == 1.0) return upper();
    const std::size_t i = bin(alpha);
    return locations_[i] + (alpha - levels_[i]) * widths_[i] / heights_[i];
  }

  double cdf(double y) const {
    if (y <= lower()) return 0.0;
    if (y >= upper()) return 1.0;
    const auto it = std::upper_bound(locations_.begin(), locations_.end(), y);
    const std::size_t i = static_cast<std::size_t>(it - locations_.begin()) - 1;
    const double level = levels_[i] + (y - locations_[i]) * heights_[i] / widths_[i];
    return std::clamp(level, 0.0, 1.0);
  }

  double dquantile_dalpha(double alpha) const {
    detail::check_alpha_closed(alpha);
    const std::size_t i = bin(alpha);
    return widths_[i] / heights_[i];
  }

  // Layout: [offset, w_1..w_K, h_1..h_K]. Heights are treated as free
  // variables; the sum-to-one constraint is applied by the caller's map.
  void accumulate_gradient(double alpha, double scale, std::span<double> out) const {
    detail::check_alpha_closed(alpha);
    const std::size_t k = knots();
    const std::size_t i = bin(alpha);
    const double ratio = widths_[i] / heights_[i];
    const double into_bin = alpha - levels_[i];
    out[0] += scale;
    for (std::size_t j = 0; j < i; ++j) {
      out[1 + j] += scale;
      out[1 + k + j] -= scale * ratio;
    }
    out[1 + i] += scale * into_bin / heights_[i];
    out[1 + k + i] -= scale * into_bin * ratio / heights_[i];
  }

  void accumulate_lower_gradient(double scale, std::span<double> out) const { out[0] += scale; }

  void accumulate_upper_gradient(double scale, std::span<double> out) const {
    out[0] += scale;
    for (std::size_t j = 0; j < knots(); ++j) out[1 + j] += scale;
  }

  std::vector<double> parameters() const {
    std::vector<double> p{offset_};
    p.insert(p.end(), widths_.begin(), widths_.end());
    p.insert(p.end(), heights_.begin(), heights_.end());
    return p;
  }

 private:
  // Zero-based bin whose level interval contains alpha; knots belong to the
  // bin on their left, which yields the left-limit derivative there.
  std::size_t bin(double alpha) const {
    const auto it = std::lower_bound(levels_.begin() + 1, levels_.end(), alpha);
    const auto i = static_cast<std::size_t>(it - levels_.begin()) - 1;
    return std::min(i, knots() - 1);
  }

  double offset_;
  std::vector<double> widths_;
  std::vector<double> heights_;
  std::vector<double> locations_;
  std::vector<double> levels_;
};

/// Quantile function with knots in PDF space: a piecewise-linear density
/// anchored at z_0 < ... < z_K, so the CDF is piecewise quadratic.
class PSpline {
 public:
  PSpline(std::vector<double> locations, std::vector<double> densities)
      : z_(std::move(locations)), d_(std::move(densities)) {
    if (z_.size() < 2 || z_.size() != d_.size())
      throw InvariantError("p-spline needs at least two knots with matching densities");
    for (std::size_t j = 0; j < z_.size(); ++j) {
      if (!std::isfinite(z_[j]) || !std::isfinite(d_[j]))
        throw InvariantError("p-spline knot " + std::to_string(j) + " is not finite");
      if (d_[j] < 0.0) throw InvariantError("p-spline density " + std::to_string(j) + " is negative");
      if (j > 0 && !(z_[j] > z_[j - 1]))
        throw InvariantError("p-spline knot locations must be strictly increasing");
    }
    mass_.resize(z_.size());
    mass_[0] = 0.0;
    for (std::size_t j = 0; j + 1 < z_.size(); ++j)
      mass_[j + 1] = mass_[j] + 0.5 * (d_[j] + d_[j + 1]) * (z_[j + 1] - z_[j]);
    if (std::abs(mass_.back() - 1.0) > 1e-9)
      throw InvariantError("p-spline density integrates to " + std::to_string(mass_.back()) +
                           ", expected 1");
  }

  /// Rescales arbitrary nonnegative densities to unit trapezoid integral.
  static PSpline normalized(std::vector<double> locations, std::vector<double> densities) {
    double total = 0.0;
    for (std::size_t j = 0; j + 1 < locations.size() && j + 1 < densities.size(); ++j)
      total += 0.5 * (densities[j] + densities[j + 1]) * (locations[j + 1] - locations[j]);
    if (!(total > 0.0) || !std::isfinite(total))
      throw InvariantError("p-spline density has no positive mass");
    for (double& v : densities) v /= total;
    return PSpline(std::move(locations), std::move(densities));
  }

  std::size_t bins() const { return z_.size() - 1; }
  std::size_t parameter_count() const { return 2 * z_.size(); }
  const std::vector<double>& knot_locations() const { return z_; }
  const std::vector<double>& densities() const { return d_; }
  double integral() const { return mass_.back(); }

  double lower() const { return z_.front(); }
  double upper() const { return z_.back(); }

  double quantile(double alpha) const {
    detail::check_alpha_closed(alpha);
    if (alpha == 0.0) return lower();
    if (alpha == 1.0) return upper();
    const std::size_t j = bin(alpha);
    return z_[j] + offset_in_bin(j, alpha);
  }

  double cdf(double y) const {
    if (y <= lower()) return 0.0;
    if (y >= upper()) return 1.0;
    const auto it = std::upper_bound(z_.begin(), z_.end(), y);
    const std::size_t j = static_cast<std::size_t>(it - z_.begin()) - 1;
    const double t = y - z_[j];
    const double level = mass_[j] + d_[j] * t + 0.5 * slope(j) * t * t;
    return std::clamp(level, 0.0, 1.0);
  }

  double dquantile_dalpha(double alpha) const {
    detail::check_alpha_closed(alpha);
    const std::size_t j = bin(alpha);
    const double t = alpha <= 0.0 ? 0.0 : offset_in_bin(j, alpha);
    return 1.0 / (d_[j] + slope(j) * t);
  }

  // Layout: [z_0..z_K, d_0..d_K]; densities treated as free variables.
  // Differentiates the bin equation G(t) = M_j + d_j t + s t^2 / 2 - alpha = 0
  // implicitly, with y = z_j + t.
  void accumulate_gradient(double alpha, double scale, std::span<double> out) const {
    detail::check_alpha_closed(alpha);
    const std::size_t n = z_.size();
    if (alpha == 0.0) {
      out[0] += scale;
      return;
    }
    if (alpha == 1.0) {
      out[n - 1] += scale;
      return;
    }
    const std::size_t j = bin(alpha);
    const double t = offset_in_bin(j, alpha);
    const double width = z_[j + 1] - z_[j];
    const double s = slope(j);
    const double density = d_[j] + s * t;
    // dt/dp = -dG/dp / density
    const double k = -scale / density;
    double* dz = out.data();
    double* dd = out.data() + n;

    for (std::size_t i = 0; i < j; ++i) {
      const double mean = 0.5 * (d_[i] + d_[i + 1]);
      const double span = z_[i + 1] - z_[i];
      dd[i] += k * 0.5 * span;
      dd[i + 1] += k * 0.5 * span;
      dz[i + 1] += k * mean;
      dz[i] -= k * mean;
    }
    const double half_t2 = 0.5 * t * t;
    dd[j] += k * (t - half_t2 / width);
    dd[j + 1] += k * half_t2 / width;
    dz[j + 1] += k * half_t2 * (-s / width);
    dz[j] += k * half_t2 * (s / width);
    dz[j] += scale;
  }

  void accumulate_lower_gradient(double scale, std::span<double> out) const { out[0] += scale; }
  void accumulate_upper_gradient(double scale, std::span<double> out) const {
    out[z_.size() - 1] += scale;
  }

  std::vector<double> parameters() const {
    std::vector<double> p = z_;
    p.insert(p.end(), d_.begin(), d_.end());
    return p;
  }

 private:
  double slope(std::size_t j) const { return (d_[j + 1] - d_[j]) / (z_[j + 1] - z_[j]); }

  // First bin whose cumulative mass reaches alpha; it always has positive
  // mass because the previous boundary lies strictly below alpha.
  std::size_t bin(double alpha) const {
    const auto it = std::lower_bound(mass_.begin() + 1, mass_.end(), alpha);
    const auto j = static_cast<std::size_t>(it - mass_.begin()) - 1;
    return std::min(j, bins() - 1);
  }

  double offset_in_bin(std::size_t j, double alpha) const {
    const double width = z_[j + 1] - z_[j];
    const double r = alpha - mass_[j];
    if (r <= 0.0) return 0.0;
    const double s = slope(j);
    double t;
    if (std::abs(s) < 1e-12) {
      t = r / d_[j];
    } else {
      // Root of s/2 t^2 + d_j t - r = 0 in the cancellation-free form.
      const double disc = std::max(0.0, d_[j] * d_[j] + 2.0 * s * r);
      t = 2.0 * r / (d_[j] + std::sqrt(disc));
    }
    return std::clamp(t, 0.0, width);
  }

  std::vector<double> z_;
  std::vector<double> d_;
  std::vector<double> mass_;
};

/// Location-scale normal basis; unbounded, so alpha must lie in (0, 1).
class Gaussian {
 public:
  Gaussian(double mu, double sigma) : mu_(mu), sigma_(sigma) {
    if (!std::isfinite(mu_)) throw InvariantError("gaussian mean is not finite");
    if (!(sigma_ > 0.0) || !std::isfinite(sigma_))
      throw InvariantError("gaussian sigma must be positive");
  }

  std::size_t parameter_count() const { return 2; }
  double mu() const { return mu_; }
  double sigma() const { return sigma_; }

  double quantile(double alpha) const {
    check_open(alpha);
    return mu_ + sigma_ * normal::quantile(alpha);
  }

  double cdf(double y) const { return normal::cdf((y - mu_) / sigma_); }

  double dquantile_dalpha(double alpha) const {
    check_open(alpha);
    return sigma_ / normal::pdf(normal::quantile(alpha));
  }

  void accumulate_gradient(double alpha, double scale, std::span<double> out) const {
    check_open(alpha);
    out[0] += scale;
    out[1] += scale * normal::quantile(alpha);
  }

  std::vector<double> parameters() const { return {mu_, sigma_}; }

 private:
  static void check_open(double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw DomainError("gaussian quantile level " + std::to_string(alpha) +
                        " must lie strictly inside (0, 1)");
  }

  double mu_;
  double sigma_;
};

using Basis = std::variant<CSpline, PSpline, Gaussian>;

inline BasisKind kind_of(const Basis& basis) {
  return static_cast<BasisKind>(basis.index());
}

inline double quantile(const Basis& basis, double alpha) {
  return std::visit([alpha](const auto& b) { return b.quantile(alpha); }, basis);
}

inline double cdf(const Basis& basis, double y) {
  return std::visit([y](const auto& b) { return b.cdf(y); }, basis);
}

inline double dquantile_dalpha(const Basis& basis, double alpha) {
  return std::visit([alpha](const auto& b) { return b.dquantile_dalpha(alpha); }, basis);
}

inline std::size_t parameter_count(const Basis& basis) {
  return std::visit([](const auto& b) { return b.parameter_count(); }, basis);
}

inline void accumulate_gradient(const Basis& basis, double alpha, double scale,
                                std::span<double> out) {
  std::visit([&](const auto& b) { b.accumulate_gradient(alpha, scale, out); }, basis);
}

/// Partial derivatives of quantile(alpha) w.r.t. every basis parameter.
inline BasisGradient quantile_gradient(const Basis& basis, double alpha) {
  BasisGradient g(parameter_count(basis), 0.0);
  accumulate_gradient(basis, alpha, 1.0, g);
  return g;
}

inline bool is_bounded(const Basis& basis) { return !std::holds_alternative<Gaussian>(basis); }

inline double lower(const Basis& basis) {
  return std::visit(
      [](const auto& b) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(b)>, Gaussian>)
          throw DomainError("gaussian basis has no finite lower endpoint");
        else
          return b.lower();
      },
      basis);
}

inline double upper(const Basis& basis) {
  return std::visit(
      [](const auto& b) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(b)>, Gaussian>)
          throw DomainError("gaussian basis has no finite upper endpoint");
        else
          return b.upper();
      },
      basis);
}

inline void accumulate_lower_gradient(const Basis& basis, double scale, std::span<double> out) {
  std::visit(
      [&](const auto& b) {
        if constexpr (std::is_same_v<std::decay_t<decltype(b)>, Gaussian>)
          throw DomainError("gaussian basis has no finite lower endpoint");
        else
          b.accumulate_lower_gradient(scale, out);
      },
      basis);
}

inline void accumulate_upper_gradient(const Basis& basis, double scale, std::span<double> out) {
  std::visit(
      [&](const auto& b) {
        if constexpr (std::is_same_v<std::decay_t<decltype(b)>, Gaussian>)
          throw DomainError("gaussian basis has no finite upper endpoint");
        else
          b.accumulate_upper_gradient(scale, out);
      },
      basis);
}

}  // namespace nss
