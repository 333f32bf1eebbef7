// Copyright 2026 The NSS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "nss/errors.hpp"
#include "nss/spline.hpp"

namespace nss {

enum class CompositionMode { sum, alpha_chain, x_chain };

// How alpha-chain stages rescale their output into [0, 1].
enum class AlphaNormalization { minmax, sigmoid };

inline std::string_view to_string(CompositionMode mode) {
  switch (mode) {
    case CompositionMode::sum: return "sum";
    case CompositionMode::alpha_chain: return "alpha-chain";
    case CompositionMode::x_chain: return "x-chain";
  }
  return "?";
}

inline CompositionMode parse_mode(std::string_view text) {
  if (text == "sum") return CompositionMode::sum;
  if (text == "alpha-chain") return CompositionMode::alpha_chain;
  if (text == "x-chain") return CompositionMode::x_chain;
  throw ConfigError("unknown composition mode '" + std::string(text) + "'");
}

/// Shortest decimal that round-trips to the same double.
inline std::string format_shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline double parse_double(std::string_view text, const std::string& what) {
  double v = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty())
    throw ConfigError("cannot parse " + what + " '" + std::string(text) + "'");
  return v;
}

inline long parse_integer(std::string_view text, const std::string& what) {
  long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw ConfigError("cannot parse " + what + " '" + std::string(text) + "'");
  return v;
}

struct StageSpec {
  BasisKind kind = BasisKind::cspline;
  int knots = 32;

  bool operator==(const StageSpec&) const = default;
};

/// A symbolic composition program: ordered basis stages combined by one
/// operator. Text form (used in CSVs, archives and on the command line):
///
///   <mode>:<kind>/<knots>+<kind>/<knots>[;lambda=<v>][;norm=sigmoid]
///
/// e.g. `sum:cspline/32+pspline/32;lambda=0.5`. Gaussian stages omit knots.
namespace detail {

inline std::vector<std::string> split_keep_empty(const std::string& text, char sep) {
  std::vector<std::string> out{std::string{}};
  for (char c : text) {
    if (c == sep) out.emplace_back();
    else out.back() += c;
  }
  return out;
}

}  // namespace detail

struct CompositionPlan {
  CompositionMode mode = CompositionMode::sum;
  std::vector<StageSpec> stages;
  double lambda = 1.0;  // weight of every stage after the first (sum only)
  AlphaNormalization normalization = AlphaNormalization::minmax;

  std::size_t depth() const { return stages.size(); }

  void validate(std::size_t max_depth = 8) const {
    if (stages.empty()) throw ConfigError("composition plan has no stages");
    if (stages.size() > max_depth)
      throw ConfigError("composition depth " + std::to_string(stages.size()) + " exceeds limit " +
                        std::to_string(max_depth));
    for (const auto& s : stages)
      if (s.kind != BasisKind::gaussian && s.knots < 1)
        throw ConfigError("spline stage needs at least one knot");
    if (mode == CompositionMode::sum && !(lambda >= 0.0 && std::isfinite(lambda)))
      throw ConfigError("sum mode needs a finite nonnegative lambda");
    if (mode == CompositionMode::alpha_chain && normalization == AlphaNormalization::minmax) {
      for (std::size_t i = 0; i + 1 < stages.size(); ++i)
        if (stages[i].kind == BasisKind::gaussian)
          throw ConfigError("gaussian stage cannot feed an alpha-chain (unbounded range)");
    }
  }

  bool has_gaussian() const {
    for (const auto& s : stages)
      if (s.kind == BasisKind::gaussian) return true;
    return false;
  }

  std::string to_string() const {
    std::string out(nss::to_string(mode));
    out += ':';
    for (std::size_t i = 0; i < stages.size(); ++i) {
      if (i) out += '+';
      out += nss::to_string(stages[i].kind);
      if (stages[i].kind != BasisKind::gaussian) out += '/' + std::to_string(stages[i].knots);
    }
    if (mode == CompositionMode::sum && stages.size() > 1) out += ";lambda=" + format_shortest(lambda);
    if (mode == CompositionMode::alpha_chain && normalization == AlphaNormalization::sigmoid)
      out += ";norm=sigmoid";
    return out;
  }

  static CompositionPlan parse(std::string_view text) {
    CompositionPlan plan;
    const std::string all(text);
    const auto colon = all.find(':');
    if (colon == std::string::npos) throw ConfigError("plan '" + all + "' lacks '<mode>:'");
    plan.mode = parse_mode(all.substr(0, colon));
    auto parts = detail::split_keep_empty(all.substr(colon + 1), ';');
    const auto stage_items = detail::split_keep_empty(parts.front(), '+');
    if (!(stage_items.size() == 1 && stage_items[0].empty())) {
      for (const auto& item : stage_items) {
        StageSpec stage;
        const auto slash = item.find('/');
        stage.kind = parse_basis_kind(item.substr(0, slash));
        if (slash != std::string::npos)
          stage.knots = static_cast<int>(parse_integer(item.substr(slash + 1), "knot count"));
        else if (stage.kind == BasisKind::gaussian)
          stage.knots = 0;
        plan.stages.push_back(stage);
      }
    }
    for (std::size_t i = 1; i < parts.size(); ++i) {
      const std::string& opt = parts[i];
      const auto eq = opt.find('=');
      if (eq == std::string::npos) throw ConfigError("plan option '" + opt + "' lacks '='");
      const std::string key = opt.substr(0, eq), value = opt.substr(eq + 1);
      if (key == "lambda") {
        plan.lambda = parse_double(value, "lambda");
      } else if (key == "norm") {
        if (value == "sigmoid") plan.normalization = AlphaNormalization::sigmoid;
        else if (value == "minmax") plan.normalization = AlphaNormalization::minmax;
        else throw ConfigError("unknown alpha normalization '" + value + "'");
      } else {
        throw ConfigError("unknown plan option '" + key + "'");
      }
    }
    plan.validate();
    return plan;
  }

  bool operator==(const CompositionPlan& o) const {
    return mode == o.mode && stages == o.stages && normalization == o.normalization &&
           (mode != CompositionMode::sum || stages.size() < 2 || lambda == o.lambda);
  }
};

/// Named presets accepted wherever a plan is expected, in addition to the
/// explicit text form.
inline CompositionPlan plan_from_name(std::string_view name, int knots = 32, double lambda = 0.5) {
  auto stage = [&](BasisKind k) { return StageSpec{k, k == BasisKind::gaussian ? 0 : knots}; };
  CompositionPlan plan;
  if (name == "nss-sum") {
    plan.stages = {stage(BasisKind::cspline), stage(BasisKind::pspline)};
    plan.lambda = lambda;
  } else if (name == "nss-alpha-chain") {
    plan.mode = CompositionMode::alpha_chain;
    plan.stages = {stage(BasisKind::cspline), stage(BasisKind::pspline)};
  } else if (name == "nss-x-chain") {
    plan.mode = CompositionMode::x_chain;
    plan.stages = {stage(BasisKind::cspline), stage(BasisKind::pspline)};
  } else if (name == "c-spline" || name == "cspline") {
    plan.stages = {stage(BasisKind::cspline)};
  } else if (name == "p-spline" || name == "pspline") {
    plan.stages = {stage(BasisKind::pspline)};
  } else if (name == "gaussian") {
    plan.stages = {stage(BasisKind::gaussian)};
  } else {
    return CompositionPlan::parse(name);
  }
  plan.validate();
  return plan;
}

}  // namespace nss
