// Copyright 2026 The NSS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Exhaustive composition search: enumerate plans, train each under the same
// seeds, rank by validation CRPS. Candidates train in parallel waves of
// `jobs`; every decision (ranking, early exit) is made in enumeration order
// after each wave joins, so results do not depend on `jobs`.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "nss/composition.hpp"
#include "nss/data.hpp"
#include "nss/errors.hpp"
#include "nss/plan.hpp"
#include "nss/training.hpp"

namespace nss {

/// Generator bounds for the candidate space.
struct SearchSpace {
  std::size_t min_depth = 2;
  std::size_t max_depth = 2;
  std::vector<BasisKind> kinds{BasisKind::cspline, BasisKind::pspline};
  std::vector<CompositionMode> modes{CompositionMode::sum, CompositionMode::alpha_chain, CompositionMode::x_chain};
  std::vector<double> lambdas{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int knots = 32;
  std::size_t max_allowed_depth = 8;
};

struct SearchConfig {
  std::vector<CompositionPlan> candidates;  // explicit list; empty = enumerate `space`
  SearchSpace space;
  double delta = 0.0;  // > 0 enables early exit at the first candidate with val CRPS <= delta
  TrainConfig train;
  ModelOptions model;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  void validate() const {
    if (!(delta >= 0.0)) throw ConfigError("search threshold delta must be >= 0");
    if (jobs < 1) throw ConfigError("search needs jobs >= 1");
    train.validate();
  }
};

/// Deterministic, duplicate-free candidate list. Order: depth, then mode,
/// then stage-kind assignment (lexicographic in `kinds` order), then lambda.
/// Depth-1 plans have no operator and appear once, in sum mode.
inline std::vector<CompositionPlan> enumerate_candidates(const SearchSpace& space) {
  if (space.kinds.empty() || space.modes.empty() || space.min_depth < 1 || space.min_depth > space.max_depth)
    throw ConfigError("candidate space is empty (check kinds, modes and depth bounds)");
  if (space.max_depth > space.max_allowed_depth)
    throw ConfigError("candidate depth " + std::to_string(space.max_depth) + " exceeds limit " +
                      std::to_string(space.max_allowed_depth));
  std::vector<CompositionPlan> out;
  auto add = [&](CompositionPlan plan) {
    try {
      plan.validate(space.max_allowed_depth);
    } catch (const ConfigError&) {
      return;  // e.g. a gaussian feeding an alpha-chain
    }
    if (std::find(out.begin(), out.end(), plan) == out.end()) out.push_back(std::move(plan));
  };
  for (std::size_t depth = space.min_depth; depth <= space.max_depth; ++depth) {
    std::size_t combos = 1;
    for (std::size_t i = 0; i < depth; ++i) combos *= space.kinds.size();
    for (CompositionMode mode : space.modes) {
      if (depth == 1 && mode != space.modes.front()) continue;
      for (std::size_t c = 0; c < combos; ++c) {
        CompositionPlan plan;
        plan.mode = depth == 1 ? CompositionMode::sum : mode;
        std::size_t code = c;
        std::vector<StageSpec> stages(depth);
        for (std::size_t i = depth; i-- > 0;) {
          const BasisKind kind = space.kinds[code % space.kinds.size()];
          code /= space.kinds.size();
          stages[i] = StageSpec{kind, kind == BasisKind::gaussian ? 0 : space.knots};
        }
        plan.stages = std::move(stages);
        if (plan.mode == CompositionMode::sum && depth > 1) {
          if (space.lambdas.empty()) throw ConfigError("sum mode needs at least one lambda");
          for (double lambda : space.lambdas) {
            plan.lambda = lambda;
            add(plan);
          }
        } else {
          add(plan);
        }
      }
    }
  }
  if (out.empty()) throw ConfigError("candidate space is empty");
  return out;
}

struct LeaderboardEntry {
  std::size_t order = 0;  // enumeration index
  CompositionPlan plan;
  double val_crps = INFINITY;
  std::size_t parameters = 0;
  std::size_t epochs = 0;
  bool ok = false;
  std::string diagnostic;
};

class SearchError : public Error {
 public:
  SearchError(const std::string& what, std::vector<LeaderboardEntry> failures)
      : Error("search", what), failures_(std::move(failures)) {}
  const std::vector<LeaderboardEntry>& failures() const { return failures_; }

 private:
  std::vector<LeaderboardEntry> failures_;
};

struct SearchResult {
  QuantileModel best;
  TrainReport best_report;
  std::vector<LeaderboardEntry> leaderboard;  // ranked
  bool early_exit = false;
};

/// Ranking: trained before failed, then lower CRPS, fewer parameters, earlier enumeration.
inline bool ranks_before(const LeaderboardEntry& a, const LeaderboardEntry& b) {
  if (a.ok != b.ok) return a.ok;
  if (a.ok && a.val_crps != b.val_crps) return a.val_crps < b.val_crps;
  if (a.parameters != b.parameters) return a.parameters < b.parameters;
  return a.order < b.order;
}

namespace detail {

struct CandidateRun {
  LeaderboardEntry entry;
  std::optional<QuantileModel> model;
  TrainReport report;
};

inline CandidateRun train_candidate(std::size_t order, const CompositionPlan& plan, const Dataset& train,
                                    const Dataset& val, const SearchConfig& cfg) {
  CandidateRun run;
  run.entry.order = order;
  run.entry.plan = plan;
  try {
    QuantileModel model(plan, static_cast<int>(train.width()), cfg.model, cfg.seed);
    run.entry.parameters = model.parameter_count();
    run.report = fit(model, train, val, cfg.train);
    run.entry.epochs = run.report.epochs.size();
    if (run.report.diverged) {
      run.entry.diagnostic = run.report.diagnostic;
    } else if (run.report.epochs.empty()) {
      run.entry.diagnostic = "no epochs were run";
    } else {
      run.entry.val_crps = run.report.final_val_crps();
      run.entry.ok = std::isfinite(run.entry.val_crps);
      if (!run.entry.ok) run.entry.diagnostic = "non-finite validation CRPS";
      run.model = std::move(model);
    }
  } catch (const Error& e) {
    run.entry.diagnostic = e.kind() + ": " + e.what();
  }
  if (!run.entry.ok) run.model.reset();
  return run;
}

}  // namespace detail

inline SearchResult search(const SearchConfig& cfg, const Dataset& train, const Dataset& val) {
  cfg.validate();
  if (train.rows() == 0 || val.rows() == 0) throw DataError("search needs non-empty train and validation sets");
  if (!train.normalized() || !val.normalized()) throw ContractError("search expects normalized datasets");
  const std::vector<CompositionPlan> plans = cfg.candidates.empty() ? enumerate_candidates(cfg.space) : cfg.candidates;
  if (plans.empty()) throw ConfigError("search has no candidates");
  for (const auto& p : plans) p.validate(cfg.space.max_allowed_depth);

  std::vector<detail::CandidateRun> runs;
  std::optional<std::size_t> accepted;
  for (std::size_t from = 0; from < plans.size() && !accepted; from += cfg.jobs) {
    const std::size_t n = std::min(cfg.jobs, plans.size() - from);
    std::vector<detail::CandidateRun> wave(n);
    if (n == 1) {
      wave[0] = detail::train_candidate(from, plans[from], train, val, cfg);
    } else {
      std::vector<std::thread> workers;
      for (std::size_t k = 0; k < n; ++k)
        workers.emplace_back([&, k] { wave[k] = detail::train_candidate(from + k, plans[from + k], train, val, cfg); });
      for (auto& w : workers) w.join();
    }
    for (auto& run : wave) {
      runs.push_back(std::move(run));
      const auto& e = runs.back().entry;
      if (cfg.delta > 0.0 && e.ok && e.val_crps <= cfg.delta) {
        accepted = runs.size() - 1;
        break;  // later candidates in this wave are discarded
      }
    }
  }

  SearchResult result;
  std::size_t winner = 0;
  if (accepted) {
    winner = *accepted;
    result.early_exit = true;
  } else {
    for (std::size_t i = 1; i < runs.size(); ++i)
      if (ranks_before(runs[i].entry, runs[winner].entry)) winner = i;
  }
  for (const auto& r : runs) result.leaderboard.push_back(r.entry);
  std::sort(result.leaderboard.begin(), result.leaderboard.end(), ranks_before);
  if (!runs[winner].entry.ok) {
    std::vector<LeaderboardEntry> failures;
    for (const auto& r : runs) failures.push_back(r.entry);
    throw SearchError("all " + std::to_string(runs.size()) + " candidates failed to train", std::move(failures));
  }
  result.best = std::move(*runs[winner].model);
  result.best_report = std::move(runs[winner].report);
  return result;
}

}  // namespace nss
