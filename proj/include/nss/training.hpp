// Copyright 2026 The NSS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nss/composition.hpp"
#include "nss/data.hpp"
#include "nss/errors.hpp"

namespace nss {

/// Pinball loss (y - q)(alpha - 1{y < q}); nonnegative for alpha in [0, 1].
inline double pinball(double y, double q, double alpha) {
  return (y - q) * (alpha - (y < q ? 1.0 : 0.0));
}

/// d pinball / dq. The tie y == q takes the y >= q branch.
inline double pinball_dq(double y, double q, double alpha) { return -(alpha - (y < q ? 1.0 : 0.0)); }

enum class GridMode {
  midpoint,    // (i - 0.5) / m
  stratified,  // one uniform draw in each [i/m, (i+1)/m)
  inclusive,   // 0, 1/m, ..., 1 (m + 1 points; spline-only models)
};

inline std::string_view to_string(GridMode g) {
  switch (g) {
    case GridMode::midpoint: return "midpoint";
    case GridMode::stratified: return "stratified";
    case GridMode::inclusive: return "inclusive";
  }
  return "?";
}

inline GridMode parse_grid_mode(std::string_view text) {
  if (text == "midpoint") return GridMode::midpoint;
  if (text == "stratified") return GridMode::stratified;
  if (text == "inclusive") return GridMode::inclusive;
  throw ConfigError("unknown grid mode '" + std::string(text) + "'");
}

inline std::vector<double> midpoint_grid(std::size_t m) {
  std::vector<double> g(m);
  for (std::size_t i = 0; i < m; ++i) g[i] = (static_cast<double>(i) + 0.5) / static_cast<double>(m);
  return g;
}

inline std::vector<double> level_grid(std::size_t m, GridMode mode, std::mt19937_64& rng) {
  if (m < 2) throw ConfigError("the quantile grid needs m >= 2");
  switch (mode) {
    case GridMode::midpoint: return midpoint_grid(m);
    case GridMode::stratified: {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::vector<double> g(m);
      for (std::size_t i = 0; i < m; ++i) g[i] = (static_cast<double>(i) + u(rng)) / static_cast<double>(m);
      return g;
    }
    case GridMode::inclusive: {
      std::vector<double> g(m + 1);
      for (std::size_t i = 0; i <= m; ++i) g[i] = static_cast<double>(i) / static_cast<double>(m);
      return g;
    }
  }
  return {};
}

/// Monte-Carlo CRPS: mean over the level grid of 2 * pinball(y, q(alpha), alpha).
inline double crps_estimate(double y, const std::function<double(double)>& qfn, std::size_t m,
                            GridMode mode = GridMode::midpoint, std::uint64_t seed = 0) {
  std::mt19937_64 rng(seed);
  const auto grid = level_grid(m, mode, rng);
  double total = 0.0;
  for (double a : grid) {
    const double q = qfn(a);
    if (!std::isfinite(q)) throw TrainingError("quantile function is not finite at level " + std::to_string(a));
    total += 2.0 * pinball(y, q, a);
  }
  return total / static_cast<double>(grid.size());
}

struct TrainConfig {
  double lr = 0.005;
  std::size_t batch = 128;
  std::size_t epochs = 100;
  std::size_t m = 32;
  GridMode grid = GridMode::midpoint;
  std::uint64_t seed = 0;
  std::size_t patience = 0;  // 0 disables early stopping

  void validate() const {
    if (m < 2) throw ConfigError("m must be >= 2");
    if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
    if (batch < 1) throw ConfigError("batch size must be >= 1");
  }
};

struct EpochRecord {
  double train_crps = 0.0;
  double val_crps = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  bool diverged = false;
  std::string diagnostic;
  std::size_t best_epoch = 0;  // 1-based epoch whose weights were kept

  double final_val_crps() const { return epochs.empty() ? INFINITY : epochs[best_epoch - 1].val_crps; }
};

/// Mean CRPS over a normalized dataset on the deterministic midpoint grid.
inline double mean_crps(const QuantileModel& model, const Dataset& ds, std::size_t m) {
  const auto grid = midpoint_grid(m);
  const Matrix q = model.quantiles_normalized(ds.features, grid);
  double total = 0.0;
  for (Eigen::Index b = 0; b < q.rows(); ++b)
    for (Eigen::Index i = 0; i < q.cols(); ++i)
      total += 2.0 * pinball(ds.targets(b), q(b, i), grid[static_cast<std::size_t>(i)]);
  return total / static_cast<double>(q.rows() * q.cols());
}

/// CRPS of one minibatch and its gradient w.r.t. every stage network.
struct BatchLoss {
  double crps = 0.0;
  std::vector<NetworkGradients> grads;
};

inline BatchLoss batch_crps(const QuantileModel& model, const Matrix& x, const Vector& y, const Matrix& alphas) {
  CompositeForward pass(model, x, alphas);
  const Matrix& q = pass.values();
  const double scale = 2.0 / static_cast<double>(q.rows() * q.cols());
  Matrix upstream(q.rows(), q.cols());
  double total = 0.0;
  for (Eigen::Index b = 0; b < q.rows(); ++b)
    for (Eigen::Index i = 0; i < q.cols(); ++i) {
      total += pinball(y(b), q(b, i), alphas(b, i));
      upstream(b, i) = scale * pinball_dq(y(b), q(b, i), alphas(b, i));
    }
  BatchLoss out;
  out.crps = scale * total;
  if (!std::isfinite(out.crps)) return out;
  out.grads = pass.backward(upstream);
  return out;
}

/// Minibatch Adam on the mean per-example CRPS. Mutates `model` in place.
/// Both datasets must already be normalized with the training statistics,
/// which are stored on the model for later prediction in original units.
inline TrainReport fit(QuantileModel& model, const Dataset& train, const Dataset& val, const TrainConfig& cfg) {
  cfg.validate();
  train.validate();
  val.validate();
  if (!train.normalized() || !val.normalized()) throw ContractError("fit expects normalized datasets");
  if (train.width() != model.input_width())
    throw ContractError("dataset has " + std::to_string(train.width()) + " features, model expects " +
                        std::to_string(model.input_width()));
  if (cfg.grid == GridMode::inclusive && model.plan().has_gaussian())
    throw ConfigError("the inclusive grid contains alpha = 0 and 1, which a gaussian stage cannot evaluate");
  model.set_stats(*train.stats);

  TrainReport report;
  std::mt19937_64 rng(mix_seed(cfg.seed, 0x7a11));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(train.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  for (auto& net : model.mutable_networks()) net.reset_optimizer();

  std::optional<QuantileModel> best;
  double best_val = INFINITY;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_total = 0.0;
    EpochRecord record;
    try {
      for (std::size_t from = 0; from < order.size(); from += cfg.batch) {
        const std::size_t n = std::min(cfg.batch, order.size() - from);
        Matrix x(static_cast<Eigen::Index>(n), train.width());
        Vector y(static_cast<Eigen::Index>(n));
        const std::size_t cols = cfg.grid == GridMode::inclusive ? cfg.m + 1 : cfg.m;
        Matrix alphas(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols));
        for (std::size_t r = 0; r < n; ++r) {
          const auto src = order[from + r];
          const auto row = static_cast<Eigen::Index>(r);
          x.row(row) = train.features.row(src);
          y(row) = train.targets(src);
          const auto grid = level_grid(cfg.m, cfg.grid, rng);
          for (std::size_t i = 0; i < cols; ++i) alphas(row, static_cast<Eigen::Index>(i)) = grid[i];
        }
        BatchLoss loss = batch_crps(model, x, y, alphas);
        if (!std::isfinite(loss.crps))
          throw TrainingError("non-finite training loss");
        epoch_total += loss.crps * static_cast<double>(n);
        for (std::size_t t = 0; t < loss.grads.size(); ++t)
          model.mutable_networks()[t].adam_step(loss.grads[t], cfg.lr);
      }
      record.val_crps = mean_crps(model, val, cfg.m);
    } catch (const Error& e) {
      // Exploding weights surface as a non-finite loss or gradient, or as a
      // head output no basis can be built from.
      if (e.kind() != "training" && e.kind() != "invariant" && e.kind() != "domain") throw;
      report.diverged = true;
      report.diagnostic = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }
    record.train_crps = epoch_total / static_cast<double>(order.size());
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report.epochs.push_back(record);
    if (!std::isfinite(record.val_crps)) {
      report.diverged = true;
      report.diagnostic = "non-finite validation loss in epoch " + std::to_string(epoch);
      break;
    }
    if (cfg.patience > 0) {
      if (record.val_crps < best_val) {
        best_val = record.val_crps;
        best = model;
        report.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= cfg.patience) {
        break;
      }
    }
  }
  if (cfg.patience > 0 && best) {
    model = std::move(*best);
  } else {
    report.best_epoch = report.epochs.size();
  }
  return report;
}

}  // namespace nss
