// Copyright 2026 The NSS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "nss/composition.hpp"
#include "nss/data.hpp"
#include "nss/errors.hpp"
#include "nss/training.hpp"

namespace nss {

struct PointMetrics {
  double mae = 0.0;
  double mse = 0.0;
  double rmse = 0.0;
  double mape = 0.0;  // over rows with nonzero truth
  double wape = 0.0;
  std::size_t mape_excluded = 0;  // rows with truth == 0
};

inline PointMetrics point_metrics(std::span<const double> truth, std::span<const double> pred) {
  if (truth.size() != pred.size()) throw ContractError("truth and prediction lengths differ");
  if (truth.empty()) throw ContractError("point metrics need at least one row");
  PointMetrics m;
  double abs_sum = 0.0, sq_sum = 0.0, truth_sum = 0.0, ape_sum = 0.0;
  std::size_t ape_rows = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double err = truth[i] - pred[i];
    abs_sum += std::abs(err);
    sq_sum += err * err;
    truth_sum += std::abs(truth[i]);
    if (truth[i] != 0.0) {
      ape_sum += std::abs(err / truth[i]);
      ++ape_rows;
    } else {
      ++m.mape_excluded;
    }
  }
  const double n = static_cast<double>(truth.size());
  m.mae = abs_sum / n;
  m.mse = sq_sum / n;
  m.rmse = std::sqrt(m.mse);
  m.mape = ape_rows ? ape_sum / static_cast<double>(ape_rows) : 0.0;
  m.wape = truth_sum > 0.0 ? abs_sum / truth_sum : 0.0;
  return m;
}

/// {0.01, 0.02, ..., 0.99}
inline std::vector<double> levels_99() {
  std::vector<double> levels(99);
  for (int i = 1; i <= 99; ++i) levels[static_cast<std::size_t>(i - 1)] = i / 100.0;
  return levels;
}

/// Mean pinball loss per level. `q` has one row per example, one column per level.
inline std::vector<double> pinball_by_level(const Eigen::VectorXd& truth, const Eigen::MatrixXd& q,
                                            std::span<const double> levels) {
  if (q.rows() != truth.size() || q.cols() != static_cast<Eigen::Index>(levels.size()))
    throw ContractError("quantile matrix shape does not match truth and levels");
  std::vector<double> out(levels.size(), 0.0);
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (!(levels[i] > 0.0 && levels[i] < 1.0)) throw DomainError("metric levels must lie in (0, 1)");
    double total = 0.0;
    for (Eigen::Index b = 0; b < q.rows(); ++b)
      total += pinball(truth(b), q(b, static_cast<Eigen::Index>(i)), levels[i]);
    out[i] = total / static_cast<double>(q.rows());
  }
  return out;
}

struct MetricReport {
  PointMetrics point;                 // of the Q50 predictions
  std::vector<double> levels;         // 0.01 .. 0.99
  std::vector<double> pinball;        // mean pinball per level
  double avg_pinball_99 = 0.0;

  double pinball_at(double level) const {
    for (std::size_t i = 0; i < levels.size(); ++i)
      if (std::abs(levels[i] - level) < 1e-12) return pinball[i];
    throw ContractError("level " + std::to_string(level) + " was not evaluated");
  }
};

enum class Units { normalized, original };

/// Point metrics of the median plus pinball metrics over the 99-level grid.
inline MetricReport evaluate_model(const QuantileModel& model, const Dataset& ds, Units units = Units::original) {
  ds.validate();
  if (!ds.normalized()) throw ContractError("evaluate_model expects a normalized dataset");
  MetricReport report;
  report.levels = levels_99();
  Eigen::MatrixXd q = model.quantiles_normalized(ds.features, report.levels);
  Eigen::VectorXd truth = ds.targets;
  if (units == Units::original) {
    q = (q.array() * ds.stats->target_std + ds.stats->target_mean).matrix();
    truth = ds.stats->denormalize_targets(truth);
  }
  report.pinball = pinball_by_level(truth, q, report.levels);
  double sum = 0.0;
  for (double v : report.pinball) sum += v;
  report.avg_pinball_99 = sum / static_cast<double>(report.pinball.size());
  const Eigen::VectorXd median = q.col(49);
  report.point = point_metrics({truth.data(), static_cast<std::size_t>(truth.size())},
                               {median.data(), static_cast<std::size_t>(median.size())});
  return report;
}

struct CalibrationCurve {
  std::string slice;              // e.g. "x=0.5"
  std::vector<double> levels;     // nominal p
  std::vector<double> coverage;   // fraction of rows with q(x, p) >= y

  double max_abs_error() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < levels.size(); ++i) worst = std::max(worst, std::abs(coverage[i] - levels[i]));
    return worst;
  }
};

/// Empirical coverage per level from predicted quantiles (rows = examples).
inline CalibrationCurve calibration_curve(const Eigen::VectorXd& truth, const Eigen::MatrixXd& q,
                                          std::span<const double> levels, std::string slice = "all") {
  if (truth.size() == 0) throw ContractError("calibration needs at least one row");
  if (q.rows() != truth.size() || q.cols() != static_cast<Eigen::Index>(levels.size()))
    throw ContractError("quantile matrix shape does not match truth and levels");
  CalibrationCurve c;
  c.slice = std::move(slice);
  c.levels.assign(levels.begin(), levels.end());
  for (Eigen::Index i = 0; i < q.cols(); ++i) {
    std::size_t hit = 0;
    for (Eigen::Index b = 0; b < q.rows(); ++b)
      if (q(b, i) >= truth(b)) ++hit;
    c.coverage.push_back(static_cast<double>(hit) / static_cast<double>(q.rows()));
  }
  return c;
}

inline CalibrationCurve calibration_curve(const QuantileModel& model, const Dataset& ds,
                                          std::span<const double> levels, std::string slice = "all") {
  ds.validate();
  const Eigen::MatrixXd q = ds.normalized() ? model.quantiles_normalized(ds.features, levels)
                                            : model.predict(ds.features, levels);
  return calibration_curve(ds.targets, q, levels, std::move(slice));
}

inline std::vector<double> deciles() {
  std::vector<double> d;
  for (int i = 1; i <= 9; ++i) d.push_back(i / 10.0);
  return d;
}

/// Relative improvement of a loss over a baseline, in percent:
/// 100 * (baseline - nss) / baseline. Positive when the first is lower.
inline double gain_percentage(double best_nss, double best_baseline) {
  if (!(best_baseline > 0.0)) throw DomainError("gain percentage needs a positive baseline");
  return 100.0 * (best_baseline - best_nss) / best_baseline;
}

}  // namespace nss
