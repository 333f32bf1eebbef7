// Copyright 2026 The NSS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Plot-ready CSV output. Fixed column order, LF line endings, every float
// with 17 significant digits so the text round-trips to the same double.
// Column meanings are listed in docs/csv-formats.md.

#include <Eigen/Dense>
#include <cstdio>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "nss/errors.hpp"
#include "nss/evaluation.hpp"
#include "nss/search.hpp"
#include "nss/training.hpp"

namespace nss::csv {

inline std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Quote a text cell only when it needs it.
inline std::string text(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

class Table {
 public:
  explicit Table(std::vector<std::string> header) : columns_(header.size()) { add(header); }

  void add(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw ContractError("CSV row width does not match the header");
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) body_ += ',';
      body_ += cells[i];
    }
    body_ += '\n';
    ++lines_;
  }

  const std::string& str() const { return body_; }
  std::size_t lines() const { return lines_; }

 private:
  std::size_t columns_;
  std::string body_;
  std::size_t lines_ = 0;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << content;
  out.close();
  if (!out) throw DataError("failed writing '" + path + "'");
}

inline std::string level_label(double level) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "q%.15g", level);
  return buf;
}

// metric,value -- point metrics of the median, avg pinball over 99 levels,
// then pinball at 0.1/0.5/0.9.
inline Table metrics(const MetricReport& r) {
  Table t({"metric", "value"});
  t.add({"mae", num(r.point.mae)});
  t.add({"mse", num(r.point.mse)});
  t.add({"rmse", num(r.point.rmse)});
  t.add({"mape", num(r.point.mape)});
  t.add({"wape", num(r.point.wape)});
  t.add({"mape_excluded_rows", std::to_string(r.point.mape_excluded)});
  t.add({"avg_pinball_99", num(r.avg_pinball_99)});
  t.add({"pinball_q10", num(r.pinball_at(0.1))});
  t.add({"pinball_q50", num(r.pinball_at(0.5))});
  t.add({"pinball_q90", num(r.pinball_at(0.9))});
  return t;
}

// row,y,q10,q50,q90
inline Table predictions(const Eigen::VectorXd& truth, const Eigen::MatrixXd& q3) {
  if (q3.cols() != 3 || q3.rows() != truth.size()) throw ContractError("predictions need three quantile columns");
  Table t({"row", "y", "q10", "q50", "q90"});
  for (Eigen::Index b = 0; b < truth.size(); ++b)
    t.add({std::to_string(b), num(truth(b)), num(q3(b, 0)), num(q3(b, 1)), num(q3(b, 2))});
  return t;
}

// slice,level,coverage
inline void append_calibration(Table& t, const CalibrationCurve& c) {
  for (std::size_t i = 0; i < c.levels.size(); ++i) t.add({text(c.slice), num(c.levels[i]), num(c.coverage[i])});
}

inline Table calibration(std::span<const CalibrationCurve> curves) {
  Table t({"slice", "level", "coverage"});
  for (const auto& c : curves) append_calibration(t, c);
  return t;
}

inline Table calibration(const CalibrationCurve& curve) { return calibration(std::span(&curve, 1)); }

// epoch,train_crps,val_crps  (wall time is left out so reruns are byte-identical)
inline Table train_report(const TrainReport& r) {
  Table t({"epoch", "train_crps", "val_crps"});
  for (std::size_t e = 0; e < r.epochs.size(); ++e)
    t.add({std::to_string(e + 1), num(r.epochs[e].train_crps), num(r.epochs[e].val_crps)});
  return t;
}

// rank,order,plan,val_crps,parameters,epochs,status,diagnostic
inline Table leaderboard(std::span<const LeaderboardEntry> entries) {
  Table t({"rank", "order", "plan", "val_crps", "parameters", "epochs", "status", "diagnostic"});
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    t.add({std::to_string(i + 1), std::to_string(e.order), text(e.plan.to_string()), num(e.val_crps),
           std::to_string(e.parameters), std::to_string(e.epochs), e.ok ? "ok" : "failed", text(e.diagnostic)});
  }
  return t;
}

// x,level,q -- long format, one row per (x point, level), x-major.
inline Table quantile_bands(std::span<const double> xs, std::span<const double> levels, const Eigen::MatrixXd& q) {
  if (q.rows() != static_cast<Eigen::Index>(xs.size()) || q.cols() != static_cast<Eigen::Index>(levels.size()))
    throw ContractError("quantile band matrix shape does not match the grid");
  Table t({"x", "level", "q"});
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < levels.size(); ++j)
      t.add({num(xs[i]), num(levels[j]), num(q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))});
  return t;
}

// step,y,<one column per level>. `truth` may be empty (pure rollout).
inline Table forecast(std::span<const std::size_t> steps, std::span<const double> truth, std::span<const double> levels,
                      const Eigen::MatrixXd& q) {
  if (q.rows() != static_cast<Eigen::Index>(steps.size()) || q.cols() != static_cast<Eigen::Index>(levels.size()) ||
      (!truth.empty() && truth.size() != steps.size()))
    throw ContractError("forecast matrix shape does not match steps and levels");
  std::vector<std::string> header{"step", "y"};
  for (double a : levels) header.push_back(level_label(a));
  Table t(header);
  for (std::size_t s = 0; s < steps.size(); ++s) {
    std::vector<std::string> row{std::to_string(steps[s]), truth.empty() ? "" : num(truth[s])};
    for (Eigen::Index j = 0; j < q.cols(); ++j) row.push_back(num(q(static_cast<Eigen::Index>(s), j)));
    t.add(row);
  }
  return t;
}

/// Features plus target, as written by `synth`.
inline Table dataset(const Dataset& ds) {
  std::vector<std::string> header;
  for (Eigen::Index c = 0; c < ds.width(); ++c)
    header.push_back(c < static_cast<Eigen::Index>(ds.feature_names.size()) ? ds.feature_names[static_cast<std::size_t>(c)]
                                                                            : "x" + std::to_string(c));
  header.push_back(ds.target_name.empty() ? "y" : ds.target_name);
  Table t(header);
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    std::vector<std::string> row;
    for (Eigen::Index c = 0; c < ds.width(); ++c) row.push_back(num(ds.features(r, c)));
    row.push_back(num(ds.targets(r)));
    t.add(row);
  }
  return t;
}

}  // namespace nss::csv
