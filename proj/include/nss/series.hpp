// Copyright 2026 The NSS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Lagged-feature construction and autoregressive prediction for one-step
// forecasting. Feature layout per step t: [y_{t-L}, ..., y_{t-1}, cov_t...].

#include <Eigen/Dense>
#include <algorithm>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nss/composition.hpp"
#include "nss/data.hpp"
#include "nss/errors.hpp"

namespace nss {

struct SeriesSpec {
  std::size_t lag = 28;
  std::vector<std::string> covariates;
  std::size_t rollout = 1;  // steps fed back autoregressively; 1 = one-step

  void validate() const {
    if (lag < 1) throw ConfigError("lag window must be >= 1");
    if (rollout < 1) throw ConfigError("rollout length must be >= 1");
  }
};

struct Series {
  std::vector<double> values;
  Eigen::MatrixXd covariates;  // T x c, c may be 0
  std::vector<std::string> covariate_names;
};

/// Reads one value column plus optional covariate columns, ordered by the
/// datetime column when one is given.
inline Series load_series(const std::string& path, const std::string& column, const std::vector<std::string>& covariates,
                          const std::string& datetime = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  auto col = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("column '" + name + "' not found in '" + path + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t value_col = col(column);
  std::vector<std::size_t> cov_cols;
  for (const auto& c : covariates) cov_cols.push_back(col(c));
  const std::optional<std::size_t> time_col = datetime.empty() ? std::nullopt : std::optional(col(datetime));

  struct Row {
    std::string key;
    double value;
    std::vector<double> cov;
  };
  std::vector<Row> rows;
  std::size_t row_number = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row_number;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != header.size())
      throw DataError("'" + path + "' row " + std::to_string(row_number) + " has " + std::to_string(cells.size()) +
                      " cells, header has " + std::to_string(header.size()));
    auto number = [&](std::size_t c) {
      const auto v = detail::parse_cell(cells[c]);
      if (!v)
        throw DataError("'" + path + "' row " + std::to_string(row_number) + ": column '" + header[c] + "' value '" +
                        cells[c] + "' is not a finite number");
      return *v;
    };
    Row row;
    row.value = number(value_col);
    for (std::size_t c : cov_cols) row.cov.push_back(number(c));
    if (time_col) row.key = cells[*time_col];
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("'" + path + "' has no data rows");
  if (time_col) std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.key < b.key; });
  Series s;
  s.covariate_names = covariates;
  s.covariates.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cov_cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    s.values.push_back(rows[r].value);
    for (std::size_t c = 0; c < cov_cols.size(); ++c)
      s.covariates(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r].cov[c];
  }
  return s;
}

inline std::vector<std::string> lagged_feature_names(std::size_t lag, const std::vector<std::string>& covariates) {
  std::vector<std::string> names;
  for (std::size_t k = lag; k >= 1; --k) names.push_back("lag_" + std::to_string(k));
  names.insert(names.end(), covariates.begin(), covariates.end());
  return names;
}

/// Rows t = lag .. T-1 with target y_t. `covariates` is T x c (c may be 0).
inline Dataset make_lagged(std::span<const double> series, const Eigen::MatrixXd& covariates, std::size_t lag,
                           const std::vector<std::string>& covariate_names = {}) {
  if (lag < 1) throw ConfigError("lag window must be >= 1");
  if (series.size() <= lag)
    throw DataError("series of length " + std::to_string(series.size()) + " is too short for lag " +
                    std::to_string(lag));
  if (covariates.cols() > 0 && covariates.rows() != static_cast<Eigen::Index>(series.size()))
    throw DataError("covariates must have one row per series step");
  const auto rows = static_cast<Eigen::Index>(series.size() - lag);
  const auto width = static_cast<Eigen::Index>(lag) + covariates.cols();
  Dataset ds;
  ds.features.resize(rows, width);
  ds.targets.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto t = static_cast<std::size_t>(r) + lag;
    for (std::size_t k = 0; k < lag; ++k) ds.features(r, static_cast<Eigen::Index>(k)) = series[t - lag + k];
    if (covariates.cols() > 0) ds.features.row(r).tail(covariates.cols()) = covariates.row(static_cast<Eigen::Index>(t));
    ds.targets(r) = series[t];
  }
  std::vector<std::string> names = covariate_names;
  for (Eigen::Index c = static_cast<Eigen::Index>(names.size()); c < covariates.cols(); ++c)
    names.push_back("cov_" + std::to_string(c));
  ds.feature_names = lagged_feature_names(lag, names);
  ds.target_name = "y";
  return ds;
}

inline Eigen::Index median_column(std::span<const double> levels) {
  const auto it = std::find_if(levels.begin(), levels.end(), [](double a) { return std::abs(a - 0.5) < 1e-12; });
  if (it == levels.end()) throw ConfigError("forecast levels must include 0.5 for autoregressive feedback");
  return static_cast<Eigen::Index>(it - levels.begin());
}

/// Autoregressive rollout in original units: each step's median prediction
/// becomes the newest lag of the next step. `history` supplies at least
/// `lag` observed values (the most recent last); `future_covariates` has one
/// row per step. Returns steps x levels.
inline Eigen::MatrixXd rollout(const QuantileModel& model, std::span<const double> history,
                               const Eigen::MatrixXd& future_covariates, std::size_t lag, std::size_t steps,
                               std::span<const double> levels) {
  if (history.size() < lag)
    throw DataError("rollout needs " + std::to_string(lag) + " history values, got " + std::to_string(history.size()));
  if (future_covariates.cols() > 0 && future_covariates.rows() < static_cast<Eigen::Index>(steps))
    throw DataError("rollout needs covariates for every step");
  if (static_cast<Eigen::Index>(lag) + future_covariates.cols() != model.input_width())
    throw ContractError("lag window plus covariates does not match the model input width");
  const Eigen::Index med = median_column(levels);
  std::vector<double> window(history.end() - static_cast<long>(lag), history.end());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(steps), static_cast<Eigen::Index>(levels.size()));
  Eigen::MatrixXd x(1, model.input_width());
  for (std::size_t s = 0; s < steps; ++s) {
    for (std::size_t k = 0; k < lag; ++k) x(0, static_cast<Eigen::Index>(k)) = window[k];
    if (future_covariates.cols() > 0)
      x.row(0).tail(future_covariates.cols()) = future_covariates.row(static_cast<Eigen::Index>(s));
    out.row(static_cast<Eigen::Index>(s)) = model.predict(x, levels).row(0);
    window.erase(window.begin());
    window.push_back(out(static_cast<Eigen::Index>(s), med));
  }
  return out;
}

/// One-step-ahead predictions for steps [first, last) of an observed series,
/// each conditioned on the true preceding lags. Returns (last-first) x levels.
inline Eigen::MatrixXd one_step_forecast(const QuantileModel& model, std::span<const double> series,
                                         const Eigen::MatrixXd& covariates, std::size_t lag, std::size_t first,
                                         std::size_t last, std::span<const double> levels) {
  if (first < lag) throw DataError("first forecast step must have a full lag window");
  if (last > series.size() || first >= last) throw DataError("forecast range is empty or exceeds the series");
  const Dataset lagged = make_lagged(series.subspan(0, last),
                                     covariates.cols() > 0 ? Eigen::MatrixXd(covariates.topRows(static_cast<Eigen::Index>(last)))
                                                           : Eigen::MatrixXd(0, 0),
                                     lag);
  const auto offset = static_cast<Eigen::Index>(first - lag);
  return model.predict(lagged.features.bottomRows(lagged.rows() - offset), levels);
}

}  // namespace nss
