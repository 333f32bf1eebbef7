// Copyright 2026 The NSS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nss/errors.hpp"
#include "nss/normalization.hpp"
#include "nss/random.hpp"

namespace nss {

enum class Split { all, train, val, test };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::all: return "all";
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

struct Dataset {
  Eigen::MatrixXd features;  // n x d
  Eigen::VectorXd targets;   // n
  std::vector<std::string> feature_names;
  std::string target_name = "y";
  Split split = Split::all;
  // Present once the dataset has been z-scored; always fitted on a training split.
  std::optional<NormalizationStats> stats;
  // Row-level notes collected while loading (skipped rows).
  std::vector<std::string> diagnostics;

  Eigen::Index rows() const { return features.rows(); }
  Eigen::Index width() const { return features.cols(); }
  bool normalized() const { return stats.has_value(); }

  void validate() const {
    if (features.rows() < 1) throw DataError("dataset has no rows");
    if (features.cols() < 1) throw DataError("dataset has no feature columns");
    if (targets.size() != features.rows()) throw DataError("feature and target row counts differ");
    if (!feature_names.empty() && static_cast<Eigen::Index>(feature_names.size()) != features.cols())
      throw DataError("feature name count does not match feature columns");
  }

  Dataset subset(const std::vector<Eigen::Index>& indices, Split tag) const {
    Dataset out;
    out.features.resize(static_cast<Eigen::Index>(indices.size()), features.cols());
    out.targets.resize(static_cast<Eigen::Index>(indices.size()));
    for (std::size_t r = 0; r < indices.size(); ++r) {
      out.features.row(static_cast<Eigen::Index>(r)) = features.row(indices[r]);
      out.targets(static_cast<Eigen::Index>(r)) = targets(indices[r]);
    }
    out.feature_names = feature_names;
    out.target_name = target_name;
    out.split = tag;
    out.stats = stats;
    return out;
  }
};

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

struct CsvOptions {
  std::string target;
  std::string datetime;               // optional ordering column, excluded from features
  std::vector<std::string> exclude;   // other non-feature columns
  bool skip_bad_rows = false;         // false: the first bad row is an error
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell += c;
    }
  }
  cells.push_back(std::move(cell));
  for (auto& s : cells) {
    const auto first = s.find_first_not_of(" \t");
    const auto last = s.find_last_not_of(" \t");
    s = first == std::string::npos ? std::string{} : s.substr(first, last - first + 1);
  }
  return cells;
}

inline std::optional<double> parse_cell(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || text.empty() || !std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace detail

inline Dataset load_csv(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);

  auto column_of = [&](const std::string& name) -> std::optional<std::size_t> {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) return std::nullopt;
    return static_cast<std::size_t>(it - header.begin());
  };
  if (options.target.empty()) throw DataError("no target column given");
  const auto target_col = column_of(options.target);
  if (!target_col) throw DataError("target column '" + options.target + "' not found in '" + path + "'");
  std::optional<std::size_t> time_col;
  if (!options.datetime.empty()) {
    time_col = column_of(options.datetime);
    if (!time_col) throw DataError("datetime column '" + options.datetime + "' not found in '" + path + "'");
  }
  std::vector<std::size_t> feature_cols;
  Dataset ds;
  ds.target_name = options.target;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == *target_col || (time_col && c == *time_col)) continue;
    if (std::find(options.exclude.begin(), options.exclude.end(), header[c]) != options.exclude.end())
      continue;
    feature_cols.push_back(c);
    ds.feature_names.push_back(header[c]);
  }
  if (feature_cols.empty()) throw DataError("'" + path + "' has no feature columns besides the target");

  struct Row {
    std::string key;
    std::vector<double> values;
    double target;
  };
  std::vector<Row> rows;
  std::size_t row_number = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row_number;
    const auto cells = detail::split_csv_line(line);
    std::string problem;
    Row row;
    if (cells.size() != header.size()) {
      problem = "has " + std::to_string(cells.size()) + " cells, header has " + std::to_string(header.size());
    } else {
      for (std::size_t c : feature_cols) {
        const auto v = detail::parse_cell(cells[c]);
        if (!v) {
          problem = "column '" + header[c] + "' value '" + cells[c] + "' is not a finite number";
          break;
        }
        row.values.push_back(*v);
      }
      if (problem.empty()) {
        const auto t = detail::parse_cell(cells[*target_col]);
        if (!t) problem = "target value '" + cells[*target_col] + "' is not a finite number";
        else row.target = *t;
      }
      if (time_col) row.key = cells[*time_col];
    }
    if (!problem.empty()) {
      const std::string msg = "row " + std::to_string(row_number) + ": " + problem;
      if (!options.skip_bad_rows) throw DataError("'" + path + "' " + msg);
      ds.diagnostics.push_back("skipped " + msg);
      continue;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("'" + path + "' has no usable data rows");
  if (time_col)
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.key < b.key; });

  ds.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(feature_cols.size()));
  ds.targets.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < feature_cols.size(); ++c)
      ds.features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r].values[c];
    ds.targets(static_cast<Eigen::Index>(r)) = rows[r].target;
  }
  return ds;
}

// ---------------------------------------------------------------------------
// z-score normalization
// ---------------------------------------------------------------------------

/// Fits z-score statistics. Only a training split may be used.
inline NormalizationStats fit_normalization(const Dataset& train) {
  if (train.split != Split::train)
    throw ContractError("normalization statistics must be fitted on the training split, got '" +
                        std::string(to_string(train.split)) + "'");
  if (train.normalized()) throw ContractError("dataset is already normalized");
  train.validate();
  return NormalizationStats::fit(train.features, train.targets, train.feature_names, train.target_name);
}

inline Dataset normalize(const Dataset& ds, const NormalizationStats& stats) {
  if (ds.normalized()) throw ContractError("dataset is already normalized");
  Dataset out = ds;
  out.features = stats.normalize_features(ds.features);
  out.targets = stats.normalize_targets(ds.targets);
  out.stats = stats;
  return out;
}

inline Dataset denormalize(const Dataset& ds) {
  if (!ds.normalized()) throw ContractError("dataset is not normalized");
  Dataset out = ds;
  out.features = ds.stats->denormalize_features(ds.features);
  out.targets = ds.stats->denormalize_targets(ds.targets);
  out.stats.reset();
  return out;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

struct Splits {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Split sizes: floor(n * f_i), then the remaining rows go one each to the
/// largest fractional parts (earlier splits win ties).
inline std::array<Eigen::Index, 3> split_sizes(Eigen::Index n, const std::array<double, 3>& fractions) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split fractions sum to " + std::to_string(total) + ", expected 1");
  std::array<Eigen::Index, 3> sizes{};
  std::array<double, 3> rest{};
  Eigen::Index assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    const double exact = static_cast<double>(n) * fractions[i];
    sizes[i] = static_cast<Eigen::Index>(std::floor(exact + 1e-9));
    rest[i] = exact - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rest[a] > rest[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % 3]];
  return sizes;
}

inline Splits split_dataset(const Dataset& ds, const std::array<double, 3>& fractions, std::uint64_t seed,
                            bool chronological = false) {
  ds.validate();
  if (ds.normalized()) throw ContractError("split before normalizing so statistics come from training rows only");
  const auto sizes = split_sizes(ds.rows(), fractions);
  for (std::size_t i = 0; i < 3; ++i)
    if (sizes[i] == 0)
      throw DataError("split " + std::to_string(i) + " would be empty for " + std::to_string(ds.rows()) + " rows");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(ds.rows()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  if (!chronological) {
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
  }
  auto take = [&](std::size_t from, Eigen::Index count) {
    return std::vector<Eigen::Index>(idx.begin() + static_cast<long>(from),
                                     idx.begin() + static_cast<long>(from) + count);
  };
  const auto a = static_cast<std::size_t>(sizes[0]);
  const auto b = a + static_cast<std::size_t>(sizes[1]);
  return {ds.subset(take(0, sizes[0]), Split::train), ds.subset(take(a, sizes[1]), Split::val),
          ds.subset(take(b, sizes[2]), Split::test)};
}

/// Splits, fits z-score statistics on the training rows, and normalizes all three.
inline Splits prepare_splits(const Dataset& ds, const std::array<double, 3>& fractions, std::uint64_t seed,
                             bool chronological = false) {
  Splits raw = split_dataset(ds, fractions, seed, chronological);
  const auto stats = fit_normalization(raw.train);
  return {normalize(raw.train, stats), normalize(raw.val, stats), normalize(raw.test, stats)};
}

// ---------------------------------------------------------------------------
// Synthetic heteroscedastic regression: x ~ U[-2, 2],
// y | x ~ Normal(mean 0.3 sin(3x), variance 0.2 x^2).
// ---------------------------------------------------------------------------

inline double synth_mean(double x) { return 0.3 * std::sin(3.0 * x); }
inline double synth_std(double x) { return std::sqrt(0.2) * std::abs(x); }

inline Dataset synth_at(const std::vector<double>& xs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset ds;
  ds.features.resize(static_cast<Eigen::Index>(xs.size()), 1);
  ds.targets.resize(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    ds.features(r, 0) = xs[i];
    ds.targets(r) = synth_mean(xs[i]) + synth_std(xs[i]) * noise(rng);
  }
  ds.feature_names = {"x"};
  ds.target_name = "y";
  return ds;
}

inline Dataset synth_regression(std::size_t n = 2000, std::uint64_t seed = 0) {
  if (n < 1) throw ConfigError("synthetic dataset needs n >= 1");
  std::mt19937_64 rng(mix_seed(seed, 1));
  std::uniform_real_distribution<double> uniform(-2.0, 2.0);
  std::vector<double> xs(n);
  for (auto& x : xs) x = uniform(rng);
  return synth_at(xs, seed);
}

}  // namespace nss
