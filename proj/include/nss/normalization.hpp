// Copyright 2026 The NSS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "nss/errors.hpp"

namespace nss {

/// Per-column z-score statistics (population standard deviation).
struct NormalizationStats {
  Eigen::VectorXd feature_mean;
  Eigen::VectorXd feature_std;
  double target_mean = 0.0;
  double target_std = 1.0;
  std::vector<std::string> feature_names;  // optional; checked against input CSVs
  std::string target_name;

  static NormalizationStats identity(Eigen::Index width) {
    return {Eigen::VectorXd::Zero(width), Eigen::VectorXd::Ones(width), 0.0, 1.0, {}, {}};
  }

  static NormalizationStats fit(const Eigen::MatrixXd& features, const Eigen::VectorXd& targets,
                                const std::vector<std::string>& names = {},
                                const std::string& target_name = "target") {
    if (features.rows() == 0) throw DataError("cannot fit normalization on an empty split");
    const double n = static_cast<double>(features.rows());
    NormalizationStats s;
    s.feature_mean = features.colwise().mean().transpose();
    s.feature_std.resize(features.cols());
    for (Eigen::Index c = 0; c < features.cols(); ++c) {
      const double var = (features.col(c).array() - s.feature_mean(c)).square().sum() / n;
      s.feature_std(c) = std::sqrt(var);
      if (!(s.feature_std(c) > 0.0)) {
        const std::string name = static_cast<std::size_t>(c) < names.size()
                                     ? names[static_cast<std::size_t>(c)]
                                     : "#" + std::to_string(c);
        throw DataError("feature column '" + name + "' is constant on the training split");
      }
    }
    s.target_mean = targets.mean();
    s.target_std = std::sqrt((targets.array() - s.target_mean).square().sum() / n);
    if (!(s.target_std > 0.0))
      throw DataError("target column '" + target_name + "' is constant on the training split");
    if (static_cast<Eigen::Index>(names.size()) == features.cols()) s.feature_names = names;
    s.target_name = target_name;
    return s;
  }

  Eigen::MatrixXd normalize_features(const Eigen::MatrixXd& x) const {
    check_width(x.cols());
    return ((x.rowwise() - feature_mean.transpose()).array().rowwise() /
            feature_std.transpose().array())
        .matrix();
  }

  Eigen::MatrixXd denormalize_features(const Eigen::MatrixXd& x) const {
    check_width(x.cols());
    return ((x.array().rowwise() * feature_std.transpose().array()).matrix().rowwise() +
            feature_mean.transpose());
  }

  double normalize_target(double y) const { return (y - target_mean) / target_std; }
  double denormalize_target(double z) const { return z * target_std + target_mean; }

  Eigen::VectorXd normalize_targets(const Eigen::VectorXd& y) const {
    return ((y.array() - target_mean) / target_std).matrix();
  }
  Eigen::VectorXd denormalize_targets(const Eigen::VectorXd& z) const {
    return (z.array() * target_std + target_mean).matrix();
  }

 private:
  void check_width(Eigen::Index cols) const {
    if (cols != feature_mean.size())
      throw ContractError("normalization stats cover " + std::to_string(feature_mean.size()) +
                          " features, got " + std::to_string(cols));
  }
};

}  // namespace nss
