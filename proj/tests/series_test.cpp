// Copyright 2026 The NSS Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "nss/series.hpp"

namespace {

// Single-stage c-spline whose median equals the first input: q(x, a) = x0 + a - 0.5.
nss::QuantileModel last_value_model(int lag) {
  nss::NetworkSpec spec;
  spec.input_width = lag;
  spec.hidden = {};
  spec.head = {nss::BasisKind::cspline, 1};
  nss::Network net(spec, 0);
  auto& layer = net.mutable_layers()[0];
  layer.weight.setZero();
  layer.weight(0, lag - 1) = 1.0;  // most recent lag
  layer.bias << -0.5, nss::inverse_softplus(1.0 - nss::kPositiveFloor), 0.0;
  return nss::QuantileModel(nss::CompositionPlan::parse("sum:cspline/1"), {net},
                            nss::NormalizationStats::identity(lag));
}

}  // namespace

TEST(Lagged, FeatureLayout) {
  const std::vector<double> y{1, 2, 3, 4, 5};
  const auto ds = nss::make_lagged(y, Eigen::MatrixXd(0, 0), 2);
  ASSERT_EQ(ds.rows(), 3);
  EXPECT_EQ(ds.features.row(0), Eigen::RowVector2d(1, 2));
  EXPECT_EQ(ds.targets(0), 3.0);
  EXPECT_EQ(ds.features.row(2), Eigen::RowVector2d(3, 4));
  EXPECT_EQ(ds.feature_names, (std::vector<std::string>{"lag_2", "lag_1"}));
}

TEST(Lagged, CovariatesAlignWithTarget) {
  const std::vector<double> y{1, 2, 3, 4};
  Eigen::MatrixXd cov(4, 1);
  cov << 10, 20, 30, 40;
  const auto ds = nss::make_lagged(y, cov, 1, {"temp"});
  EXPECT_EQ(ds.features.row(0), Eigen::RowVector2d(1, 20));
  EXPECT_EQ(ds.feature_names.back(), "temp");
}

TEST(Lagged, TooShortIsDataError) {
  const std::vector<double> y{1, 2};
  EXPECT_THROW(nss::make_lagged(y, Eigen::MatrixXd(0, 0), 2), nss::DataError);
  EXPECT_THROW(nss::make_lagged(y, Eigen::MatrixXd(0, 0), 0), nss::ConfigError);
}

TEST(Rollout, MedianFeedsBack) {
  const auto model = last_value_model(2);
  const std::vector<double> history{0.0, 1.0};
  const std::vector<double> levels{0.1, 0.5, 0.9};
  const Eigen::MatrixXd out = nss::rollout(model, history, Eigen::MatrixXd(0, 0), 2, 3, levels);
  for (int s = 0; s < 3; ++s) {
    EXPECT_NEAR(out(s, 1), 1.0, 1e-12);  // median of last value is the last value
    EXPECT_NEAR(out(s, 0), 0.6, 1e-12);
    EXPECT_NEAR(out(s, 2), 1.4, 1e-12);
  }
  const std::vector<double> no_median{0.1, 0.9};
  EXPECT_THROW(nss::rollout(model, history, Eigen::MatrixXd(0, 0), 2, 1, no_median), nss::ConfigError);
  EXPECT_THROW(nss::rollout(model, std::vector<double>{1.0}, Eigen::MatrixXd(0, 0), 2, 1, levels), nss::DataError);
}

TEST(OneStep, ConditionsOnObservedLags) {
  const auto model = last_value_model(2);
  const std::vector<double> y{0, 1, 5, 2, 7};
  const std::vector<double> levels{0.5};
  const Eigen::MatrixXd q = nss::one_step_forecast(model, y, Eigen::MatrixXd(0, 0), 2, 3, 5, levels);
  ASSERT_EQ(q.rows(), 2);
  EXPECT_NEAR(q(0, 0), 5.0, 1e-12);
  EXPECT_NEAR(q(1, 0), 2.0, 1e-12);
}

TEST(LoadSeries, SortsByDatetime) {
  const auto path = (std::filesystem::temp_directory_path() / "nss_series_test.csv").string();
  std::ofstream(path) << "date,sales,temp\n2024-01-03,3,30\n2024-01-01,1,10\n2024-01-02,2,20\n";
  const auto s = nss::load_series(path, "sales", {"temp"}, "date");
  EXPECT_EQ(s.values, (std::vector<double>{1, 2, 3}));
  EXPECT_EQ(s.covariates(2, 0), 30.0);
  EXPECT_THROW(nss::load_series(path, "nope", {}), nss::DataError);
}
