// Copyright 2026 The NSS Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "nss/normal.hpp"
#include "nss/random.hpp"
#include "oracles.hpp"

TEST(Normal, QuantileMatchesBisectionOracle) {
  double worst = 0.0;
  for (int i = 1; i < 2000; ++i) {
    const double p = i / 2000.0;
    worst = std::max(worst, std::abs(nss::normal::quantile(p) - oracle::inverse_phi(p)));
  }
  // tail points
  for (double p : {1e-12, 1e-9, 1e-6, 1e-3, 0.02425, 0.97575, 1 - 1e-6, 1 - 1e-9}) {
    worst = std::max(worst, std::abs(nss::normal::quantile(p) - oracle::inverse_phi(p)));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Normal, KnownValues) {
  EXPECT_NEAR(nss::normal::quantile(0.975), 1.959964, 1e-5);
  EXPECT_NEAR(nss::normal::quantile(0.8413447), 1.0, 1e-3);
  EXPECT_EQ(nss::normal::quantile(0.5), 0.0);
  EXPECT_NEAR(nss::normal::cdf(1.0), 0.8413447460685429, 1e-15);
  EXPECT_NEAR(nss::normal::pdf(0.0), 1.0 / std::sqrt(2.0 * M_PI), 1e-16);
}

TEST(Normal, CdfAgreesWithQuadratureOfPdf) {
  // integrate the density from far in the tail
  const double area = oracle::simpson([](double x) { return nss::normal::pdf(x); }, -12.0, 1.0);
  EXPECT_NEAR(area, nss::normal::cdf(1.0), 1e-12);
}

TEST(Normal, EndpointsAreInfinite) {
  EXPECT_EQ(nss::normal::quantile(0.0), -INFINITY);
  EXPECT_EQ(nss::normal::quantile(1.0), INFINITY);
}

TEST(MixSeed, StreamsDiffer) {
  EXPECT_NE(nss::mix_seed(1, 0), nss::mix_seed(1, 1));
  EXPECT_NE(nss::mix_seed(1, 0), nss::mix_seed(2, 0));
  EXPECT_EQ(nss::mix_seed(7, 3), nss::mix_seed(7, 3));
}
