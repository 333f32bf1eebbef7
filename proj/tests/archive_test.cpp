// Copyright 2026 The NSS Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>

#include "nss/archive.hpp"
#include "nss/training.hpp"

namespace {

nss::QuantileModel trained_model(const std::string& plan) {
  const auto splits = nss::prepare_splits(nss::synth_regression(200, 1), {0.6, 0.2, 0.2}, 1);
  nss::QuantileModel m(nss::plan_from_name(plan, 4), 1, {{6, 5}, nss::Activation::tanh}, 2);
  nss::TrainConfig cfg;
  cfg.epochs = 2;
  nss::fit(m, splits.train, splits.val, cfg);
  return m;
}

}  // namespace

TEST(Fnv, KnownVectors) {
  EXPECT_EQ(nss::fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(nss::fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(nss::fnv1a64("foobar"), 0x85944171f73967e8ULL);
}

TEST(Archive, RoundTripIsBitExact) {
  for (const char* plan : {"nss-sum", "nss-alpha-chain", "nss-x-chain", "gaussian"}) {
    const auto m = trained_model(plan);
    const std::string text = nss::serialize_model(m, {0xabcdefULL, 42});
    const auto back = nss::parse_model(text);
    EXPECT_EQ(back.format_version, nss::kArchiveVersion);
    EXPECT_EQ(back.fingerprint.config_hash, 0xabcdefULL);
    EXPECT_EQ(back.fingerprint.seed, 42u);
    EXPECT_EQ(back.model.plan(), m.plan());
    EXPECT_EQ(nss::serialize_model(back.model, {0xabcdefULL, 42}), text);
    const Eigen::MatrixXd x = Eigen::MatrixXd::Random(10, 1);
    const auto levels = std::vector<double>{0.05, 0.5, 0.95};
    EXPECT_EQ(back.model.predict(x, levels), m.predict(x, levels)) << plan;
  }
}

TEST(Archive, KeepsColumnNames) {
  auto m = trained_model("c-spline");
  auto stats = m.stats();
  stats.feature_names = {"odd name, with=%"};
  stats.target_name = "price";
  m.set_stats(stats);
  const auto back = nss::parse_model(nss::serialize_model(m, {}));
  EXPECT_EQ(back.model.stats().feature_names, stats.feature_names);
  EXPECT_EQ(back.model.stats().target_name, "price");
}

TEST(Archive, TamperingIsDetected) {
  const std::string text = nss::serialize_model(trained_model("nss-sum"), {});
  std::string edited = text;
  const auto pos = edited.find("bias ");
  edited[pos + 8] = edited[pos + 8] == '0' ? '1' : '0';
  EXPECT_THROW(nss::parse_model(edited), nss::ArchiveError);
  EXPECT_THROW(nss::parse_model(text.substr(0, text.size() / 2)), nss::ArchiveError);
  EXPECT_THROW(nss::parse_model("hello\n"), nss::ArchiveError);
}

TEST(Archive, NewerVersionIsRejected) {
  std::string text = nss::serialize_model(trained_model("c-spline"), {});
  text.replace(text.find("format-version 1"), 16, "format-version 9");
  try {
    nss::parse_model(text);
    FAIL();
  } catch (const nss::ArchiveError& e) {
    EXPECT_NE(std::string(e.what()).find("newer"), std::string::npos);
  }
}

TEST(Archive, FileRoundTrip) {
  const auto path = (std::filesystem::temp_directory_path() / "nss_archive_test.nssm").string();
  const auto m = trained_model("nss-x-chain");
  nss::save_model(m, path, {1, 2});
  EXPECT_EQ(nss::serialize_model(nss::load_model(path).model, {1, 2}), nss::serialize_model(m, {1, 2}));
  EXPECT_THROW(nss::load_model("/nonexistent/model.nssm"), nss::DataError);
}
