// Copyright 2026 The NSS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Text model archive. Layout is documented in docs/archive-format.md; every
// double is written as the 16 lowercase hex digits of its IEEE-754 bit
// pattern, so a save/load round trip is bit exact.

#include <bit>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nss/composition.hpp"
#include "nss/errors.hpp"

namespace nss {

inline constexpr int kArchiveVersion = 1;
inline constexpr const char* kArchiveMagic = "nss-model-archive";

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t hash = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string hex_double(double v) { return hex64(std::bit_cast<std::uint64_t>(v)); }

struct ModelFingerprint {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

struct ModelArchive {
  int format_version = kArchiveVersion;
  QuantileModel model;
  ModelFingerprint fingerprint;
};

namespace detail {

inline std::uint64_t parse_hex64(const std::string& text) {
  if (text.size() != 16) throw ArchiveError("malformed hex value '" + text + "'");
  std::uint64_t v = 0;
  for (char c : text) {
    v <<= 4;
    if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
    else throw ArchiveError("malformed hex value '" + text + "'");
  }
  return v;
}

inline double parse_hex_double(const std::string& text) { return std::bit_cast<double>(parse_hex64(text)); }

class LineReader {
 public:
  explicit LineReader(const std::string& body) : in_(body) {}

  std::istringstream next(const std::string& keyword) {
    std::string line;
    if (!std::getline(in_, line)) throw ArchiveError("archive truncated before '" + keyword + "'");
    std::istringstream fields(line);
    std::string key;
    fields >> key;
    if (key != keyword) throw ArchiveError("expected '" + keyword + "', found '" + key + "'");
    return fields;
  }

 private:
  std::istringstream in_;
};

template <typename T>
T read_field(std::istringstream& in, const char* what) {
  T v{};
  if (!(in >> v)) throw ArchiveError(std::string("missing ") + what);
  return v;
}

inline std::vector<double> read_doubles(std::istringstream& in, std::size_t n) {
  std::vector<double> out(n);
  for (auto& v : out) v = parse_hex_double(read_field<std::string>(in, "value"));
  return out;
}

// Names are written as '=' + percent-encoded bytes, so empty names and
// names with spaces survive whitespace tokenizing.
inline std::string encode_name(const std::string& name) {
  std::string out = "=";
  for (unsigned char c : name) {
    if (c <= 0x20 || c >= 0x7f || c == '%') {
      char buf[4];
      std::snprintf(buf, sizeof buf, "%%%02x", c);
      out += buf;
    } else {
      out += static_cast<char>(c);
    }
  }
  return out;
}

inline std::string decode_name(const std::string& token) {
  if (token.empty() || token[0] != '=') throw ArchiveError("malformed name token '" + token + "'");
  std::string out;
  for (std::size_t i = 1; i < token.size(); ++i) {
    if (token[i] != '%') {
      out += token[i];
      continue;
    }
    if (i + 2 >= token.size()) throw ArchiveError("malformed name token '" + token + "'");
    unsigned v = 0;
    if (std::sscanf(token.substr(i + 1, 2).c_str(), "%2x", &v) != 1) throw ArchiveError("malformed name token '" + token + "'");
    out += static_cast<char>(v);
    i += 2;
  }
  return out;
}

inline std::string join_doubles(const double* data, std::size_t n) {
  std::string out;
  out.reserve(n * 17);
  for (std::size_t i = 0; i < n; ++i) {
    out += ' ';
    out += hex_double(data[i]);
  }
  return out;
}

}  // namespace detail

inline std::string serialize_model(const QuantileModel& model, const ModelFingerprint& fingerprint) {
  std::ostringstream out;
  const auto& stats = model.stats();
  const auto d = static_cast<std::size_t>(model.input_width());
  out << kArchiveMagic << '\n';
  out << "format-version " << kArchiveVersion << '\n';
  out << "plan " << model.plan().to_string() << '\n';
  out << "input-width " << d << '\n';
  out << "feature-mean" << detail::join_doubles(stats.feature_mean.data(), d) << '\n';
  out << "feature-std" << detail::join_doubles(stats.feature_std.data(), d) << '\n';
  out << "target " << hex_double(stats.target_mean) << ' ' << hex_double(stats.target_std) << '\n';
  out << "names " << stats.feature_names.size() << ' ' << detail::encode_name(stats.target_name);
  for (const auto& n : stats.feature_names) out << ' ' << detail::encode_name(n);
  out << '\n';
  out << "fingerprint " << hex64(fingerprint.config_hash) << ' ' << fingerprint.seed << '\n';
  out << "stages " << model.networks().size() << '\n';
  for (std::size_t t = 0; t < model.networks().size(); ++t) {
    const Network& net = model.networks()[t];
    const auto& spec = net.spec();
    out << "network " << t << ' ' << to_string(spec.head.kind) << ' ' << spec.head.knots << ' ' << spec.input_width
        << ' ' << to_string(spec.activation) << ' ' << (spec.monotone_location ? 1 : 0) << ' '
        << spec.hidden.size();
    for (int h : spec.hidden) out << ' ' << h;
    out << '\n';
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      const Layer& layer = net.layers()[l];
      const RowMatrix w = layer.weight;  // row-major order on disk
      out << "weight " << w.rows() << ' ' << w.cols()
          << detail::join_doubles(w.data(), static_cast<std::size_t>(w.size())) << '\n';
      out << "bias " << layer.bias.size()
          << detail::join_doubles(layer.bias.data(), static_cast<std::size_t>(layer.bias.size())) << '\n';
    }
  }
  std::string body = out.str();
  body += "checksum " + hex64(fnv1a64(body)) + '\n';
  return body;
}

inline ModelArchive parse_model(const std::string& text) {
  // Header and version come first so newer archives fail with a version
  // error rather than a checksum or parse error.
  std::istringstream head(text);
  std::string magic, version_line;
  std::getline(head, magic);
  if (magic != kArchiveMagic) throw ArchiveError("not a model archive (bad magic line)");
  std::getline(head, version_line);
  int version = 0;
  if (std::sscanf(version_line.c_str(), "format-version %d", &version) != 1)
    throw ArchiveError("archive lacks a format-version line");
  if (version > kArchiveVersion)
    throw ArchiveError("archive format version " + std::to_string(version) + " is newer than supported version " +
                       std::to_string(kArchiveVersion));
  if (version < 1) throw ArchiveError("invalid archive format version " + std::to_string(version));

  const auto pos = text.rfind("checksum ");
  if (pos == std::string::npos || (pos > 0 && text[pos - 1] != '\n')) throw ArchiveError("archive lacks a checksum line");
  const std::string body = text.substr(0, pos);
  std::string stored = text.substr(pos + 9);
  while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r')) stored.pop_back();
  if (stored != hex64(fnv1a64(body))) throw ArchiveError("archive checksum mismatch (corrupted or edited file)");

  detail::LineReader lines(body);
  lines.next(kArchiveMagic);
  lines.next("format-version");
  auto plan_line = lines.next("plan");
  const CompositionPlan plan = CompositionPlan::parse(detail::read_field<std::string>(plan_line, "plan"));
  auto width_line = lines.next("input-width");
  const auto d = detail::read_field<std::size_t>(width_line, "input width");
  NormalizationStats stats;
  auto mean_line = lines.next("feature-mean");
  auto mean = detail::read_doubles(mean_line, d);
  auto std_line = lines.next("feature-std");
  auto stdev = detail::read_doubles(std_line, d);
  stats.feature_mean = Eigen::Map<Eigen::VectorXd>(mean.data(), static_cast<Eigen::Index>(d));
  stats.feature_std = Eigen::Map<Eigen::VectorXd>(stdev.data(), static_cast<Eigen::Index>(d));
  auto target_line = lines.next("target");
  const auto target = detail::read_doubles(target_line, 2);
  stats.target_mean = target[0];
  stats.target_std = target[1];

  auto names_line = lines.next("names");
  const auto name_count = detail::read_field<std::size_t>(names_line, "name count");
  if (name_count != 0 && name_count != d) throw ArchiveError("feature name count does not match the input width");
  stats.target_name = detail::decode_name(detail::read_field<std::string>(names_line, "target name"));
  for (std::size_t i = 0; i < name_count; ++i)
    stats.feature_names.push_back(detail::decode_name(detail::read_field<std::string>(names_line, "feature name")));

  ModelArchive archive;
  archive.format_version = version;
  auto fp_line = lines.next("fingerprint");
  archive.fingerprint.config_hash = detail::parse_hex64(detail::read_field<std::string>(fp_line, "config hash"));
  archive.fingerprint.seed = detail::read_field<std::uint64_t>(fp_line, "seed");

  auto stages_line = lines.next("stages");
  const auto stages = detail::read_field<std::size_t>(stages_line, "stage count");
  if (stages != plan.depth()) throw ArchiveError("stage count does not match the plan");
  std::vector<Network> networks;
  for (std::size_t t = 0; t < stages; ++t) {
    auto net_line = lines.next("network");
    if (detail::read_field<std::size_t>(net_line, "stage index") != t) throw ArchiveError("stages out of order");
    NetworkSpec spec;
    spec.head.kind = parse_basis_kind(detail::read_field<std::string>(net_line, "basis kind"));
    spec.head.knots = detail::read_field<int>(net_line, "knots");
    spec.input_width = detail::read_field<int>(net_line, "input width");
    spec.activation = parse_activation(detail::read_field<std::string>(net_line, "activation"));
    spec.monotone_location = detail::read_field<int>(net_line, "monotone flag") != 0;
    spec.hidden.resize(detail::read_field<std::size_t>(net_line, "hidden count"));
    for (int& h : spec.hidden) h = detail::read_field<int>(net_line, "hidden width");
    Network net(spec, 0);
    auto& layers = net.mutable_layers();
    for (auto& layer : layers) {
      auto w_line = lines.next("weight");
      const auto rows = detail::read_field<Eigen::Index>(w_line, "rows");
      const auto cols = detail::read_field<Eigen::Index>(w_line, "cols");
      if (rows != layer.weight.rows() || cols != layer.weight.cols())
        throw ArchiveError("weight shape does not match the network spec");
      auto w = detail::read_doubles(w_line, static_cast<std::size_t>(rows * cols));
      layer.weight = Eigen::Map<RowMatrix>(w.data(), rows, cols);
      auto b_line = lines.next("bias");
      const auto n = detail::read_field<Eigen::Index>(b_line, "bias size");
      if (n != layer.bias.size()) throw ArchiveError("bias size does not match the network spec");
      auto b = detail::read_doubles(b_line, static_cast<std::size_t>(n));
      layer.bias = Eigen::Map<Eigen::VectorXd>(b.data(), n);
    }
    networks.push_back(std::move(net));
  }
  try {
    archive.model = QuantileModel(plan, std::move(networks), std::move(stats));
  } catch (const ContractError& e) {
    throw ArchiveError(std::string("inconsistent archive: ") + e.what());
  }
  return archive;
}

inline void save_model(const QuantileModel& model, const std::string& path, const ModelFingerprint& fingerprint = {}) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path + "'");
  out << serialize_model(model, fingerprint);
  if (!out) throw DataError("failed writing '" + path + "'");
}

inline ModelArchive load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

}  // namespace nss
