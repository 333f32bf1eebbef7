// Copyright 2026 The NSS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Small fully-connected parameter networks with hand-written reverse mode
// and an Adam optimizer. Batches are row-major in the sense that each row
// of an input matrix is one example.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nss/errors.hpp"
#include "nss/head.hpp"

namespace nss {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { relu, tanh };

inline std::string_view to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

inline Activation parse_activation(std::string_view text) {
  if (text == "relu") return Activation::relu;
  if (text == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(text) + "'");
}

struct NetworkSpec {
  int input_width = 1;
  std::vector<int> hidden{64, 64};
  Activation activation = Activation::relu;
  HeadSpec head;
  // When set, the location output (raw index 0) is a nondecreasing function
  // of every input: hidden weights and the location row are kept >= 0, and
  // the remaining head rows ignore the input (bias only).
  bool monotone_location = false;

  std::size_t output_width() const { return head.raw_size(); }

  void validate() const {
    if (input_width < 1) throw ConfigError("network input width must be >= 1");
    for (int w : hidden)
      if (w < 1) throw ConfigError("hidden layer widths must be >= 1");
    head.validate();
  }
};

struct Layer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

struct NetworkGradients {
  std::vector<Layer> layers;

  void set_zero() {
    for (auto& l : layers) {
      l.weight.setZero();
      l.bias.setZero();
    }
  }

  NetworkGradients& operator+=(const NetworkGradients& other) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].weight += other.layers[i].weight;
      layers[i].bias += other.layers[i].bias;
    }
    return *this;
  }

  bool all_finite() const {
    for (const auto& l : layers)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }
};

/// Cached activations of one forward call. Consumed by exactly one backward.
class ForwardTape {
 public:
  std::size_t rows() const { return inputs_.empty() ? 0 : static_cast<std::size_t>(inputs_[0].rows()); }
  /// Pre-activations of hidden layer `i` (rows = examples).
  const Matrix& preactivation(std::size_t i) const { return preact_[i]; }
  std::size_t hidden_layers() const { return preact_.size(); }
  bool consumed() const { return consumed_; }

 private:
  friend class Network;
  const void* owner_ = nullptr;
  std::uint64_t version_ = 0;
  bool consumed_ = false;
  std::vector<Matrix> inputs_;  // input to each layer
  std::vector<Matrix> preact_;  // hidden pre-activations
};

class Network {
 public:
  Network() = default;

  Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    spec_.validate();
    std::mt19937_64 rng(seed);
    int fan_in = spec_.input_width;
    std::vector<int> widths = spec_.hidden;
    widths.push_back(static_cast<int>(spec_.output_width()));
    for (int out : widths) {
      Layer layer{Matrix(out, fan_in), Vector::Zero(out)};
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      std::uniform_real_distribution<double> uniform(-bound, bound);
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = uniform(rng);
      layers_.push_back(std::move(layer));
      fan_in = out;
    }
    const auto neutral = spec_.head.neutral_raw();
    for (std::size_t i = 0; i < neutral.size(); ++i)
      layers_.back().bias(static_cast<Eigen::Index>(i)) = neutral[i];
    if (spec_.monotone_location) {
      for (auto& l : layers_) l.weight = l.weight.cwiseAbs();
    }
    project();
    reset_optimizer();
  }

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& mutable_layers() {
    ++version_;
    return layers_;
  }
  std::uint64_t step() const { return step_; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  NetworkGradients zero_gradients() const {
    NetworkGradients g;
    for (const auto& l : layers_)
      g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
    return g;
  }

  /// Raw head outputs for a batch (one example per row) plus the tape
  /// required by `backward`.
  Matrix forward(const Matrix& x, ForwardTape& tape) const {
    if (x.cols() != spec_.input_width)
      throw ContractError("network expects " + std::to_string(spec_.input_width) +
                          " input columns, got " + std::to_string(x.cols()));
    tape = ForwardTape{};
    tape.owner_ = this;
    tape.version_ = version_;
    Matrix h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      tape.inputs_.push_back(h);
      Matrix z = h * layers_[i].weight.transpose();
      z.rowwise() += layers_[i].bias.transpose();
      if (i + 1 == layers_.size()) return z;
      tape.preact_.push_back(z);
      h = activate(z);
    }
    return h;
  }

  Matrix forward(const Matrix& x) const {
    ForwardTape tape;
    return forward(x, tape);
  }

  /// Accumulates dL/dtheta into `grads` given dL/draw (`upstream`, one row per
  /// example). Returns dL/dx.
  Matrix backward(ForwardTape& tape, const Matrix& upstream, NetworkGradients& grads) const {
    if (tape.owner_ != this || tape.version_ != version_)
      throw ContractError("forward tape does not belong to this network state");
    if (tape.consumed_) throw ContractError("forward tape was already consumed by backward");
    if (upstream.rows() != static_cast<Eigen::Index>(tape.rows()) ||
        upstream.cols() != static_cast<Eigen::Index>(spec_.output_width()))
      throw ContractError("upstream gradient shape does not match the forward call");
    tape.consumed_ = true;

    Matrix g = upstream;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      if (i + 1 < layers_.size()) g = g.cwiseProduct(activation_derivative(tape.preact_[i]));
      grads.layers[i].weight.noalias() += g.transpose() * tape.inputs_[i];
      grads.layers[i].bias += g.colwise().sum().transpose();
      g = g * layers_[i].weight;
    }
    return g;
  }

  void reset_optimizer() {
    moments_ = zero_gradients();
    second_moments_ = zero_gradients();
    step_ = 0;
  }

  /// Adam update (beta1 = 0.9, beta2 = 0.999, eps = 1e-8, bias corrected).
  void adam_step(const NetworkGradients& grads, double lr) {
    if (!grads.all_finite()) throw TrainingError("non-finite gradient in adam step " + std::to_string(step_ + 1));
    if (grads.layers.size() != layers_.size()) throw ContractError("gradient shape mismatch");
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    ++step_;
    ++version_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step_));
    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
      m = beta1 * m + (1.0 - beta1) * g;
      v = beta2 * v + (1.0 - beta2) * g.cwiseProduct(g);
      param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      update(layers_[i].weight, moments_.layers[i].weight, second_moments_.layers[i].weight,
             grads.layers[i].weight);
      update(layers_[i].bias, moments_.layers[i].bias, second_moments_.layers[i].bias,
             grads.layers[i].bias);
    }
    project();
  }

 private:
  Matrix activate(const Matrix& z) const {
    if (spec_.activation == Activation::relu) return z.cwiseMax(0.0);
    return z.array().tanh().matrix();
  }

  Matrix activation_derivative(const Matrix& z) const {
    if (spec_.activation == Activation::relu) return (z.array() > 0.0).cast<double>().matrix();
    return (1.0 - z.array().tanh().square()).matrix();
  }

  // Re-imposes the monotone-location constraint after every update.
  void project() {
    if (!spec_.monotone_location) return;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) layers_[i].weight = layers_[i].weight.cwiseMax(0.0);
    Matrix& out = layers_.back().weight;
    out.row(0) = out.row(0).cwiseMax(0.0);
    if (out.rows() > 1) out.bottomRows(out.rows() - 1).setZero();
  }

  NetworkSpec spec_;
  std::vector<Layer> layers_;
  NetworkGradients moments_;
  NetworkGradients second_moments_;
  std::uint64_t step_ = 0;
  std::uint64_t version_ = 0;
};

}  // namespace nss
