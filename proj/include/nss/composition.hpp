// Copyright 2026 The NSS Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Composite quantile functions built from per-stage parameter networks.
//
//   sum          q(x, a) = q_1(x, a) + lambda * sum_{t>1} q_t(x, a)
//   alpha-chain  a_1 = a,  y_t = q_t(x, a_t),  a_{t+1} = f_n(y_t)
//   x-chain      u_1 = x,  u_{t+1} = q_t(u_t, a)
//
// f_n is the min-max map (y - q_t(x, 0)) / (q_t(x, 1) - q_t(x, 0)) unless the
// plan selects the sigmoid variant. Every network in a stage sees the
// original features except x-chain stages t > 1, which see the scalar u_t.

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "nss/errors.hpp"
#include "nss/head.hpp"
#include "nss/neural.hpp"
#include "nss/normalization.hpp"
#include "nss/plan.hpp"
#include "nss/random.hpp"
#include "nss/spline.hpp"

namespace nss {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelOptions {
  std::vector<int> hidden{64, 64};
  Activation activation = Activation::relu;
};

class QuantileModel {
 public:
  QuantileModel() = default;

  QuantileModel(CompositionPlan plan, int input_width, const ModelOptions& options,
                std::uint64_t seed)
      : plan_(std::move(plan)), stats_(NormalizationStats::identity(input_width)) {
    plan_.validate();
    for (std::size_t t = 0; t < plan_.depth(); ++t) {
      NetworkSpec spec;
      const bool scalar_input = plan_.mode == CompositionMode::x_chain && t > 0;
      spec.input_width = scalar_input ? 1 : input_width;
      spec.hidden = options.hidden;
      spec.activation = options.activation;
      spec.head = HeadSpec{plan_.stages[t].kind, plan_.stages[t].knots};
      spec.monotone_location = scalar_input;
      networks_.emplace_back(std::move(spec), mix_seed(seed, t));
    }
  }

  QuantileModel(CompositionPlan plan, std::vector<Network> networks, NormalizationStats stats)
      : plan_(std::move(plan)), networks_(std::move(networks)), stats_(std::move(stats)) {
    plan_.validate();
    if (networks_.size() != plan_.depth())
      throw ContractError("model needs one network per plan stage");
    for (std::size_t t = 0; t < networks_.size(); ++t) {
      const auto& spec = networks_[t].spec();
      const bool scalar_input = plan_.mode == CompositionMode::x_chain && t > 0;
      if (spec.head.kind != plan_.stages[t].kind ||
          (spec.head.kind != BasisKind::gaussian && spec.head.knots != plan_.stages[t].knots))
        throw ContractError("stage " + std::to_string(t) + " network head does not match the plan");
      if (scalar_input && spec.input_width != 1)
        throw ContractError("x-chain stages after the first take one input");
      if (!scalar_input && spec.input_width != networks_[0].spec().input_width)
        throw ContractError("stage " + std::to_string(t) + " input width differs from stage 0");
    }
    if (stats_.feature_mean.size() != input_width())
      throw ContractError("normalization stats width does not match the model input");
  }

  const CompositionPlan& plan() const { return plan_; }
  const std::vector<Network>& networks() const { return networks_; }
  std::vector<Network>& mutable_networks() { return networks_; }
  const NormalizationStats& stats() const { return stats_; }
  void set_stats(NormalizationStats stats) { stats_ = std::move(stats); }
  int input_width() const { return networks_.empty() ? 0 : networks_[0].spec().input_width; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& net : networks_) n += net.parameter_count();
    return n;
  }

  /// Quantiles in normalized units: row b, column i is q(x_b, levels_i).
  Matrix quantiles_normalized(const Matrix& x, std::span<const double> levels) const;

  /// Quantiles in original target units for features in original units.
  Matrix predict(const Matrix& x, std::span<const double> levels) const {
    Matrix q = quantiles_normalized(stats_.normalize_features(x), levels);
    return (q.array() * stats_.target_std + stats_.target_mean).matrix();
  }

 private:
  CompositionPlan plan_;
  std::vector<Network> networks_;
  NormalizationStats stats_;
};

/// One stage's forward pass for a batch.
struct StagePass {
  ForwardTape tape;
  RowMatrix raw;             // one row per network input row
  std::vector<Basis> bases;  // constrain(raw row)
};

/// Batched forward evaluation of a composite model that keeps everything
/// needed to backpropagate an upstream gradient dL/dq to every network.
class CompositeForward {
 public:
  /// `alphas` holds one row of quantile levels per example in `x`
  /// (normalized features).
  CompositeForward(const QuantileModel& model, const Matrix& x, Matrix alphas)
      : model_(&model), alphas_(std::move(alphas)) {
    if (x.rows() != alphas_.rows()) throw ContractError("one row of quantile levels per example");
    for (Eigen::Index b = 0; b < alphas_.rows(); ++b)
      for (Eigen::Index i = 0; i < alphas_.cols(); ++i) detail::check_alpha_closed(alphas_(b, i));
    batch_ = alphas_.rows();
    levels_ = alphas_.cols();
    values_.resize(batch_, levels_);
    stages_.resize(model.plan().depth());
    switch (model.plan().mode) {
      case CompositionMode::sum: forward_sum(x); break;
      case CompositionMode::alpha_chain: forward_alpha_chain(x); break;
      case CompositionMode::x_chain: forward_x_chain(x); break;
    }
  }

  const Matrix& values() const { return values_; }
  const Matrix& alphas() const { return alphas_; }
  const std::vector<StagePass>& stages() const { return stages_; }

  /// Level fed to stage t for example b, grid column i (alpha-chain only;
  /// other modes feed the original level to every stage).
  double stage_alpha(Eigen::Index b, Eigen::Index i, std::size_t t) const {
    if (model_->plan().mode != CompositionMode::alpha_chain) return alphas_(b, i);
    return chain_alpha_[index(b, i) * depth() + t];
  }

  /// Output of stage t (before combination) for example b, column i.
  double stage_value(Eigen::Index b, Eigen::Index i, std::size_t t) const {
    return chain_value_[index(b, i) * depth() + t];
  }

  /// Basis used by stage t for example b, grid column i.
  const Basis& stage_basis(Eigen::Index b, Eigen::Index i, std::size_t t) const {
    const bool per_cell = model_->plan().mode == CompositionMode::x_chain && t > 0;
    return stages_[t].bases[per_cell ? index(b, i) : static_cast<std::size_t>(b)];
  }

  /// dL/dtheta for every stage network given dL/dq (same shape as values()).
  std::vector<NetworkGradients> backward(const Matrix& upstream) {
    if (upstream.rows() != batch_ || upstream.cols() != levels_)
      throw ContractError("upstream gradient must match the composite output shape");
    std::vector<NetworkGradients> grads;
    for (const auto& net : model_->networks()) grads.push_back(net.zero_gradients());
    switch (model_->plan().mode) {
      case CompositionMode::sum: backward_sum(upstream, grads); break;
      case CompositionMode::alpha_chain: backward_alpha_chain(upstream, grads); break;
      case CompositionMode::x_chain: backward_x_chain(upstream, grads); break;
    }
    return grads;
  }

 private:
  std::size_t depth() const { return model_->plan().depth(); }
  std::size_t index(Eigen::Index b, Eigen::Index i) const {
    return static_cast<std::size_t>(b * levels_ + i);
  }

  void run_stage(std::size_t t, const Matrix& input) {
    const Network& net = model_->networks()[t];
    StagePass& pass = stages_[t];
    pass.raw = net.forward(input, pass.tape);
    pass.bases.clear();
    pass.bases.reserve(static_cast<std::size_t>(pass.raw.rows()));
    const auto width = static_cast<std::size_t>(pass.raw.cols());
    for (Eigen::Index r = 0; r < pass.raw.rows(); ++r)
      pass.bases.push_back(constrain(net.spec().head, {pass.raw.row(r).data(), width}));
  }

  // Per-row dL/dparams -> dL/draw -> network backward. `param_grads` holds one
  // row of basis-parameter gradients per network input row.
  Matrix finish_stage(std::size_t t, const RowMatrix& param_grads, NetworkGradients& grads) {
    const Network& net = model_->networks()[t];
    StagePass& pass = stages_[t];
    const auto width = static_cast<std::size_t>(pass.raw.cols());
    RowMatrix raw_grad(pass.raw.rows(), pass.raw.cols());
    for (Eigen::Index r = 0; r < pass.raw.rows(); ++r)
      constrain_backward(net.spec().head, {pass.raw.row(r).data(), width},
                         pass.bases[static_cast<std::size_t>(r)],
                         {param_grads.row(r).data(), static_cast<std::size_t>(param_grads.cols())},
                         {raw_grad.row(r).data(), width});
    return net.backward(pass.tape, Matrix(raw_grad), grads);
  }

  Eigen::Index param_width(std::size_t t) const {
    return static_cast<Eigen::Index>(parameter_count(stages_[t].bases.front()));
  }

  double stage_weight(std::size_t t) const { return t == 0 ? 1.0 : model_->plan().lambda; }

  void forward_sum(const Matrix& x) {
    chain_value_.assign(static_cast<std::size_t>(batch_ * levels_) * depth(), 0.0);
    for (std::size_t t = 0; t < depth(); ++t) run_stage(t, x);
    for (Eigen::Index b = 0; b < batch_; ++b)
      for (Eigen::Index i = 0; i < levels_; ++i) {
        double total = 0.0;
        for (std::size_t t = 0; t < depth(); ++t) {
          const double q = quantile(stages_[t].bases[static_cast<std::size_t>(b)], alphas_(b, i));
          chain_value_[index(b, i) * depth() + t] = q;
          total += stage_weight(t) * q;
        }
        values_(b, i) = total;
      }
  }

  void backward_sum(const Matrix& upstream, std::vector<NetworkGradients>& grads) {
    for (std::size_t t = 0; t < depth(); ++t) {
      RowMatrix pg = RowMatrix::Zero(batch_, param_width(t));
      for (Eigen::Index b = 0; b < batch_; ++b) {
        std::span<double> row{pg.row(b).data(), static_cast<std::size_t>(pg.cols())};
        for (Eigen::Index i = 0; i < levels_; ++i)
          accumulate_gradient(stages_[t].bases[static_cast<std::size_t>(b)], alphas_(b, i),
                              stage_weight(t) * upstream(b, i), row);
      }
      finish_stage(t, pg, grads[t]);
    }
  }

  double normalize_level(const Basis& basis, double y) const {
    if (model_->plan().normalization == AlphaNormalization::sigmoid) return sigmoid(y);
    const double lo = lower(basis), hi = upper(basis);
    if (!(hi - lo >= 1e-9))
      throw DomainError("alpha-chain stage has a degenerate output range (" + std::to_string(hi - lo) + ")");
    return std::clamp((y - lo) / (hi - lo), 0.0, 1.0);
  }

  void forward_alpha_chain(const Matrix& x) {
    const std::size_t n = static_cast<std::size_t>(batch_ * levels_) * depth();
    chain_alpha_.assign(n, 0.0);
    chain_value_.assign(n, 0.0);
    for (std::size_t t = 0; t < depth(); ++t) run_stage(t, x);
    for (Eigen::Index b = 0; b < batch_; ++b)
      for (Eigen::Index i = 0; i < levels_; ++i) {
        double a = alphas_(b, i);
        double y = 0.0;
        for (std::size_t t = 0; t < depth(); ++t) {
          const Basis& basis = stages_[t].bases[static_cast<std::size_t>(b)];
          chain_alpha_[index(b, i) * depth() + t] = a;
          y = quantile(basis, a);
          chain_value_[index(b, i) * depth() + t] = y;
          if (t + 1 < depth()) a = normalize_level(basis, y);
        }
        values_(b, i) = y;
      }
  }

  void backward_alpha_chain(const Matrix& upstream, std::vector<NetworkGradients>& grads) {
    std::vector<RowMatrix> pg;
    for (std::size_t t = 0; t < depth(); ++t) pg.push_back(RowMatrix::Zero(batch_, param_width(t)));
    const bool sigmoid_norm = model_->plan().normalization == AlphaNormalization::sigmoid;
    for (Eigen::Index b = 0; b < batch_; ++b)
      for (Eigen::Index i = 0; i < levels_; ++i) {
        double g = upstream(b, i);  // dL/dy_t
        for (std::size_t t = depth(); t-- > 0;) {
          const Basis& basis = stages_[t].bases[static_cast<std::size_t>(b)];
          std::span<double> row{pg[t].row(b).data(), static_cast<std::size_t>(pg[t].cols())};
          const double a = chain_alpha_[index(b, i) * depth() + t];
          accumulate_gradient(basis, a, g, row);
          if (t == 0) break;
          // a_t = f_n(y_{t-1}) with y_{t-1} produced by the previous stage.
          const double g_alpha = g * dquantile_dalpha(basis, a);
          const Basis& prev = stages_[t - 1].bases[static_cast<std::size_t>(b)];
          std::span<double> prev_row{pg[t - 1].row(b).data(), static_cast<std::size_t>(pg[t - 1].cols())};
          const double y_prev = chain_value_[index(b, i) * depth() + t - 1];
          if (sigmoid_norm) {
            g = g_alpha * a * (1.0 - a);
          } else {
            const double lo = lower(prev), hi = upper(prev);
            const double range = hi - lo;
            accumulate_lower_gradient(prev, g_alpha * (y_prev - hi) / (range * range), prev_row);
            accumulate_upper_gradient(prev, -g_alpha * (y_prev - lo) / (range * range), prev_row);
            g = g_alpha / range;
          }
        }
      }
    for (std::size_t t = 0; t < depth(); ++t) finish_stage(t, pg[t], grads[t]);
  }

  void forward_x_chain(const Matrix& x) {
    const std::size_t cells = static_cast<std::size_t>(batch_ * levels_);
    chain_value_.assign(cells * depth(), 0.0);
    run_stage(0, x);
    Matrix u(batch_ * levels_, 1);
    for (Eigen::Index b = 0; b < batch_; ++b)
      for (Eigen::Index i = 0; i < levels_; ++i) {
        const double y = quantile(stages_[0].bases[static_cast<std::size_t>(b)], alphas_(b, i));
        chain_value_[index(b, i) * depth()] = y;
        u(static_cast<Eigen::Index>(index(b, i)), 0) = y;
      }
    for (std::size_t t = 1; t < depth(); ++t) {
      run_stage(t, u);
      for (Eigen::Index b = 0; b < batch_; ++b)
        for (Eigen::Index i = 0; i < levels_; ++i) {
          const auto r = index(b, i);
          const double y = quantile(stages_[t].bases[r], alphas_(b, i));
          chain_value_[r * depth() + t] = y;
          u(static_cast<Eigen::Index>(r), 0) = y;
        }
    }
    for (Eigen::Index b = 0; b < batch_; ++b)
      for (Eigen::Index i = 0; i < levels_; ++i) values_(b, i) = u(static_cast<Eigen::Index>(index(b, i)), 0);
  }

  void backward_x_chain(const Matrix& upstream, std::vector<NetworkGradients>& grads) {
    const auto cells = batch_ * levels_;
    Vector g(cells);
    for (Eigen::Index b = 0; b < batch_; ++b)
      for (Eigen::Index i = 0; i < levels_; ++i) g(static_cast<Eigen::Index>(index(b, i))) = upstream(b, i);
    for (std::size_t t = depth(); t-- > 1;) {
      RowMatrix pg = RowMatrix::Zero(cells, param_width(t));
      for (Eigen::Index b = 0; b < batch_; ++b)
        for (Eigen::Index i = 0; i < levels_; ++i) {
          const auto r = index(b, i);
          accumulate_gradient(stages_[t].bases[r], alphas_(b, i), g(static_cast<Eigen::Index>(r)),
                              {pg.row(static_cast<Eigen::Index>(r)).data(), static_cast<std::size_t>(pg.cols())});
        }
      g = finish_stage(t, pg, grads[t]).col(0);
    }
    RowMatrix pg = RowMatrix::Zero(batch_, param_width(0));
    for (Eigen::Index b = 0; b < batch_; ++b) {
      std::span<double> row{pg.row(b).data(), static_cast<std::size_t>(pg.cols())};
      for (Eigen::Index i = 0; i < levels_; ++i)
        accumulate_gradient(stages_[0].bases[static_cast<std::size_t>(b)], alphas_(b, i),
                            g(static_cast<Eigen::Index>(index(b, i))), row);
    }
    finish_stage(0, pg, grads[0]);
  }

  const QuantileModel* model_;
  Matrix alphas_;
  Matrix values_;
  Eigen::Index batch_ = 0;
  Eigen::Index levels_ = 0;
  std::vector<StagePass> stages_;
  std::vector<double> chain_alpha_;
  std::vector<double> chain_value_;
};

inline Matrix broadcast_levels(Eigen::Index rows, std::span<const double> levels) {
  Matrix a(rows, static_cast<Eigen::Index>(levels.size()));
  for (Eigen::Index i = 0; i < a.cols(); ++i) a.col(i).setConstant(levels[static_cast<std::size_t>(i)]);
  return a;
}

inline Matrix QuantileModel::quantiles_normalized(const Matrix& x, std::span<const double> levels) const {
  // Chunked so x-chain evaluation over many levels stays memory-bounded.
  constexpr Eigen::Index chunk = 256;
  Matrix out(x.rows(), static_cast<Eigen::Index>(levels.size()));
  for (Eigen::Index start = 0; start < x.rows(); start += chunk) {
    const Eigen::Index n = std::min(chunk, x.rows() - start);
    CompositeForward pass(*this, x.middleRows(start, n), broadcast_levels(n, levels));
    out.middleRows(start, n) = pass.values();
  }
  return out;
}

/// q(x, alpha) for a single example in normalized units.
inline double quantile(const QuantileModel& model, std::span<const double> x, double alpha) {
  Matrix row(1, static_cast<Eigen::Index>(x.size()));
  for (Eigen::Index c = 0; c < row.cols(); ++c) row(0, c) = x[static_cast<std::size_t>(c)];
  const double levels[] = {alpha};
  return model.quantiles_normalized(row, levels)(0, 0);
}

}  // namespace nss
