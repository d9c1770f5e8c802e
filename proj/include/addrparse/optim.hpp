#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "addrparse/error.hpp"

namespace addrparse {

enum class OptimizerKind { kAdamW, kRmsProp, kSgd };

inline std::string to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::kAdamW: return "AdamW";
    case OptimizerKind::kRmsProp: return "RMSprop";
    case OptimizerKind::kSgd: return "SGD";
  }
  return "?";
}

inline OptimizerKind parse_optimizer_kind(std::string_view s) {
  std::string lower(s);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "adamw") return OptimizerKind::kAdamW;
  if (lower == "rmsprop") return OptimizerKind::kRmsProp;
  if (lower == "sgd") return OptimizerKind::kSgd;
  throw ConfigError("unknown optimizer '" + std::string(s) + "'");
}

struct OptimizerHyper {
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double rms_alpha = 0.99;

  friend bool operator==(const OptimizerHyper&, const OptimizerHyper&) = default;
};

// AdamW, RMSprop and SGD with decoupled weight decay:
//   p <- p * (1 - lr * wd) - lr * update(g)
// so a zero gradient scales every parameter by exactly (1 - lr * wd).
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerKind kind, OptimizerHyper hyper, const std::vector<Eigen::MatrixXd>& params)
      : kind_(kind), hyper_(hyper) {
    if (kind_ == OptimizerKind::kSgd) return;
    for (const auto& p : params) {
      first_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
      if (kind_ == OptimizerKind::kAdamW) second_.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
    }
  }

  void step(std::vector<Eigen::MatrixXd>& params, const std::vector<Eigen::MatrixXd>& grads, double lr) {
    if (params.size() != grads.size()) throw ShapeError("parameter/gradient count mismatch");
    if (!(lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
    for (std::size_t i = 0; i < grads.size(); ++i) {
      if (params[i].rows() != grads[i].rows() || params[i].cols() != grads[i].cols()) {
        throw ShapeError("gradient " + std::to_string(i) + " shape mismatch");
      }
      if (!grads[i].allFinite()) throw NonFiniteGradient("non-finite gradient in tensor " + std::to_string(i));
    }
    if (kind_ != OptimizerKind::kSgd && first_.size() != params.size()) {
      throw ShapeError("optimizer state does not match parameters");
    }
    ++t_;
    const double decay = 1.0 - lr * hyper_.weight_decay;
    switch (kind_) {
      case OptimizerKind::kSgd:
        for (std::size_t i = 0; i < params.size(); ++i) params[i] = params[i] * decay - lr * grads[i];
        break;
      case OptimizerKind::kRmsProp:
        for (std::size_t i = 0; i < params.size(); ++i) {
          auto& avg = first_[i];
          avg = hyper_.rms_alpha * avg + (1.0 - hyper_.rms_alpha) * grads[i].cwiseProduct(grads[i]);
          params[i] = params[i] * decay -
                      lr * (grads[i].array() / (avg.array().sqrt() + hyper_.eps)).matrix();
        }
        break;
      case OptimizerKind::kAdamW: {
        const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.size(); ++i) {
          auto& m = first_[i];
          auto& v = second_[i];
          m = hyper_.beta1 * m + (1.0 - hyper_.beta1) * grads[i];
          v = hyper_.beta2 * v + (1.0 - hyper_.beta2) * grads[i].cwiseProduct(grads[i]);
          params[i] = params[i] * decay -
                      lr * ((m.array() / bc1) / ((v.array() / bc2).sqrt() + hyper_.eps)).matrix();
        }
        break;
      }
    }
  }

  OptimizerKind kind() const noexcept { return kind_; }
  const OptimizerHyper& hyper() const noexcept { return hyper_; }
  std::uint64_t steps() const noexcept { return t_; }

  // Moment buffers: AdamW (first, second); RMSprop (square average in `first`); SGD none.
  const std::vector<Eigen::MatrixXd>& first_moments() const noexcept { return first_; }
  const std::vector<Eigen::MatrixXd>& second_moments() const noexcept { return second_; }

  static Optimizer restore(OptimizerKind kind, OptimizerHyper hyper, std::uint64_t t,
                           std::vector<Eigen::MatrixXd> first, std::vector<Eigen::MatrixXd> second) {
    Optimizer o;
    o.kind_ = kind;
    o.hyper_ = hyper;
    o.t_ = t;
    o.first_ = std::move(first);
    o.second_ = std::move(second);
    return o;
  }

  friend bool operator==(const Optimizer& a, const Optimizer& b) {
    auto same = [](const std::vector<Eigen::MatrixXd>& x, const std::vector<Eigen::MatrixXd>& y) {
      if (x.size() != y.size()) return false;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i].rows() != y[i].rows() || x[i].cols() != y[i].cols() || x[i] != y[i]) return false;
      }
      return true;
    };
    return a.kind_ == b.kind_ && a.hyper_ == b.hyper_ && a.t_ == b.t_ && same(a.first_, b.first_) &&
           same(a.second_, b.second_);
  }

 private:
  OptimizerKind kind_ = OptimizerKind::kSgd;
  OptimizerHyper hyper_;
  std::uint64_t t_ = 0;
  std::vector<Eigen::MatrixXd> first_;
  std::vector<Eigen::MatrixXd> second_;
};

// Linear decay from lr0 to 0 over total_steps, no warmup.
struct LrSchedule {
  double lr0 = 1e-3;
  std::uint64_t total_steps = 1;

  double at(std::uint64_t t) const {
    const double frac = static_cast<double>(t) / static_cast<double>(std::max<std::uint64_t>(total_steps, 1));
    return lr0 * std::max(0.0, 1.0 - frac);
  }
};

inline double lr_at(const LrSchedule& s, std::uint64_t t) { return s.at(t); }

}  // namespace addrparse
