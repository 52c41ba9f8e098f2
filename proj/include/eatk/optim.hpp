#pragma once

#include <cmath>
#include <string>

#include "eatk/embedding.hpp"
#include "eatk/error.hpp"

namespace eatk {

enum class OptimizerKind { sgd, adam };

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptimizerKind::sgd;
  if (s == "adam") return OptimizerKind::adam;
  throw ConfigError("unknown optimizer '" + s + "'");
}

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::sgd ? "sgd" : "adam"; }

/// Per-parameter-matrix optimizer state. One instance per trainable matrix.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerKind kind, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : kind_(kind), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Matrix& param, const Matrix& grad) {
    if (kind_ == OptimizerKind::sgd) {
      param -= lr_ * grad;
      return;
    }
    if (m_.rows() != param.rows() || m_.cols() != param.cols()) {
      m_ = Matrix::Zero(param.rows(), param.cols());
      v_ = Matrix::Zero(param.rows(), param.cols());
      t_ = 0;
    }
    ++t_;
    m_ = beta1_ * m_ + (1 - beta1_) * grad;
    v_ = beta2_ * v_ + (1 - beta2_) * grad.cwiseProduct(grad);
    const double c1 = 1 - std::pow(beta1_, t_);
    const double c2 = 1 - std::pow(beta2_, t_);
    param.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

  double learning_rate() const noexcept { return lr_; }

 private:
  OptimizerKind kind_ = OptimizerKind::sgd;
  double lr_ = 0.01;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  Matrix m_;
  Matrix v_;
  int t_ = 0;
};

}  // namespace eatk
