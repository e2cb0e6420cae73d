#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "icftab/nn/tensor.hpp"

namespace icftab::nn {

struct AdamWHyper {
  double lr = 1e-3;
  double eps = 1e-8;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
};

/// One AdamW update of a single scalar; `t` is the 1-based step count.
/// Weight decay is applied to p before, and independently of, the moment update.
inline void adamw_scalar_step(double& p, double g, double& m, double& v, long t, double lr, const AdamWHyper& h) {
  p *= 1.0 - lr * h.weight_decay;
  m = h.beta1 * m + (1.0 - h.beta1) * g;
  v = h.beta2 * v + (1.0 - h.beta2) * g * g;
  const double mhat = m / (1.0 - std::pow(h.beta1, static_cast<double>(t)));
  const double vhat = v / (1.0 - std::pow(h.beta2, static_cast<double>(t)));
  p -= lr * mhat / (std::sqrt(vhat) + h.eps);
}

template <typename Scalar>
class AdamW {
 public:
  AdamW(std::vector<ParamRef<Scalar>> params, AdamWHyper hyper) : params_(std::move(params)), h_(hyper) {
    for (const auto& p : params_) {
      m_.push_back(Vector<Scalar>::Zero(p.size));
      v_.push_back(Vector<Scalar>::Zero(p.size));
    }
  }

  long steps() const { return t_; }

  void step(double lr) {
    ++t_;
    const Scalar b1 = static_cast<Scalar>(h_.beta1);
    const Scalar b2 = static_cast<Scalar>(h_.beta2);
    const Scalar c1 = static_cast<Scalar>(1.0 - std::pow(h_.beta1, static_cast<double>(t_)));
    const Scalar c2 = static_cast<Scalar>(1.0 - std::pow(h_.beta2, static_cast<double>(t_)));
    const Scalar decay = static_cast<Scalar>(1.0 - lr * h_.weight_decay);
    const Scalar slr = static_cast<Scalar>(lr);
    const Scalar eps = static_cast<Scalar>(h_.eps);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Eigen::Map<Vector<Scalar>> p(params_[i].value, params_[i].size);
      Eigen::Map<const Vector<Scalar>> g(params_[i].grad, params_[i].size);
      p *= decay;
      m_[i] = b1 * m_[i] + (Scalar(1) - b1) * g;
      v_[i] = b2 * v_[i] + (Scalar(1) - b2) * g.cwiseAbs2();
      p.array() -= slr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps);
    }
  }

 private:
  std::vector<ParamRef<Scalar>> params_;
  AdamWHyper h_;
  std::vector<Vector<Scalar>> m_, v_;
  long t_ = 0;
};

/// Learning rate at epoch t (0-based) of a cosine schedule with warm restarts
/// and a zero floor. Cycle i lasts T0 * T_mult^i epochs.
inline double cosine_warm_restart_lr(long t, long t0, long t_mult, double lr_max) {
  if (t < 0 || t0 < 1 || t_mult < 1) throw ContractError("cosine_warm_restart_lr: invalid arguments");
  long cycle_len = t0;
  long t_cur = t;
  while (t_cur >= cycle_len) {
    t_cur -= cycle_len;
    cycle_len *= t_mult;
  }
  return 0.5 * lr_max * (1.0 + std::cos(std::numbers::pi * static_cast<double>(t_cur) / static_cast<double>(cycle_len)));
}

}  // namespace icftab::nn
