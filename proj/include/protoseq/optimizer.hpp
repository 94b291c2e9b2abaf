#pragma once

#include <vector>

#include "protoseq/tensor.hpp"

namespace protoseq {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
  double weight_decay = 0.1;  // L2 term added to the gradient
};

// Adam with bias correction; the learning rate is supplied per step so a
// schedule can drive it.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, AdamConfig cfg = {}) : params_(std::move(params)), cfg_(cfg) {
    for (Tensor* p : params_) {
      m_.emplace_back(p->rows, p->cols);
      v_.emplace_back(p->rows, p->cols);
    }
  }

  void step(const std::vector<Tensor>& grads, double lr) {
    require(grads.size() == params_.size(), "adam: gradient count mismatch");
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    for (size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = *params_[i];
      require(p.same_shape(grads[i]), "adam: gradient shape mismatch");
      for (size_t k = 0; k < p.data.size(); ++k) {
        double g = grads[i].data[k] + cfg_.weight_decay * p.data[k];
        double m = cfg_.beta1 * m_[i].data[k] + (1.0 - cfg_.beta1) * g;
        double v = cfg_.beta2 * v_[i].data[k] + (1.0 - cfg_.beta2) * g * g;
        m_[i].data[k] = static_cast<real_t>(m);
        v_[i].data[k] = static_cast<real_t>(v);
        p.data[k] -= static_cast<real_t>(lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps));
      }
    }
  }

  int steps_taken() const { return t_; }

 private:
  std::vector<Tensor*> params_;
  AdamConfig cfg_;
  std::vector<Tensor> m_, v_;
  int t_ = 0;
};

}  // namespace protoseq
