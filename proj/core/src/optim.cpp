#include "tapret/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace tapret {

Optimizer::Optimizer(OptimizerConfig cfg, Precision precision)
    : cfg_(cfg), precision_(precision) {}

void Optimizer::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("optimizer: params/grads count mismatch");
  }
  if (cfg_.kind == OptimizerKind::Adam && m_.empty()) {
    for (const Tensor* p : params) {
      m_.emplace_back(p->shape());
      v_.emplace_back(p->shape());
    }
  }
  if (cfg_.kind == OptimizerKind::Adam && m_.size() != params.size()) {
    throw std::invalid_argument("optimizer: parameter count changed between steps");
  }
  ++t_;

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = *params[pi];
    const Tensor& g = *grads[pi];
    if (!p.same_shape(g)) {
      throw std::invalid_argument("optimizer: shape mismatch " + p.shape_str() + " vs " + g.shape_str());
    }
    if (cfg_.kind == OptimizerKind::Sgd) {
      for (std::size_t i = 0; i < p.numel(); ++i) {
        p[i] -= cfg_.lr * (g[i] + cfg_.weight_decay * p[i]);
      }
    } else {
      Tensor& m = m_[pi];
      Tensor& v = v_[pi];
      const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
      const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
      for (std::size_t i = 0; i < p.numel(); ++i) {
        const double gi = g[i] + cfg_.weight_decay * p[i];
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi;
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
    if (precision_ == Precision::Single) quantize_to_float(p);
  }
}

}  // namespace tapret
