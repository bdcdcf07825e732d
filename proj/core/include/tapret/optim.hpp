#pragma once

#include <vector>

#include "tapret/config.hpp"
#include "tapret/tensor.hpp"

namespace tapret {

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// Holds per-parameter state; parameters must be passed in the same order on
// every step (the stable for_each_param order).
class Optimizer {
 public:
  Optimizer(OptimizerConfig cfg, Precision precision = Precision::Double);

  void step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads);
  long steps_taken() const { return t_; }

 private:
  OptimizerConfig cfg_;
  Precision precision_;
  std::vector<Tensor> m_, v_;  // adam moments
  long t_ = 0;
};

}  // namespace tapret
