#pragma once

#include "pcvox/autodiff.hpp"

namespace pcvox::nn {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
public:
  Adam(std::vector<NodePtr> params, AdamConfig cfg = {});

  // Consumes and clears accumulated gradients. Throws TrainingDiverged on a
  // non-finite gradient.
  void step();
  void zero_grad();
  void set_lr(double lr) { cfg_.lr = lr; }
  double lr() const { return cfg_.lr; }
  long step_count() const { return t_; }

private:
  std::vector<NodePtr> params_;
  std::vector<Matrix> m_, v_;
  AdamConfig cfg_;
  long t_ = 0;
};

}  // namespace pcvox::nn
