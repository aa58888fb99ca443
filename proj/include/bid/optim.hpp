#pragma once

#include <vector>

#include "bid/params.hpp"

namespace bid {

struct OptimizerConfig {
  double base_lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int warmup_epochs = 20;
  std::vector<int> decay_epochs = {20, 40};
  double decay_factor = 0.1;
  int total_epochs = 500;
  int batch_size = 128;

  void validate() const;
};

// Linear ramp 0 -> base_lr over [0, warmup), then one decay_factor per
// decay epoch reached. With the defaults: base*epoch/20, x0.1 at 20,
// x0.01 at 40.
double lr_at(int epoch, const OptimizerConfig& cfg);

// One Adam update with bias correction over every adam-enabled entry that
// has a gradient buffer. Entries without gradients are untouched and their
// step counts do not advance.
void adam_step(ParamStore& store, GradBuffers& grads, double lr, const OptimizerConfig& cfg);

}  // namespace bid
