#include "bid/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "bid/errors.hpp"
#include "bid/kernels.hpp"

namespace bid {

void OptimizerConfig::validate() const {
  if (base_lr <= 0) throw std::invalid_argument("optimizer: base_lr must be positive");
  if (decay_factor <= 0 || decay_factor > 1)
    throw std::invalid_argument("optimizer: decay_factor must be in (0, 1]");
  if (warmup_epochs < 0 || warmup_epochs > total_epochs)
    throw std::invalid_argument("optimizer: warmup_epochs must be in [0, total_epochs]");
  if (batch_size < 1) throw std::invalid_argument("optimizer: batch_size must be >= 1");
}

double lr_at(int epoch, const OptimizerConfig& cfg) {
  if (epoch < 0) throw std::invalid_argument("lr_at: negative epoch");
  double lr = cfg.base_lr;
  if (cfg.warmup_epochs > 0 && epoch < cfg.warmup_epochs)
    lr = cfg.base_lr * static_cast<double>(epoch) / cfg.warmup_epochs;
  for (int d : cfg.decay_epochs)
    if (epoch >= d) lr *= cfg.decay_factor;
  return lr;
}

void adam_step(ParamStore& store, GradBuffers& grads, double lr, const OptimizerConfig& cfg) {
  if (grads.any_nonfinite()) throw NumericalError("adam_step: non-finite gradients");
  for (const auto& name : store.names()) {
    ParamEntry& e = store.entry(name);
    if (!e.adam) continue;
    Mat<float>* g = grads.find(name);
    if (g == nullptr) continue;
    e.step += 1;
    const auto t = static_cast<double>(e.step);
    const float bc1 = static_cast<float>(1.0 - std::pow(cfg.beta1, t));
    const float bc2 = static_cast<float>(1.0 - std::pow(cfg.beta2, t));
    kernels::adam(e.value.data(), e.m.data(), e.v.data(), g->data(), e.value.size(),
                  static_cast<float>(lr), static_cast<float>(cfg.beta1),
                  static_cast<float>(cfg.beta2), static_cast<float>(cfg.epsilon), bc1, bc2);
  }
}

}  // namespace bid
