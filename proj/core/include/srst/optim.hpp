#pragma once

#include <cstddef>

#include "srst/net.hpp"

namespace srst {

struct OptimizerConfig {
  int epochs = 200;
  std::size_t batch_size = 64;
  double lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

// buf <- momentum * buf + (grad + weight_decay * param); param <- param - lr * buf
void sgd_step(ParamSet& params, const ParamSet& grads, double lr, ParamSet& momentum_buf, double momentum,
              double weight_decay);

// avg <- (n * avg + snapshot) / (n + 1); n = 0 copies the snapshot.
void swa_update(ParamSet& avg, const ParamSet& snapshot, std::size_t n_included);

}  // namespace srst
