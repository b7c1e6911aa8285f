#include "srst/optim.hpp"

#include <stdexcept>

namespace srst {

namespace {

void require_congruent(const ParamSet& a, const ParamSet& b, const char* what) {
  const auto ta = a.tensors();
  const auto tb = b.tensors();
  bool ok = ta.size() == tb.size();
  for (std::size_t i = 0; ok && i < ta.size(); ++i) ok = ta[i]->shape() == tb[i]->shape();
  if (!ok) throw std::invalid_argument(std::string(what) + ": parameter shapes are not congruent");
}

}  // namespace

void sgd_step(ParamSet& params, const ParamSet& grads, double lr, ParamSet& momentum_buf, double momentum,
              double weight_decay) {
  require_congruent(params, grads, "sgd_step");
  if (momentum_buf.layers.empty()) momentum_buf = params.zeros_like();
  require_congruent(params, momentum_buf, "sgd_step");
  auto p = params.tensors();
  auto g = grads.tensors();
  auto b = momentum_buf.tensors();
  for (std::size_t t = 0; t < p.size(); ++t) {
    auto pv = p[t]->values();
    auto gv = g[t]->values();
    auto bv = b[t]->values();
    for (std::size_t i = 0; i < pv.size(); ++i) {
      bv[i] = momentum * bv[i] + (gv[i] + weight_decay * pv[i]);
      pv[i] -= lr * bv[i];
    }
  }
}

void swa_update(ParamSet& avg, const ParamSet& snapshot, std::size_t n_included) {
  if (n_included == 0) {
    avg = snapshot;
    return;
  }
  require_congruent(avg, snapshot, "swa_update");
  const double n = static_cast<double>(n_included);
  auto a = avg.tensors();
  auto s = snapshot.tensors();
  for (std::size_t t = 0; t < a.size(); ++t) {
    auto av = a[t]->values();
    auto sv = s[t]->values();
    for (std::size_t i = 0; i < av.size(); ++i) av[i] = (n * av[i] + sv[i]) / (n + 1.0);
  }
}

}  // namespace srst
