#pragma once

// Shared helpers for unit and acceptance tests: random nets and batches, a
// from-scratch evaluation of every risk (no tape), and finite differences.

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <optional>
#include <vector>

#include "srst/losses.hpp"
#include "srst/net.hpp"
#include "srst/rng.hpp"

namespace srst::testing {

// Row-major literal: mat({{1, 2}, {3, 4}}).
inline Tensor mat(std::initializer_list<std::initializer_list<double>> rows) {
  std::vector<double> v;
  for (const auto& r : rows) v.insert(v.end(), r.begin(), r.end());
  return Tensor::matrix(rows.size(), rows.begin()->size(), std::move(v));
}

inline ScoreNet random_net(Sampler& rng, bool allow_tanh = true) {
  ScoreNet net;
  const std::size_t d = 1 + rng.below(4);
  const std::size_t hidden = 1 + rng.below(2);
  net.layer_widths.push_back(d);
  for (std::size_t h = 0; h < hidden; ++h) net.layer_widths.push_back(2 + rng.below(5));
  net.layer_widths.push_back(2 + rng.below(3));
  net.activation = allow_tanh && rng.bernoulli(0.5) ? Activation::tanh : Activation::relu;
  return net;
}

// init_params zeroes biases, so a dead layer leaves the next relu exactly at
// its kink where finite differences are meaningless. Random biases avoid that.
inline ParamSet random_params(Sampler& rng, const ScoreNet& net, std::uint64_t seed) {
  ParamSet p = init_params(net, RngStream(seed));
  for (DenseLayer& l : p.layers)
    for (double& v : l.bias.values()) v = rng.uniform(-0.5, 0.5);
  return p;
}

inline Tensor random_inputs(Sampler& rng, std::size_t rows, std::size_t d) {
  Tensor x = Tensor::zeros({rows, d});
  for (double& v : x.values()) v = rng.uniform();
  return x;
}

inline std::vector<int> random_labels(Sampler& rng, std::size_t rows, std::size_t classes) {
  std::vector<int> y(rows);
  for (int& v : y) v = static_cast<int>(rng.below(classes));
  return y;
}

inline std::vector<double> random_simplex_row(Sampler& rng, std::size_t n) {
  std::vector<double> p(n);
  double s = 0.0;
  for (double& v : p) s += (v = rng.uniform(0.05, 1.0));
  for (double& v : p) v /= s;
  return p;
}

inline Tensor perturb(Sampler& rng, const Tensor& x, double eps) {
  Tensor out = x;
  for (double& v : out.values()) v = std::clamp(v + rng.uniform(-eps, eps), 0.0, 1.0);
  return out;
}

// Teacher rows from an arbitrary logits table, the way export would build them.
inline TeacherOutputs random_teacher(Sampler& rng, std::size_t rows, std::size_t classes, double tau) {
  Tensor logits = Tensor::zeros({rows, classes});
  for (double& v : logits.values()) v = rng.uniform(-3.0, 3.0);
  const Tensor probs = softmax(logits);
  return {temp_softmax(logits, tau), probs, predict(probs)};
}

// ---- tape-free reference values ---------------------------------------------

inline std::vector<double> ref_log_probs(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  const double lse = m + std::log(s);
  std::vector<double> out;
  for (double v : z) out.push_back(std::max(v - lse, std::log(kProbFloor)));
  return out;
}

inline std::vector<double> ref_probs(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> out;
  double s = 0.0;
  for (double v : z) s += (out.emplace_back(std::exp(v - m)));
  for (double& v : out) v /= s;
  return out;
}

// KL(p || softmax(q_logits)) with the floor on log q and 0 log 0 = 0.
inline double ref_kl(std::span<const double> p, std::span<const double> q_logits) {
  const auto lq = ref_log_probs(q_logits);
  double kl = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c)
    if (p[c] > 0.0) kl += p[c] * (std::log(p[c]) - lq[c]);
  return kl;
}

inline double ref_ls_ce(std::span<const double> z, int y, double alpha) {
  const auto lp = ref_log_probs(z);
  const double C = static_cast<double>(z.size());
  double s = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    const double target = (static_cast<int>(c) == y ? 1.0 - alpha : 0.0) + alpha / C;
    s -= target * lp[c];
  }
  return s;
}

inline std::vector<double> scaled(std::span<const double> z, double k) {
  std::vector<double> out(z.begin(), z.end());
  for (double& v : out) v *= k;
  return out;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Per-row adaptive weights at the given parameters.
inline std::vector<double> ref_weights(const ScoreNet& net, const ParamSet& params, const Tensor& u, const Tensor& adv,
                                       const TeacherOutputs& teacher, double beta) {
  const Tensor zc = forward_logits(net, params, u), za = forward_logits(net, params, adv);
  std::vector<double> w;
  for (std::size_t j = 0; j < u.rows(); ++j) {
    const auto pc = ref_probs(zc.row(j)), pa = ref_probs(za.row(j));
    w.push_back(beta * dot(teacher.probs.row(j), pc) + (1.0 - beta) * (1.0 - dot(teacher.probs.row(j), pa)));
  }
  return w;
}

/// SRST-AWR risk from its definition. `frozen_w` replaces the weights, which
/// is how a detached weight looks to a finite-difference probe.
inline double ref_srst_awr(const ScoreNet& net, const ParamSet& params, const LabeledBatch& lb, const Tensor& u,
                           const Tensor& adv, const TeacherOutputs& teacher, const AWRConfig& cfg,
                           const std::optional<std::vector<double>>& frozen_w = std::nullopt) {
  const Tensor zl = forward_logits(net, params, lb.x);
  double sup = 0.0;
  for (std::size_t i = 0; i < lb.y.size(); ++i) sup += ref_ls_ce(zl.row(i), lb.y[i], cfg.alpha);
  double risk = sup / static_cast<double>(lb.y.size());

  const Tensor zc = forward_logits(net, params, u), za = forward_logits(net, params, adv);
  const double n = static_cast<double>(u.rows());
  if (cfg.gamma != 0.0) {
    double kd = 0.0;
    for (std::size_t j = 0; j < u.rows(); ++j) kd += ref_kl(teacher.soft.row(j), scaled(zc.row(j), 1.0 / cfg.tau));
    risk += cfg.gamma * (kd / n);
  }
  if (cfg.lambda != 0.0) {
    const auto w = cfg.weighting == Weighting::uniform
                       ? std::vector<double>(u.rows(), 1.0)
                       : frozen_w.value_or(ref_weights(net, params, u, adv, teacher, cfg.beta));
    double reg = 0.0;
    for (std::size_t j = 0; j < u.rows(); ++j) reg += ref_kl(ref_probs(zc.row(j)), za.row(j)) * w[j];
    risk += cfg.lambda * (reg / n);
  }
  return risk;
}

inline double ref_trades(const ScoreNet& net, const ParamSet& params, const LabeledBatch& b, const Tensor& adv,
                         double lambda) {
  const Tensor z = forward_logits(net, params, b.x), za = forward_logits(net, params, adv);
  double s = 0.0;
  for (std::size_t i = 0; i < b.y.size(); ++i) {
    s += ref_ls_ce(z.row(i), b.y[i], 0.0) + lambda * ref_kl(ref_probs(z.row(i)), za.row(i));
  }
  return s / static_cast<double>(b.y.size());
}

inline double ref_uat(const ScoreNet& net, const ParamSet& params, const LabeledBatch& b, const Tensor& adv,
                      double lambda, const Tensor& ref) {
  const Tensor za = forward_logits(net, params, adv);
  double s = 0.0;
  for (std::size_t i = 0; i < b.y.size(); ++i) {
    s += ref_ls_ce(za.row(i), b.y[i], 0.0) + lambda * ref_kl(ref.row(i), za.row(i));
  }
  return s / static_cast<double>(b.y.size());
}

// ---- finite differences ------------------------------------------------------

inline constexpr double kFdStep = 1e-6;

inline ParamSet fd_params(const ParamSet& params, const std::function<double(const ParamSet&)>& f,
                          double h = kFdStep) {
  ParamSet g = params.zeros_like();
  ParamSet probe = params;
  auto pt = probe.tensors();
  auto gt = g.tensors();
  for (std::size_t k = 0; k < pt.size(); ++k) {
    for (std::size_t i = 0; i < pt[k]->size(); ++i) {
      double& v = pt[k]->values()[i];
      const double orig = v;
      v = orig + h;
      const double up = f(probe);
      v = orig - h;
      const double down = f(probe);
      v = orig;
      gt[k]->values()[i] = (up - down) / (2.0 * h);
    }
  }
  return g;
}

inline Tensor fd_input(const Tensor& x, const std::function<double(const Tensor&)>& f, double h = kFdStep) {
  Tensor g = Tensor::zeros(x.shape());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe.values()[i];
    probe.values()[i] = orig + h;
    const double up = f(probe);
    probe.values()[i] = orig - h;
    const double down = f(probe);
    probe.values()[i] = orig;
    g.values()[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline std::vector<double> flatten(const ParamSet& p) {
  std::vector<double> out;
  for (const Tensor* t : p.tensors()) out.insert(out.end(), t->values().begin(), t->values().end());
  return out;
}

// ||a - b|| / max(||a||, ||b||), with a floor so exact zeros compare as zero.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-8});
}

// ---- random risk inputs ----------------------------------------------------

struct RandomBatch {
  ScoreNet net;
  ParamSet params;
  LabeledBatch labeled;
  Tensor unlabeled;
  Tensor adv;
  TeacherOutputs teacher;
};

inline RandomBatch random_batch(Sampler& rng, std::uint64_t seed, double tau = 1.2) {
  RandomBatch b;
  b.net = random_net(rng);
  b.params = random_params(rng, b.net, seed);
  const std::size_t d = b.net.input_width(), c = b.net.num_classes();
  const std::size_t nl = 1 + rng.below(3), nu = 1 + rng.below(4);
  b.labeled = {random_inputs(rng, nl, d), random_labels(rng, nl, c)};
  b.unlabeled = random_inputs(rng, nu, d);
  b.adv = perturb(rng, b.unlabeled, 0.2);
  b.teacher = random_teacher(rng, nu, c, tau);
  return b;
}

inline AWRConfig random_awr(Sampler& rng) {
  AWRConfig cfg;
  cfg.alpha = rng.uniform(0.0, 0.5);
  cfg.lambda = rng.uniform(0.0, 10.0);
  cfg.gamma = rng.uniform(0.0, 5.0);
  cfg.beta = rng.uniform();
  cfg.tau = rng.uniform(0.5, 3.0);
  return cfg;
}

}  // namespace srst::testing
