#include "srst/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace srst {

const Tensor& Var::value() const { return tape_->value_of(id_); }
bool Var::requires_grad() const { return tape_->requires_grad_of(id_); }

Var Tape::leaf(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), {}, requires_grad, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, Backward backward) {
  bool needs = false;
  for (const Var& p : parents) {
    if (&p.tape() != this) throw std::logic_error("mixing vars from different tapes");
    needs = needs || p.requires_grad();
  }
  nodes_.push_back(Node{std::move(value), {}, needs, false, needs ? std::move(backward) : Backward{}});
  return Var(this, nodes_.size() - 1);
}

void Tape::backward(const Var& loss) {
  const Tensor& v = loss.value();
  if (v.size() != 1) {
    throw std::invalid_argument("backward needs a scalar loss, got shape " + v.shape_string());
  }
  if (!loss.requires_grad()) return;
  accumulate(loss, Tensor::filled(v.shape(), 1.0));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.has_grad || !n.backward) continue;
    // Parents always have lower ids, so n.grad is stable during the call.
    n.backward(*this, n.grad);
  }
}

Tensor Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id()];
  if (n.has_grad) return n.grad;
  return Tensor::zeros(n.value.shape());
}

void Tape::accumulate(const Var& v, std::span<const double> g) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = Tensor::zeros(n.value.shape());
    n.has_grad = true;
  }
  auto dst = n.grad.values();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
}

void Tape::accumulate(const Var& v, const Tensor& g) { accumulate(v, g.values()); }

namespace ad {

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.value().shape() != b.value().shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.value().shape_string() +
                                " vs " + b.value().shape_string());
  }
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out = a;
  for (double& v : out.values()) v = f(v);
  return out;
}

}  // namespace

Var affine(const Var& x, const Var& weight, const Var& bias) {
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  const Tensor& bv = bias.value();
  const std::size_t batch = xv.rows(), in = xv.cols(), out = wv.rows();
  if (wv.cols() != in || bv.size() != out) {
    throw std::invalid_argument("affine: input " + xv.shape_string() + " weight " +
                                wv.shape_string() + " bias " + bv.shape_string());
  }
  Tensor y = Tensor::zeros({batch, out});
  for (std::size_t i = 0; i < batch; ++i) {
    auto xr = xv.row(i);
    for (std::size_t o = 0; o < out; ++o) {
      auto wr = wv.row(o);
      double acc = bv[o];
      for (std::size_t k = 0; k < in; ++k) acc += xr[k] * wr[k];
      y(i, o) = acc;
    }
  }
  return x.tape().record(std::move(y), {x, weight, bias}, [x, weight, bias, batch, in, out](Tape& t, const Tensor& g) {
    const Tensor& xs = x.value();
    const Tensor& ws = weight.value();
    if (x.requires_grad()) {
      Tensor gx = Tensor::zeros({batch, in});
      for (std::size_t i = 0; i < batch; ++i) {
        for (std::size_t o = 0; o < out; ++o) {
          const double go = g(i, o);
          if (go == 0.0) continue;
          auto wr = ws.row(o);
          for (std::size_t k = 0; k < in; ++k) gx(i, k) += go * wr[k];
        }
      }
      t.accumulate(x, gx);
    }
    if (weight.requires_grad()) {
      Tensor gw = Tensor::zeros({out, in});
      for (std::size_t i = 0; i < batch; ++i) {
        auto xr = xs.row(i);
        for (std::size_t o = 0; o < out; ++o) {
          const double go = g(i, o);
          if (go == 0.0) continue;
          for (std::size_t k = 0; k < in; ++k) gw(o, k) += go * xr[k];
        }
      }
      t.accumulate(weight, gw);
    }
    if (bias.requires_grad()) {
      std::vector<double> gb(out, 0.0);
      for (std::size_t i = 0; i < batch; ++i)
        for (std::size_t o = 0; o < out; ++o) gb[o] += g(i, o);
      t.accumulate(bias, gb);
    }
  });
}

Var relu(const Var& a) {
  return a.tape().record(map(a.value(), [](double v) { return v > 0.0 ? v : 0.0; }), {a},
                         [a](Tape& t, const Tensor& g) {
                           Tensor ga = g;
                           auto av = a.value().values();
                           auto gv = ga.values();
                           for (std::size_t i = 0; i < gv.size(); ++i)
                             if (!(av[i] > 0.0)) gv[i] = 0.0;
                           t.accumulate(a, ga);
                         });
}

Var tanh(const Var& a) {
  Tensor y = map(a.value(), [](double v) { return std::tanh(v); });
  return a.tape().record(y, {a}, [a, y](Tape& t, const Tensor& g) {
    Tensor ga = g;
    auto yv = y.values();
    auto gv = ga.values();
    for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= 1.0 - yv[i] * yv[i];
    t.accumulate(a, ga);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor y = a.value();
  auto bv = b.value().values();
  auto yv = y.values();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] += bv[i];
  return a.tape().record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor y = a.value();
  auto bv = b.value().values();
  auto yv = y.values();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] -= bv[i];
  return a.tape().record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    t.accumulate(a, g);
    if (b.requires_grad()) t.accumulate(b, map(g, [](double v) { return -v; }));
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor y = a.value();
  auto bv = b.value().values();
  auto yv = y.values();
  for (std::size_t i = 0; i < yv.size(); ++i) yv[i] *= bv[i];
  return a.tape().record(std::move(y), {a, b}, [a, b](Tape& t, const Tensor& g) {
    if (a.requires_grad()) {
      Tensor ga = g;
      auto bs = b.value().values();
      auto gv = ga.values();
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= bs[i];
      t.accumulate(a, ga);
    }
    if (b.requires_grad()) {
      Tensor gb = g;
      auto av = a.value().values();
      auto gv = gb.values();
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= av[i];
      t.accumulate(b, gb);
    }
  });
}

Var scale(const Var& a, double s) {
  return a.tape().record(map(a.value(), [s](double v) { return v * s; }), {a},
                         [a, s](Tape& t, const Tensor& g) {
                           t.accumulate(a, map(g, [s](double v) { return v * s; }));
                         });
}

Var add_scalar(const Var& a, double s) {
  return a.tape().record(map(a.value(), [s](double v) { return v + s; }), {a},
                         [a](Tape& t, const Tensor& g) { t.accumulate(a, g); });
}

Var exp(const Var& a) {
  Tensor y = map(a.value(), [](double v) { return std::exp(v); });
  return a.tape().record(y, {a}, [a, y](Tape& t, const Tensor& g) {
    Tensor ga = g;
    auto yv = y.values();
    auto gv = ga.values();
    for (std::size_t i = 0; i < gv.size(); ++i) gv[i] *= yv[i];
    t.accumulate(a, ga);
  });
}

Var clamp_min(const Var& a, double floor) {
  return a.tape().record(map(a.value(), [floor](double v) { return v < floor ? floor : v; }), {a},
                         [a, floor](Tape& t, const Tensor& g) {
                           Tensor ga = g;
                           auto av = a.value().values();
                           auto gv = ga.values();
                           for (std::size_t i = 0; i < gv.size(); ++i)
                             if (av[i] < floor) gv[i] = 0.0;
                           t.accumulate(a, ga);
                         });
}

Var log_softmax(const Var& logits) {
  const Tensor& z = logits.value();
  const std::size_t rows = z.rows(), cols = z.cols();
  Tensor y = Tensor::zeros({rows, cols});
  for (std::size_t i = 0; i < rows; ++i) {
    auto zr = z.row(i);
    const double m = *std::max_element(zr.begin(), zr.end());
    double s = 0.0;
    for (double v : zr) s += std::exp(v - m);
    const double lse = m + std::log(s);
    for (std::size_t c = 0; c < cols; ++c) y(i, c) = zr[c] - lse;
  }
  return logits.tape().record(y, {logits}, [logits, y, rows, cols](Tape& t, const Tensor& g) {
    // d/dz_j sum_c g_c (z_c - lse) = g_j - softmax_j * sum_c g_c
    Tensor gz = Tensor::zeros({rows, cols});
    for (std::size_t i = 0; i < rows; ++i) {
      double gs = 0.0;
      for (std::size_t c = 0; c < cols; ++c) gs += g(i, c);
      for (std::size_t c = 0; c < cols; ++c) gz(i, c) = g(i, c) - std::exp(y(i, c)) * gs;
    }
    t.accumulate(logits, gz);
  });
}

Var row_sum(const Var& a) {
  const Tensor& av = a.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor y = Tensor::zeros({rows, 1});
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (double v : av.row(i)) s += v;
    y(i, 0) = s;
  }
  return a.tape().record(std::move(y), {a}, [a, rows, cols](Tape& t, const Tensor& g) {
    Tensor ga = Tensor::zeros({rows, cols});
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t c = 0; c < cols; ++c) ga(i, c) = g(i, 0);
    t.accumulate(a, ga);
  });
}

Var sum(const Var& a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  return a.tape().record(Tensor::scalar(s), {a}, [a](Tape& t, const Tensor& g) {
    t.accumulate(a, Tensor::filled(a.value().shape(), g[0]));
  });
}

Var mean(const Var& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw std::invalid_argument("mean of empty tensor");
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const double inv = 1.0 / static_cast<double>(n);
  return a.tape().record(Tensor::scalar(s / static_cast<double>(n)), {a}, [a, inv](Tape& t, const Tensor& g) {
    t.accumulate(a, Tensor::filled(a.value().shape(), g[0] * inv));
  });
}

Var detach(const Var& a) { return a.tape().constant(a.value()); }

}  // namespace ad
}  // namespace srst
