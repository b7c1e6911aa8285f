#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "srst/tensor.hpp"

namespace srst {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
 public:
  Var() = default;

  [[nodiscard]] const Tensor& value() const;
  [[nodiscard]] Tape& tape() const { return *tape_; }
  [[nodiscard]] std::size_t id() const { return id_; }
  [[nodiscard]] bool requires_grad() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode tape. Nodes are appended in evaluation order, so the node
/// vector is already a topological order and backward is a reverse sweep.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& upstream)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Records an op result. `backward` is dropped when no parent needs a gradient.
  Var record(Tensor value, std::initializer_list<Var> parents, Backward backward);

  // Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be [1, 1].
  void backward(const Var& loss);

  // Gradient accumulated on `v`; zeros if nothing reached it.
  [[nodiscard]] Tensor grad(const Var& v) const;

  void accumulate(const Var& v, const Tensor& g);
  void accumulate(const Var& v, std::span<const double> g);

  [[nodiscard]] const Tensor& value_of(std::size_t id) const { return nodes_[id].value; }
  [[nodiscard]] bool requires_grad_of(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

namespace ad {

// x: [B, in], weight: [out, in], bias: [1, out]  ->  [B, out]
Var affine(const Var& x, const Var& weight, const Var& bias);
Var relu(const Var& a);
Var tanh(const Var& a);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var exp(const Var& a);
// Entries below `floor` are replaced by `floor`; no gradient flows through them.
Var clamp_min(const Var& a, double floor);
// Row-wise log-softmax with max subtraction.
Var log_softmax(const Var& logits);
// [B, C] -> [B, 1]
Var row_sum(const Var& a);
// -> [1, 1]; sums in index order.
Var sum(const Var& a);
Var mean(const Var& a);
// Value copy with the gradient path cut.
Var detach(const Var& a);

}  // namespace ad
}  // namespace srst
