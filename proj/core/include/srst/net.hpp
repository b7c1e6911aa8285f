#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "srst/autodiff.hpp"
#include "srst/rng.hpp"
#include "srst/tensor.hpp"

namespace srst {

enum class Activation { relu, tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

/// Dense score network f: R^d -> R^C. The activation is applied to hidden
/// layers only; the output layer is affine.
struct ScoreNet {
  std::vector<std::size_t> layer_widths;  // input d, hidden..., output C
  Activation activation = Activation::relu;

  [[nodiscard]] std::size_t input_width() const { return layer_widths.front(); }
  [[nodiscard]] std::size_t num_classes() const { return layer_widths.back(); }
  [[nodiscard]] std::size_t num_layers() const { return layer_widths.size() - 1; }

  // Throws std::invalid_argument unless there is a hidden layer and C >= 2.
  void validate() const;

  friend bool operator==(const ScoreNet&, const ScoreNet&) = default;
};

struct DenseLayer {
  Tensor weight;  // [out, in]
  Tensor bias;    // [1, out]

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Parameters of a ScoreNet. Parameter gradients use the same structure.
struct ParamSet {
  std::vector<DenseLayer> layers;

  [[nodiscard]] std::size_t count() const;
  [[nodiscard]] std::vector<Tensor*> tensors();
  [[nodiscard]] std::vector<const Tensor*> tensors() const;
  [[nodiscard]] ParamSet zeros_like() const;

  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

// Throws std::invalid_argument when params do not fit the net.
void check_params(const ScoreNet& net, const ParamSet& params);

/// He-uniform weights for relu, Glorot-uniform for tanh, zero biases.
ParamSet init_params(const ScoreNet& net, const RngStream& stream);

/// A net whose parameters live on a tape, so it can be called on Vars.
class BoundNet {
 public:
  BoundNet(Tape& tape, const ScoreNet& net, const ParamSet& params, bool trainable);

  Var operator()(const Var& x) const;
  Var operator()(const Tensor& x) const { return (*this)(tape_->constant(x)); }

  [[nodiscard]] Tape& tape() const { return *tape_; }
  [[nodiscard]] const ScoreNet& net() const { return *net_; }
  [[nodiscard]] ParamSet gradients() const;

 private:
  Tape* tape_;
  const ScoreNet* net_;
  std::vector<Var> weights_;
  std::vector<Var> biases_;
};

Tensor forward_logits(const ScoreNet& net, const ParamSet& params, const Tensor& x);

Tensor softmax(const Tensor& logits);
Tensor temp_softmax(const Tensor& logits, double tau);
// argmax per row, lowest index on ties
std::vector<int> predict(const Tensor& logits);

using ParamLoss = std::function<Var(const BoundNet&)>;
using InputLoss = std::function<Var(const BoundNet&, const Var& x)>;

struct ValueAndGrad {
  double value = 0.0;
  ParamSet grad;
};

ValueAndGrad value_and_grad_params(const ScoreNet& net, const ParamSet& params, const ParamLoss& loss);
ParamSet grad_params(const ScoreNet& net, const ParamSet& params, const ParamLoss& loss);
Tensor grad_input(const ScoreNet& net, const ParamSet& params, const InputLoss& loss, const Tensor& x);

// Binary checkpoint: "RSLB", version byte 1, u32 layer count, per layer
// (u32 out, u32 in), then per layer the weights and biases as little-endian
// IEEE-754 doubles.
void write_params(std::ostream& out, const ParamSet& params);
ParamSet read_params(std::istream& in);
void save_params(const std::filesystem::path& path, const ParamSet& params);
ParamSet load_params(const std::filesystem::path& path);

/// Widths implied by a parameter set (for nets restored from checkpoints).
std::vector<std::size_t> widths_of(const ParamSet& params);

}  // namespace srst
