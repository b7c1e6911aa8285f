#include "srst/net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace srst {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "tanh"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

void ScoreNet::validate() const {
  if (layer_widths.size() < 3) {
    throw std::invalid_argument("score net needs input, at least one hidden layer, and output");
  }
  for (std::size_t w : layer_widths) {
    if (w == 0) throw std::invalid_argument("layer widths must be positive");
  }
  if (layer_widths.back() < 2) throw std::invalid_argument("score net needs at least 2 classes");
}

std::size_t ParamSet::count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

std::vector<Tensor*> ParamSet::tensors() {
  std::vector<Tensor*> out;
  for (auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::vector<const Tensor*> ParamSet::tensors() const {
  std::vector<const Tensor*> out;
  for (const auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet z;
  for (const auto& l : layers) {
    z.layers.push_back({Tensor::zeros(l.weight.shape()), Tensor::zeros(l.bias.shape())});
  }
  return z;
}

void check_params(const ScoreNet& net, const ParamSet& params) {
  if (params.layers.size() != net.num_layers()) {
    throw std::invalid_argument("parameter set has " + std::to_string(params.layers.size()) +
                                " layers, net expects " + std::to_string(net.num_layers()));
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    const std::size_t in = net.layer_widths[l], out = net.layer_widths[l + 1];
    if (layer.weight.shape() != std::vector<std::size_t>{out, in} ||
        layer.bias.shape() != std::vector<std::size_t>{1, out}) {
      throw std::invalid_argument("layer " + std::to_string(l) + " has weight " +
                                  layer.weight.shape_string() + " bias " + layer.bias.shape_string() +
                                  ", expected [" + std::to_string(out) + ", " + std::to_string(in) + "]");
    }
  }
}

ParamSet init_params(const ScoreNet& net, const RngStream& stream) {
  net.validate();
  Sampler rng(stream);
  ParamSet p;
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const std::size_t in = net.layer_widths[l], out = net.layer_widths[l + 1];
    const double bound = net.activation == Activation::relu
                             ? std::sqrt(6.0 / static_cast<double>(in))
                             : std::sqrt(6.0 / static_cast<double>(in + out));
    Tensor w = Tensor::zeros({out, in});
    for (double& v : w.values()) v = rng.uniform(-bound, bound);
    p.layers.push_back({std::move(w), Tensor::zeros({1, out})});
  }
  return p;
}

BoundNet::BoundNet(Tape& tape, const ScoreNet& net, const ParamSet& params, bool trainable)
    : tape_(&tape), net_(&net) {
  net.validate();
  check_params(net, params);
  for (const auto& l : params.layers) {
    weights_.push_back(tape.leaf(l.weight, trainable));
    biases_.push_back(tape.leaf(l.bias, trainable));
  }
}

Var BoundNet::operator()(const Var& x) const {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.cols() != net_->input_width()) {
    throw std::invalid_argument("input " + xv.shape_string() + " does not match net input width " +
                                std::to_string(net_->input_width()));
  }
  Var h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = ad::affine(h, weights_[l], biases_[l]);
    if (l + 1 < weights_.size()) {
      h = net_->activation == Activation::relu ? ad::relu(h) : ad::tanh(h);
    }
  }
  return h;
}

ParamSet BoundNet::gradients() const {
  ParamSet g;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    g.layers.push_back({tape_->grad(weights_[l]), tape_->grad(biases_[l])});
  }
  return g;
}

Tensor forward_logits(const ScoreNet& net, const ParamSet& params, const Tensor& x) {
  Tape tape;
  BoundNet f(tape, net, params, false);
  Tensor out = f(x).value();
  require_finite(out, "forward_logits");
  return out;
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2 || logits.cols() < 2) {
    throw std::invalid_argument("softmax needs [batch, C>=2], got " + logits.shape_string());
  }
  Tensor p = logits;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    auto r = p.row(i);
    const double m = *std::max_element(r.begin(), r.end());
    double s = 0.0;
    for (double& v : r) {
      v = std::exp(v - m);
      s += v;
    }
    for (double& v : r) v /= s;
  }
  require_finite(p, "softmax");
  return p;
}

Tensor temp_softmax(const Tensor& logits, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("temperature must be positive");
  Tensor scaled = logits;
  for (double& v : scaled.values()) v /= tau;
  return softmax(scaled);
}

std::vector<int> predict(const Tensor& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto r = logits.row(i);
    out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

ValueAndGrad value_and_grad_params(const ScoreNet& net, const ParamSet& params, const ParamLoss& loss) {
  Tape tape;
  BoundNet f(tape, net, params, true);
  Var l = loss(f);
  if (l.value().size() != 1) {
    throw std::invalid_argument("loss must be scalar, got " + l.value().shape_string());
  }
  tape.backward(l);
  ValueAndGrad out{l.value()[0], f.gradients()};
  for (const Tensor* t : out.grad.tensors()) require_finite(*t, "parameter gradient");
  return out;
}

ParamSet grad_params(const ScoreNet& net, const ParamSet& params, const ParamLoss& loss) {
  return value_and_grad_params(net, params, loss).grad;
}

Tensor grad_input(const ScoreNet& net, const ParamSet& params, const InputLoss& loss, const Tensor& x) {
  Tape tape;
  BoundNet f(tape, net, params, false);
  Var xv = tape.leaf(x, true);
  Var l = loss(f, xv);
  if (l.value().size() != 1) {
    throw std::invalid_argument("loss must be scalar, got " + l.value().shape_string());
  }
  tape.backward(l);
  Tensor g = tape.grad(xv);
  require_finite(g, "input gradient");
  return g;
}

namespace {
constexpr char kParamMagic[4] = {'R', 'S', 'L', 'B'};
constexpr unsigned char kParamVersion = 1;
}  // namespace

void write_params(std::ostream& out, const ParamSet& params) {
  out.write(kParamMagic, 4);
  out.put(static_cast<char>(kParamVersion));
  binio::put_u32(out, static_cast<std::uint32_t>(params.layers.size()));
  for (const auto& l : params.layers) {
    binio::put_u32(out, static_cast<std::uint32_t>(l.weight.rows()));
    binio::put_u32(out, static_cast<std::uint32_t>(l.weight.cols()));
  }
  for (const auto& l : params.layers) {
    for (double v : l.weight.values()) binio::put_f64(out, v);
    for (double v : l.bias.values()) binio::put_f64(out, v);
  }
  if (!out) throw std::runtime_error("failed writing parameter checkpoint");
}

ParamSet read_params(std::istream& in) {
  char magic[4];
  binio::get_bytes(in, magic, 4, "checkpoint magic");
  if (!std::equal(magic, magic + 4, kParamMagic)) throw std::runtime_error("not a parameter checkpoint");
  char version = 0;
  binio::get_bytes(in, &version, 1, "checkpoint version");
  if (static_cast<unsigned char>(version) != kParamVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(static_cast<int>(version)));
  }
  const std::uint32_t n = binio::get_u32(in, "layer count");
  std::vector<std::pair<std::size_t, std::size_t>> dims;
  for (std::uint32_t l = 0; l < n; ++l) {
    const std::size_t out = binio::get_u32(in, "layer dims");
    const std::size_t inw = binio::get_u32(in, "layer dims");
    dims.emplace_back(out, inw);
  }
  ParamSet p;
  for (auto [out, inw] : dims) {
    Tensor w = Tensor::zeros({out, inw});
    for (double& v : w.values()) v = binio::get_f64(in, "weights");
    Tensor b = Tensor::zeros({1, out});
    for (double& v : b.values()) v = binio::get_f64(in, "biases");
    p.layers.push_back({std::move(w), std::move(b)});
  }
  return p;
}

void save_params(const std::filesystem::path& path, const ParamSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_params(out, params);
}

ParamSet load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_params(in);
}

std::vector<std::size_t> widths_of(const ParamSet& params) {
  if (params.layers.empty()) throw std::invalid_argument("empty parameter set");
  std::vector<std::size_t> w{params.layers.front().weight.cols()};
  for (const auto& l : params.layers) w.push_back(l.weight.rows());
  return w;
}

}  // namespace srst
