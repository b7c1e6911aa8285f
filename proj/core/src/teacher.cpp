#include "srst/teacher.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "batching.hpp"
#include "binary_io.hpp"

namespace srst {

Tensor augment(const Tensor& x, const AugmentSpec& spec, const RngStream& stream) {
  Tensor out = x;
  const std::size_t d = x.cols();
  const auto block = static_cast<std::size_t>(std::floor(spec.cutout_fraction * static_cast<double>(d)));
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    if (spec.noise == 0.0 && spec.shift == 0.0 && block == 0) continue;
    Sampler rng(stream.child(i));
    for (double& v : row) {
      if (spec.shift != 0.0) v += rng.uniform(-spec.shift, spec.shift);
      if (spec.noise != 0.0) v += rng.uniform(-spec.noise, spec.noise);
    }
    if (block > 0) {
      const std::size_t start = rng.below(d - std::min(block, d) + 1);
      for (std::size_t j = start; j < std::min(d, start + block); ++j) row[j] = 0.5;
    }
    for (double& v : row) v = std::clamp(v, spec.domain.lo, spec.domain.hi);
  }
  return out;
}

void FixMatchConfig::validate() const {
  if (!(confidence_threshold > 0.0 && confidence_threshold < 1.0)) {
    throw std::invalid_argument("confidence threshold must lie in (0, 1)");
  }
  if (!(unlabeled_weight >= 0.0)) throw std::invalid_argument("unlabeled weight must be >= 0");
  if (unlabeled_batch == 0) throw std::invalid_argument("unlabeled batch must be positive");
}

namespace {

Var fixmatch_objective(const BoundNet& f, const LabeledBatch& labeled_weak, const Tensor& unlabeled_weak,
                       const Tensor& unlabeled_strong, const FixMatchConfig& cfg, FixMatchTerms* terms) {
  Var sup = ad::mean(ad::cross_entropy_rows(f(labeled_weak.x), labeled_weak.y));
  if (terms) terms->supervised = sup.value()[0];

  // pseudo-labels come from the weak view and carry no gradient
  const Tensor weak_probs = softmax(f(unlabeled_weak).value());
  std::vector<std::size_t> keep;
  std::vector<int> pseudo;
  for (std::size_t i = 0; i < weak_probs.rows(); ++i) {
    auto r = weak_probs.row(i);
    const auto best = std::max_element(r.begin(), r.end());
    if (*best > cfg.confidence_threshold) {
      keep.push_back(i);
      pseudo.push_back(static_cast<int>(best - r.begin()));
    }
  }
  if (terms) terms->mask_count = keep.size();
  if (keep.empty() || cfg.unlabeled_weight == 0.0) return sup;
  Var unl = ad::mean(ad::cross_entropy_rows(f(unlabeled_strong.select_rows(keep)), pseudo));
  if (terms) terms->unlabeled = unl.value()[0];
  return ad::add(sup, ad::scale(unl, cfg.unlabeled_weight));
}

}  // namespace

FixMatchTerms fixmatch_loss(const ScoreNet& net, const ParamSet& params, const LabeledBatch& labeled_weak,
                            const Tensor& unlabeled_weak, const Tensor& unlabeled_strong, const FixMatchConfig& cfg) {
  cfg.validate();
  Tape tape;
  BoundNet f(tape, net, params, false);
  FixMatchTerms terms;
  fixmatch_objective(f, labeled_weak, unlabeled_weak, unlabeled_strong, cfg, &terms);
  return terms;
}

double mask_fraction(const Tensor& logits, double threshold) {
  const Tensor p = softmax(logits);
  std::size_t n = 0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    auto r = p.row(i);
    if (*std::max_element(r.begin(), r.end()) > threshold) ++n;
  }
  return p.rows() ? static_cast<double>(n) / static_cast<double>(p.rows()) : 0.0;
}

ParamSet train_supervised_teacher(const Dataset& labeled, const ScoreNet& net, const OptimizerConfig& opt,
                                  std::uint64_t seed) {
  if (labeled.size() == 0) throw std::invalid_argument("supervised teacher needs a nonempty labeled set");
  ParamSet params = init_params(net, RngStream::named(seed, Stream::init));
  ParamSet momentum;
  const RngStream order = RngStream::named(seed, Stream::batch_order);
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    for (const auto& batch : detail::epoch_batches(labeled.size(), opt.batch_size, order.child(epoch))) {
      const Dataset b = labeled.subset(batch);
      const ParamSet g = grad_params(net, params, [&](const BoundNet& f) {
        return ad::mean(ad::cross_entropy_rows(f(b.x), b.y));
      });
      sgd_step(params, g, opt.lr, momentum, opt.momentum, opt.weight_decay);
    }
  }
  return params;
}

ParamSet train_fixmatch_teacher(const Dataset& labeled, const Tensor& unlabeled, const ScoreNet& net,
                                const FixMatchConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (labeled.size() == 0 || unlabeled.rows() == 0) {
    throw std::invalid_argument("FixMatch teacher needs nonempty labeled and unlabeled sets");
  }
  const OptimizerConfig& opt = cfg.optimizer;
  ParamSet params = init_params(net, RngStream::named(seed, Stream::init));
  ParamSet momentum;
  const RngStream order = RngStream::named(seed, Stream::batch_order);
  const RngStream aug = RngStream::named(seed, Stream::augmentation);
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    const RngStream epoch_order = order.child(epoch);
    for (const auto& batch : detail::epoch_batches(labeled.size(), opt.batch_size, epoch_order)) {
      const RngStream step_aug = aug.child(step);
      const auto ub = detail::sample_rows(unlabeled.rows(), cfg.unlabeled_batch, epoch_order.child("unlabeled").child(step));
      const Dataset lb = labeled.subset(batch);
      const LabeledBatch lw{augment(lb.x, cfg.weak, step_aug.child("labeled")), lb.y};
      const Tensor ux = unlabeled.select_rows(ub);
      const Tensor uw = augment(ux, cfg.weak, step_aug.child("weak"));
      const Tensor us = augment(ux, cfg.strong, step_aug.child("strong"));
      const ParamSet g = grad_params(net, params, [&](const BoundNet& f) {
        return fixmatch_objective(f, lw, uw, us, cfg, nullptr);
      });
      sgd_step(params, g, opt.lr, momentum, opt.momentum, opt.weight_decay);
      ++step;
    }
  }
  return params;
}

Fingerprint sha256(std::string_view bytes) {
  Fingerprint out{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size()) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  return out;
}

Fingerprint fingerprint(const Tensor& x) {
  std::ostringstream bytes;
  binio::put_u64(bytes, x.rank());
  for (std::size_t d : x.shape()) binio::put_u64(bytes, d);
  for (double v : x.values()) binio::put_f64(bytes, v);
  return sha256(bytes.str());
}

std::string to_hex(const Fingerprint& f) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (std::uint8_t b : f) {
    s += digits[b >> 4];
    s += digits[b & 0xf];
  }
  return s;
}

TeacherOutputs SoftLabelStore::outputs() const { return {soft, probs, predict(probs)}; }

SoftLabelStore export_soft_labels(const ScoreNet& net, const ParamSet& teacher, const Tensor& unlabeled,
                                  double tau_kd, TeacherMeta meta) {
  if (!(tau_kd > 0.0)) throw std::invalid_argument("distillation temperature must be > 0");
  const Tensor logits = forward_logits(net, teacher, unlabeled);
  meta.tau = tau_kd;
  return {fingerprint(unlabeled), temp_softmax(logits, tau_kd), softmax(logits), std::move(meta)};
}

SoftLabelStore labels_as_teacher(const Dataset& data) {
  Tensor rows = one_hot(data.y, data.num_classes);
  return {fingerprint(data.x), rows, rows, {"labels", 0, 1.0, 1.0}};
}

namespace {
constexpr char kStoreMagic[4] = {'R', 'S', 'L', 'S'};
constexpr unsigned char kStoreVersion = 1;

std::filesystem::path meta_path(const std::filesystem::path& p) { return p.string() + ".meta.json"; }
}  // namespace

void save_soft_labels(const std::filesystem::path& path, const SoftLabelStore& store) {
  if (store.soft.shape() != store.probs.shape()) throw std::invalid_argument("soft-label rows disagree in shape");
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out.write(kStoreMagic, 4);
    out.put(static_cast<char>(kStoreVersion));
    out.write(reinterpret_cast<const char*>(store.dataset_fingerprint.data()), 32);
    binio::put_u64(out, store.probs.rows());
    binio::put_u64(out, store.probs.cols());
    for (double v : store.soft.values()) binio::put_f64(out, v);
    for (double v : store.probs.values()) binio::put_f64(out, v);
    if (!out) throw std::runtime_error("failed writing " + path.string());
  }
  nlohmann::json meta = {{"kind", store.meta.kind},
                         {"seed", store.meta.seed},
                         {"accuracy", store.meta.accuracy},
                         {"tau", store.meta.tau},
                         {"fingerprint", to_hex(store.dataset_fingerprint)}};
  std::ofstream(meta_path(path)) << meta.dump() << '\n';
}

SoftLabelStore load_soft_labels(const std::filesystem::path& path, const std::optional<Fingerprint>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  binio::get_bytes(in, magic, 4, "soft-label magic");
  if (!std::equal(magic, magic + 4, kStoreMagic)) throw std::runtime_error(path.string() + " is not a soft-label store");
  char version = 0;
  binio::get_bytes(in, &version, 1, "soft-label version");
  if (static_cast<unsigned char>(version) != kStoreVersion) throw std::runtime_error("unsupported soft-label version");
  SoftLabelStore s;
  binio::get_bytes(in, reinterpret_cast<char*>(s.dataset_fingerprint.data()), 32, "fingerprint");
  if (expected && *expected != s.dataset_fingerprint) {
    throw std::runtime_error("soft-label fingerprint " + to_hex(s.dataset_fingerprint) +
                             " does not match dataset " + to_hex(*expected));
  }
  const std::size_t rows = binio::get_u64(in, "row count");
  const std::size_t cols = binio::get_u64(in, "class count");
  s.soft = Tensor::zeros({rows, cols});
  s.probs = Tensor::zeros({rows, cols});
  for (double& v : s.soft.values()) v = binio::get_f64(in, "soft rows");
  for (double& v : s.probs.values()) v = binio::get_f64(in, "probability rows");

  std::ifstream mf(meta_path(path));
  if (mf) {
    const auto meta = nlohmann::json::parse(mf);
    s.meta.kind = meta.at("kind").get<std::string>();
    s.meta.seed = meta.at("seed").get<std::uint64_t>();
    s.meta.accuracy = meta.at("accuracy").get<double>();
    s.meta.tau = meta.at("tau").get<double>();
  }
  return s;
}

}  // namespace srst
