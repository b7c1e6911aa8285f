#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "srst/attacks.hpp"
#include "srst/dataset.hpp"
#include "srst/losses.hpp"
#include "srst/net.hpp"
#include "srst/optim.hpp"
#include "srst/rng.hpp"

namespace srst {

struct AugmentSpec {
  double noise = 0.0;            // additive uniform noise in [-noise, noise]
  double shift = 0.0;            // per-example translation in [-shift, shift] per coordinate
  double cutout_fraction = 0.0;  // contiguous block of floor(fraction * d) coordinates set to 0.5
  Domain domain;
};

/// Example i draws from `stream.child(i)`; outputs are clamped to the domain.
Tensor augment(const Tensor& x, const AugmentSpec& spec, const RngStream& stream);

struct FixMatchConfig {
  double confidence_threshold = 0.95;
  double unlabeled_weight = 1.0;
  std::size_t unlabeled_batch = 128;
  AugmentSpec weak{0.02, 0.02, 0.0, {}};
  AugmentSpec strong{0.06, 0.0, 0.25, {}};
  OptimizerConfig optimizer;

  void validate() const;
};

/// Supervised teacher trained on the labeled set only. Returns final-epoch
/// parameters; deterministic given the seed.
ParamSet train_supervised_teacher(const Dataset& labeled, const ScoreNet& net, const OptimizerConfig& opt,
                                  std::uint64_t seed);

/// FixMatch-style teacher: per step, CE on a weakly augmented labeled batch
/// plus unlabeled_weight times the CE between strongly augmented inputs and
/// the argmax on their weak views, over the examples whose confidence clears
/// the threshold, divided by that count (the term is 0 when none pass).
ParamSet train_fixmatch_teacher(const Dataset& labeled, const Tensor& unlabeled, const ScoreNet& net,
                                const FixMatchConfig& cfg, std::uint64_t seed);

/// Value of the FixMatch objective for one step's inputs, exposed for tests.
struct FixMatchTerms {
  double supervised = 0.0;
  double unlabeled = 0.0;
  std::size_t mask_count = 0;
};
FixMatchTerms fixmatch_loss(const ScoreNet& net, const ParamSet& params, const LabeledBatch& labeled_weak,
                            const Tensor& unlabeled_weak, const Tensor& unlabeled_strong, const FixMatchConfig& cfg);

// Fraction of rows whose max softmax probability is above the threshold.
double mask_fraction(const Tensor& logits, double threshold);

using Fingerprint = std::array<std::uint8_t, 32>;

Fingerprint sha256(std::string_view bytes);

/// SHA-256 over the shape and the little-endian bytes of the values.
Fingerprint fingerprint(const Tensor& x);
std::string to_hex(const Fingerprint& f);

struct TeacherMeta {
  std::string kind;  // "supervised", "fixmatch", "labels"
  std::uint64_t seed = 0;
  double accuracy = 0.0;  // on held-out labeled data
  double tau = 1.0;

  friend bool operator==(const TeacherMeta&, const TeacherMeta&) = default;
};

struct SoftLabelStore {
  Fingerprint dataset_fingerprint{};
  Tensor soft;   // temperature rows
  Tensor probs;  // tau = 1 rows
  TeacherMeta meta;

  [[nodiscard]] std::size_t rows() const { return probs.rows(); }
  [[nodiscard]] TeacherOutputs outputs() const;

  friend bool operator==(const SoftLabelStore&, const SoftLabelStore&) = default;
};

SoftLabelStore export_soft_labels(const ScoreNet& net, const ParamSet& teacher, const Tensor& unlabeled,
                                  double tau_kd, TeacherMeta meta = {});

/// Teacher rows built from true labels (the fully supervised configuration).
SoftLabelStore labels_as_teacher(const Dataset& data);

// Binary layout: "RSLS", version byte 1, 32-byte fingerprint, u64 rows, u64 C,
// tau rows then tau = 1 rows as little-endian doubles. Metadata goes to a
// JSON sidecar at `<path>.meta.json`.
void save_soft_labels(const std::filesystem::path& path, const SoftLabelStore& store);
SoftLabelStore load_soft_labels(const std::filesystem::path& path,
                                const std::optional<Fingerprint>& expected = std::nullopt);

}  // namespace srst
