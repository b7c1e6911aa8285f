#pragma once

#include <optional>
#include <vector>

#include "srst/net.hpp"
#include "srst/rng.hpp"
#include "srst/tensor.hpp"

namespace srst {

enum class InnerLoss {
  ce_true_label,
  ce_teacher_label,
  kl_from_clean,
};

std::string to_string(InnerLoss l);
InnerLoss inner_loss_from_string(const std::string& s);

/// Closed box applied to every input coordinate.
struct Domain {
  double lo = 0.0;
  double hi = 1.0;
};

struct AttackConfig {
  double epsilon = 0.1;
  double nu = 0.025;
  int steps = 10;
  bool random_start = true;
  InnerLoss inner_loss = InnerLoss::ce_teacher_label;
  int restarts = 1;
  Domain domain;

  void validate() const;

  /// Step size at the default ratio of a quarter of the radius.
  static AttackConfig pgd(double epsilon, int steps, InnerLoss loss = InnerLoss::ce_true_label) {
    AttackConfig c;
    c.epsilon = epsilon;
    c.nu = epsilon > 0.0 ? epsilon / 4.0 : 1e-3;
    c.steps = steps;
    c.inner_loss = loss;
    return c;
  }
};

/// What the inner loss is measured against: labels for the CE losses, clean
/// probability rows for the KL loss.
struct AttackTarget {
  std::optional<std::vector<int>> labels;
  std::optional<Tensor> clean_probs;

  static AttackTarget of_labels(std::vector<int> y) { return {std::move(y), std::nullopt}; }
  static AttackTarget of_probs(Tensor p) { return {std::nullopt, std::move(p)}; }
};

struct AdvBatch {
  Tensor x;                 // aligned with the source batch
  std::vector<double> loss; // inner loss achieved per example
};

// Coordinate-wise clamp to [anchor - eps, anchor + eps], then to the domain.
Tensor project_linf(const Tensor& candidate, const Tensor& anchor, double epsilon, Domain domain);

// Per-example inner loss at `x`.
std::vector<double> inner_loss_values(const ScoreNet& net, const ParamSet& params, const Tensor& x,
                                      const AttackTarget& target, InnerLoss loss);

/// Sign-gradient ascent with projection after every step; returns the last
/// iterate. Example i draws its random start from `stream.child(i)`.
AdvBatch pgd(const ScoreNet& net, const ParamSet& params, const Tensor& x, const AttackTarget& target,
             const AttackConfig& cfg, const RngStream& stream);

/// Best-by-loss over `restarts` PGD runs. Restart 0 uses `stream`; restart r
/// uses `stream.child("restart").child(r)`.
AdvBatch multi_restart_pgd(const ScoreNet& net, const ParamSet& params, const Tensor& x,
                           const AttackTarget& target, const AttackConfig& cfg, int restarts,
                           const RngStream& stream);

/// Gradient-free probe: proposes coordinate blocks pushed to +/- epsilon and
/// keeps a proposal when it strictly increases the example's cross-entropy.
AdvBatch random_search_attack(const ScoreNet& net, const ParamSet& params, const Tensor& x,
                              const std::vector<int>& y, double epsilon, int queries, const RngStream& stream,
                              Domain domain = {});

}  // namespace srst
