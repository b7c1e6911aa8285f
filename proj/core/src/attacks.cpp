#include "srst/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "srst/losses.hpp"

namespace srst {

std::string to_string(InnerLoss l) {
  switch (l) {
    case InnerLoss::ce_true_label: return "ce_true_label";
    case InnerLoss::ce_teacher_label: return "ce_teacher_label";
    case InnerLoss::kl_from_clean: return "kl_from_clean";
  }
  return "?";
}

InnerLoss inner_loss_from_string(const std::string& s) {
  if (s == "ce_true_label") return InnerLoss::ce_true_label;
  if (s == "ce_teacher_label") return InnerLoss::ce_teacher_label;
  if (s == "kl_from_clean") return InnerLoss::kl_from_clean;
  throw std::invalid_argument("unknown inner loss '" + s + "'");
}

void AttackConfig::validate() const {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
  if (!(nu > 0.0)) throw std::invalid_argument("step size must be > 0");
  if (steps < 0) throw std::invalid_argument("steps must be >= 0");
  if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  if (!(domain.lo <= domain.hi)) throw std::invalid_argument("empty input domain");
}

Tensor project_linf(const Tensor& candidate, const Tensor& anchor, double epsilon, Domain domain) {
  if (candidate.shape() != anchor.shape()) {
    throw std::invalid_argument("project_linf: shape mismatch " + candidate.shape_string() + " vs " +
                                anchor.shape_string());
  }
  Tensor out = candidate;
  auto o = out.values();
  auto a = anchor.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double v = std::clamp(o[i], a[i] - epsilon, a[i] + epsilon);
    o[i] = std::clamp(v, domain.lo, domain.hi);
  }
  return out;
}

namespace {

void check_target(const AttackTarget& target, InnerLoss loss, std::size_t rows) {
  if (loss == InnerLoss::kl_from_clean) {
    if (!target.clean_probs) throw std::invalid_argument("kl_from_clean attack needs clean probabilities");
    if (target.clean_probs->rows() != rows) throw std::invalid_argument("clean probabilities misaligned");
  } else {
    if (!target.labels) throw std::invalid_argument(to_string(loss) + " attack needs labels");
    if (target.labels->size() != rows) throw std::invalid_argument("attack labels misaligned");
  }
}

Var inner_loss_rows(const BoundNet& f, const Var& x, const AttackTarget& target, InnerLoss loss) {
  Var z = f(x);
  if (loss == InnerLoss::kl_from_clean) return ad::kl_rows_const(*target.clean_probs, z);
  return ad::cross_entropy_rows(z, *target.labels);
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

std::vector<double> inner_loss_values(const ScoreNet& net, const ParamSet& params, const Tensor& x,
                                      const AttackTarget& target, InnerLoss loss) {
  check_target(target, loss, x.rows());
  Tape tape;
  BoundNet f(tape, net, params, false);
  const Tensor& rows = inner_loss_rows(f, tape.constant(x), target, loss).value();
  return {rows.values().begin(), rows.values().end()};
}

AdvBatch pgd(const ScoreNet& net, const ParamSet& params, const Tensor& x, const AttackTarget& target,
             const AttackConfig& cfg, const RngStream& stream) {
  cfg.validate();
  check_target(target, cfg.inner_loss, x.rows());
  Tensor adv = x;
  if (cfg.random_start) {
    for (std::size_t i = 0; i < adv.rows(); ++i) {
      Sampler rng(stream.child(i));
      for (double& v : adv.row(i)) v += rng.uniform(-cfg.epsilon, cfg.epsilon);
    }
    adv = project_linf(adv, x, cfg.epsilon, cfg.domain);
  }
  const InputLoss loss = [&](const BoundNet& f, const Var& xv) {
    return ad::sum(inner_loss_rows(f, xv, target, cfg.inner_loss));
  };
  for (int step = 0; step < cfg.steps; ++step) {
    const Tensor g = grad_input(net, params, loss, adv);
    auto a = adv.values();
    auto gv = g.values();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += cfg.nu * sign(gv[i]);
    adv = project_linf(adv, x, cfg.epsilon, cfg.domain);
  }
  auto achieved = inner_loss_values(net, params, adv, target, cfg.inner_loss);
  return {std::move(adv), std::move(achieved)};
}

AdvBatch multi_restart_pgd(const ScoreNet& net, const ParamSet& params, const Tensor& x,
                           const AttackTarget& target, const AttackConfig& cfg, int restarts,
                           const RngStream& stream) {
  if (restarts < 1) throw std::invalid_argument("restarts must be >= 1");
  AdvBatch best = pgd(net, params, x, target, cfg, stream);
  const RngStream restart_root = stream.child("restart");
  for (int r = 1; r < restarts; ++r) {
    AdvBatch run = pgd(net, params, x, target, cfg, restart_root.child(static_cast<std::uint64_t>(r)));
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (run.loss[i] > best.loss[i]) {
        best.loss[i] = run.loss[i];
        std::copy(run.x.row(i).begin(), run.x.row(i).end(), best.x.row(i).begin());
      }
    }
  }
  return best;
}

AdvBatch random_search_attack(const ScoreNet& net, const ParamSet& params, const Tensor& x,
                              const std::vector<int>& y, double epsilon, int queries, const RngStream& stream,
                              Domain domain) {
  if (!(epsilon >= 0.0)) throw std::invalid_argument("epsilon must be >= 0");
  const AttackTarget target = AttackTarget::of_labels(y);
  Tensor adv = project_linf(x, x, epsilon, domain);
  std::vector<double> best = inner_loss_values(net, params, adv, target, InnerLoss::ce_true_label);
  if (queries <= 0) return {std::move(adv), std::move(best)};

  const std::size_t d = x.cols();
  const std::size_t block = std::max<std::size_t>(1, (d + 3) / 4);
  std::vector<Sampler> rngs;
  rngs.reserve(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) rngs.emplace_back(stream.child(i));

  for (int q = 0; q < queries; ++q) {
    Tensor proposal = adv;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      Sampler& rng = rngs[i];
      const std::size_t start = rng.below(d - block + 1);
      for (std::size_t j = start; j < start + block; ++j) {
        proposal(i, j) = x(i, j) + (rng.bernoulli(0.5) ? epsilon : -epsilon);
      }
    }
    proposal = project_linf(proposal, x, epsilon, domain);
    const auto loss = inner_loss_values(net, params, proposal, target, InnerLoss::ce_true_label);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (loss[i] > best[i]) {
        best[i] = loss[i];
        std::copy(proposal.row(i).begin(), proposal.row(i).end(), adv.row(i).begin());
      }
    }
  }
  return {std::move(adv), std::move(best)};
}

}  // namespace srst
