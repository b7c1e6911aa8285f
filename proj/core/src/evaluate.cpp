#include "srst/evaluate.hpp"

#include <stdexcept>

namespace srst {

AccuracyCount count_correct(const ScoreNet& net, const ParamSet& params, const Tensor& x, const std::vector<int>& y) {
  if (x.rows() != y.size()) throw std::invalid_argument("inputs and labels differ in count");
  const auto pred = predict(forward_logits(net, params, x));
  AccuracyCount c{0, y.size()};
  for (std::size_t i = 0; i < y.size(); ++i)
    if (pred[i] == y[i]) ++c.correct;
  return c;
}

AccuracyCount robust_count(const ScoreNet& net, const ParamSet& params, const Dataset& data, AttackConfig attack,
                           const RngStream& stream) {
  attack.inner_loss = InnerLoss::ce_true_label;
  const AdvBatch adv = pgd(net, params, data.x, AttackTarget::of_labels(data.y), attack, stream);
  return count_correct(net, params, adv.x, data.y);
}

MetricsRecord evaluate(const ScoreNet& net, const ParamSet& params, const Dataset& test, const EvalConfig& cfg,
                       const RngStream& stream) {
  check_params(net, params);
  AttackConfig attack = cfg.pgd;
  attack.inner_loss = InnerLoss::ce_true_label;
  const AttackTarget target = AttackTarget::of_labels(test.y);

  MetricsRecord m;
  m.n_test = test.size();
  m.std_acc = count_correct(net, params, test.x, test.y).rate();
  // An empty ball cannot move any input.
  if (attack.epsilon == 0.0) {
    m.rob_acc_pgd20 = m.rob_acc_multi = m.rob_acc_blackbox = m.std_acc;
    return m;
  }
  const RngStream white = stream.child("pgd");
  m.rob_acc_pgd20 = count_correct(net, params, pgd(net, params, test.x, target, attack, white).x, test.y).rate();
  // restart 0 replays the single run, so this can only flip more examples
  m.rob_acc_multi =
      count_correct(net, params, multi_restart_pgd(net, params, test.x, target, attack, cfg.restarts, white).x, test.y)
          .rate();
  const AdvBatch bb = random_search_attack(net, params, test.x, test.y, attack.epsilon, cfg.blackbox_queries,
                                           stream.child("blackbox"), attack.domain);
  m.rob_acc_blackbox = count_correct(net, params, bb.x, test.y).rate();
  m.masking_gap = m.rob_acc_blackbox - m.rob_acc_pgd20;
  return m;
}

}  // namespace srst
