#include "srst/trainer.hpp"

#include <algorithm>
#include <istream>
#include <memory>
#include <nlohmann/json.hpp>
#include <ostream>
#include <stdexcept>

#include "batching.hpp"
#include "srst/evaluate.hpp"

namespace srst {

std::string to_string(Objective o) {
  switch (o) {
    case Objective::srst_awr: return "srst_awr";
    case Objective::srst_trades: return "srst_trades";
    case Objective::trades_rst: return "trades_rst";
    case Objective::uat_pp: return "uat_pp";
    case Objective::supervised_awr: return "supervised_awr";
  }
  return "?";
}

Objective objective_from_string(const std::string& s) {
  for (auto o : {Objective::srst_awr, Objective::srst_trades, Objective::trades_rst, Objective::uat_pp,
                 Objective::supervised_awr}) {
    if (to_string(o) == s) return o;
  }
  throw std::invalid_argument("unknown objective '" + s + "'");
}

bool needs_teacher(Objective o) { return o != Objective::supervised_awr; }

void TrainConfig::validate() const {
  net.validate();
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (labeled_batch == 0 || unlabeled_batch == 0) throw std::invalid_argument("batch sizes must be positive");
  if (!(initial_lr > 0.0)) throw std::invalid_argument("initial_lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("weight_decay must be >= 0");
  if (!(lr_drop_factor > 0.0 && lr_drop_factor <= 1.0)) throw std::invalid_argument("lr_drop_factor must lie in (0, 1]");
  for (std::size_t i = 0; i < lr_drop_epochs.size(); ++i) {
    if (lr_drop_epochs[i] <= 0 || (i > 0 && lr_drop_epochs[i] <= lr_drop_epochs[i - 1])) {
      throw std::invalid_argument("lr_drop_epochs must be positive and strictly increasing");
    }
  }
  if (swa_start_epoch < 0) throw std::invalid_argument("swa_start_epoch must be >= 0");
  awr.validate();
  attack.validate();
  selection_attack.validate();
}

double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.epochs) {
    throw std::out_of_range("epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(cfg.epochs) + ")");
  }
  double lr = cfg.initial_lr;
  for (int drop : cfg.lr_drop_epochs)
    if (epoch >= drop) lr *= cfg.lr_drop_factor;
  return lr;
}

std::size_t select_best(const std::vector<EpochRecord>& history) {
  if (history.empty()) throw std::invalid_argument("select_best needs a nonempty history");
  std::size_t best = 0;
  for (std::size_t i = 1; i < history.size(); ++i)
    if (history[i].rob_acc_val_pgd10 > history[best].rob_acc_val_pgd10) best = i;
  return best;
}

namespace {

bool combined_batch(Objective o) { return o == Objective::trades_rst || o == Objective::uat_pp; }

AttackTarget attack_target(const TrainConfig& cfg, const ParamSet& params, const Tensor& x,
                           const std::vector<int>& labels) {
  if (cfg.attack.inner_loss == InnerLoss::kl_from_clean) {
    return AttackTarget::of_probs(softmax(forward_logits(cfg.net, params, x)));
  }
  return AttackTarget::of_labels(labels);
}

Tensor stack_rows(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.cols()) throw std::invalid_argument("cannot stack rows of different widths");
  std::vector<double> v(a.values().begin(), a.values().end());
  v.insert(v.end(), b.values().begin(), b.values().end());
  return Tensor({a.rows() + b.rows(), a.cols()}, std::move(v));
}

// The baselines treat labeled and pseudo-labeled rows as one batch.
LabeledBatch combined(const StepInputs& in) {
  LabeledBatch b{stack_rows(in.labeled.x, in.unlabeled), in.labeled.y};
  b.y.insert(b.y.end(), in.teacher.hard.begin(), in.teacher.hard.end());
  return b;
}

AWRConfig awr_for(const TrainConfig& cfg) {
  AWRConfig a = cfg.awr;
  if (cfg.objective == Objective::srst_trades) a.weighting = Weighting::uniform;
  return a;
}

// Builds the risk for one step; adversarial inputs are generated at `params`.
ParamLoss step_loss(const TrainConfig& cfg, const ParamSet& params, const StepInputs& in, const RngStream& attack) {
  const std::size_t C = cfg.net.num_classes();
  if (combined_batch(cfg.objective)) {
    auto batch = std::make_shared<LabeledBatch>(combined(in));
    const Tensor adv = pgd(cfg.net, params, batch->x, attack_target(cfg, params, batch->x, batch->y), cfg.attack,
                           attack).x;
    const double lambda = cfg.awr.lambda;
    if (cfg.objective == Objective::trades_rst) {
      return [batch, adv, lambda](const BoundNet& f) { return trades_risk(f, *batch, adv, lambda); };
    }
    // UAT++ anchors on one-hot labels for labeled rows and teacher probabilities for the rest
    const Tensor ref = stack_rows(one_hot(in.labeled.y, C), in.teacher.probs);
    return [batch, adv, lambda, ref](const BoundNet& f) { return uat_risk(f, *batch, adv, lambda, ref); };
  }
  const Tensor adv =
      pgd(cfg.net, params, in.unlabeled, attack_target(cfg, params, in.unlabeled, in.teacher.hard), cfg.attack, attack)
          .x;
  const AWRConfig awr = awr_for(cfg);
  return [in, adv, awr](const BoundNet& f) {
    return srst_awr_risk(f, in.labeled, in.unlabeled, adv, in.teacher, awr);
  };
}

struct Pools {
  Dataset labeled;
  Tensor unlabeled;
  TeacherOutputs teacher;
};

Pools prepare(const TrainingData& data, const std::optional<SoftLabelStore>& teacher, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t C = cfg.net.num_classes();
  if (data.labeled.size() == 0) throw std::invalid_argument("training needs a nonempty labeled set");
  if (data.labeled.x.cols() != cfg.net.input_width()) {
    throw std::invalid_argument("labeled inputs have width " + std::to_string(data.labeled.x.cols()) +
                                ", network expects " + std::to_string(cfg.net.input_width()));
  }
  if (data.labeled.num_classes != C) throw std::invalid_argument("labeled set class count differs from the network");
  if (cfg.objective == Objective::supervised_awr) {
    SoftLabelStore t = labels_as_teacher(data.labeled);
    return {data.labeled, data.labeled.x, t.outputs()};
  }
  if (!teacher) throw std::invalid_argument("objective " + to_string(cfg.objective) + " needs a teacher");
  if (teacher->dataset_fingerprint != fingerprint(data.unlabeled)) {
    throw std::invalid_argument("teacher fingerprint " + to_hex(teacher->dataset_fingerprint) +
                                " does not match the unlabeled pool " + to_hex(fingerprint(data.unlabeled)));
  }
  TeacherOutputs out = teacher->outputs();
  out.validate(data.unlabeled.rows(), C);
  if (data.unlabeled.rows() == 0) throw std::invalid_argument("training needs a nonempty unlabeled pool");
  return {data.labeled, data.unlabeled, std::move(out)};
}

StepInputs draw_step(const Pools& pools, const std::vector<std::size_t>& labeled_rows, const TrainConfig& cfg,
                     const RngStream& epoch_order, std::uint64_t step) {
  const Dataset lb = pools.labeled.subset(labeled_rows);
  const auto ub = detail::sample_rows(pools.unlabeled.rows(), cfg.unlabeled_batch,
                                      epoch_order.child("unlabeled").child(step));
  return {{lb.x, lb.y}, pools.unlabeled.select_rows(ub), pools.teacher.select_rows(ub)};
}

}  // namespace

double objective_value(const TrainConfig& cfg, const ParamSet& params, const StepInputs& in, const RngStream& attack) {
  cfg.validate();
  const ParamLoss loss = step_loss(cfg, params, in, attack);
  Tape tape;
  BoundNet f(tape, cfg.net, params, false);
  return loss(f).value()[0];
}

StepInputs first_step_inputs(const TrainingData& data, const std::optional<SoftLabelStore>& teacher,
                             const TrainConfig& cfg) {
  const Pools pools = prepare(data, teacher, cfg);
  const RngStream order = RngStream::named(cfg.seed, Stream::batch_order).child(0);
  const auto batches = detail::epoch_batches(pools.labeled.size(), cfg.labeled_batch, order);
  return draw_step(pools, batches.front(), cfg, order, 0);
}

TrainResult run_training(const TrainingData& data, const std::optional<SoftLabelStore>& teacher,
                         const TrainConfig& cfg) {
  const Pools pools = prepare(data, teacher, cfg);
  if (cfg.epochs > 0 && data.validation.size() == 0) throw std::invalid_argument("training needs a validation split");

  TrainResult result;
  ParamSet params = init_params(cfg.net, RngStream::named(cfg.seed, Stream::init));
  result.best = params;
  result.final_params = params;
  if (cfg.epochs == 0) return result;

  ParamSet momentum;
  ParamSet swa;
  std::size_t swa_count = 0;
  double best_rob = -1.0;
  const RngStream order = RngStream::named(cfg.seed, Stream::batch_order);
  const RngStream attack = RngStream::named(cfg.seed, Stream::attack_start);
  std::uint64_t step = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = lr_at(epoch, cfg);
    const RngStream epoch_order = order.child(static_cast<std::uint64_t>(epoch));
    double loss_sum = 0.0;
    std::size_t n_steps = 0;
    for (const auto& rows : detail::epoch_batches(pools.labeled.size(), cfg.labeled_batch, epoch_order)) {
      const StepInputs in = draw_step(pools, rows, cfg, epoch_order, step);
      const ParamLoss loss = step_loss(cfg, params, in, attack.child(step));
      const ValueAndGrad vg = value_and_grad_params(cfg.net, params, loss);
      sgd_step(params, vg.grad, lr, momentum, cfg.momentum, cfg.weight_decay);
      loss_sum += vg.value;
      ++n_steps;
      ++step;
    }

    if (epoch >= cfg.swa_start_epoch) {
      if (swa_count == 0) swa = params;
      swa_update(swa, params, swa_count);
      ++swa_count;
    }
    const ParamSet& eval = swa_count > 0 ? swa : params;

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    rec.train_loss = loss_sum / static_cast<double>(n_steps);
    rec.std_acc_val = count_correct(cfg.net, eval, data.validation.x, data.validation.y).rate();
    rec.rob_acc_val_pgd10 =
        robust_count(cfg.net, eval, data.validation, cfg.selection_attack,
                     attack.child("selection").child(static_cast<std::uint64_t>(epoch)))
            .rate();
    rec.swa_included = swa_count;
    result.history.push_back(rec);
    if (rec.rob_acc_val_pgd10 > best_rob) {
      best_rob = rec.rob_acc_val_pgd10;
      result.best = eval;
      result.best_epoch = epoch;
    }
  }
  result.final_params = swa_count > 0 ? swa : params;
  return result;
}

void write_history(std::ostream& out, const std::vector<EpochRecord>& history) {
  for (const auto& r : history) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["lr"] = r.lr;
    j["train_loss"] = r.train_loss;
    j["std_acc_val"] = r.std_acc_val;
    j["rob_acc_val_pgd10"] = r.rob_acc_val_pgd10;
    j["swa_included"] = r.swa_included;
    out << j.dump() << '\n';
  }
}

std::vector<EpochRecord> read_history(std::istream& in) {
  std::vector<EpochRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    EpochRecord r;
    r.epoch = j.at("epoch").get<int>();
    r.lr = j.at("lr").get<double>();
    r.train_loss = j.at("train_loss").get<double>();
    r.std_acc_val = j.at("std_acc_val").get<double>();
    r.rob_acc_val_pgd10 = j.at("rob_acc_val_pgd10").get<double>();
    r.swa_included = j.at("swa_included").get<std::size_t>();
    out.push_back(r);
  }
  return out;
}

}  // namespace srst
