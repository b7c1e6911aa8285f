#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "srst/attacks.hpp"
#include "srst/dataset.hpp"
#include "srst/losses.hpp"
#include "srst/net.hpp"
#include "srst/optim.hpp"
#include "srst/teacher.hpp"

namespace srst {

enum class Objective { srst_awr, srst_trades, trades_rst, uat_pp, supervised_awr };

std::string to_string(Objective o);
Objective objective_from_string(const std::string& s);
bool needs_teacher(Objective o);

struct TrainConfig {
  ScoreNet net{{2, 32, 32, 2}, Activation::relu};
  int epochs = 200;
  std::size_t labeled_batch = 64;
  std::size_t unlabeled_batch = 128;
  double initial_lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<int> lr_drop_epochs{50, 150};
  double lr_drop_factor = 0.1;
  int swa_start_epoch = 50;
  Objective objective = Objective::srst_awr;
  // lambda also serves as the regularization weight of the baselines
  AWRConfig awr;
  AttackConfig attack;
  AttackConfig selection_attack = AttackConfig::pgd(0.1, 10);
  std::uint64_t seed = 0;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double std_acc_val = 0.0;
  double rob_acc_val_pgd10 = 0.0;
  std::size_t swa_included = 0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainingData {
  Dataset labeled;
  Tensor unlabeled;
  Dataset validation;
};

struct TrainResult {
  ParamSet best;       // selected by robust validation accuracy
  int best_epoch = -1; // -1 when no epoch ran
  ParamSet final_params;
  std::vector<EpochRecord> history;
};

// Drops apply from the listed epochs onward: lr0 on [0, 50), lr0/10 on [50, 150), ...
double lr_at(int epoch, const TrainConfig& cfg);

// Earliest epoch with the highest robust validation accuracy.
std::size_t select_best(const std::vector<EpochRecord>& history);

/// Loss of the configured objective for one step's batches at `params`,
/// including the adversarial example generation. Exposed so ablations can
/// compare objectives on identical inputs.
struct StepInputs {
  LabeledBatch labeled;
  Tensor unlabeled;
  TeacherOutputs teacher;  // rows aligned with `unlabeled`
};
double objective_value(const TrainConfig& cfg, const ParamSet& params, const StepInputs& in, const RngStream& attack);

/// First step's inputs as run_training would draw them.
StepInputs first_step_inputs(const TrainingData& data, const std::optional<SoftLabelStore>& teacher,
                             const TrainConfig& cfg);

TrainResult run_training(const TrainingData& data, const std::optional<SoftLabelStore>& teacher,
                         const TrainConfig& cfg);

void write_history(std::ostream& out, const std::vector<EpochRecord>& history);
std::vector<EpochRecord> read_history(std::istream& in);

}  // namespace srst
