#pragma once

#include <span>
#include <vector>

#include "srst/autodiff.hpp"
#include "srst/net.hpp"
#include "srst/tensor.hpp"

namespace srst {

// Log-probabilities are clamped at log(1e-12) inside every CE and KL term.
inline constexpr double kProbFloor = 1e-12;

enum class Weighting {
  adaptive,  // w from the teacher/student agreement terms
  uniform,   // w = 1 (SRST-TRADES)
};

struct AWRConfig {
  double alpha = 0.2;   // label smoothing
  double lambda = 20.0; // robust regularizer weight
  double gamma = 4.0;   // distillation weight
  double beta = 0.5;    // mix of clean agreement and adversarial disagreement
  double tau = 1.2;     // distillation temperature
  bool detach_weight = true;
  bool detach_clean_in_kl = false;
  Weighting weighting = Weighting::adaptive;

  void validate() const;
};

struct LabeledBatch {
  Tensor x;
  std::vector<int> y;
};

/// Teacher predictions aligned row-wise with an unlabeled batch.
struct TeacherOutputs {
  Tensor soft;           // temp_softmax(teacher logits, tau)
  Tensor probs;          // softmax(teacher logits)
  std::vector<int> hard; // argmax of probs

  void validate(std::size_t rows, std::size_t classes) const;
  [[nodiscard]] TeacherOutputs select_rows(std::span<const std::size_t> idx) const;
};

// ---- single-example values -------------------------------------------------

std::vector<double> label_smooth(int y, std::size_t num_classes, double alpha);
double cross_entropy(std::span<const double> logits, int y);
double ls_cross_entropy(std::span<const double> logits, int y, double alpha);
// Rejects inputs whose entries are negative or whose sum is off by > 1e-8.
double kl_div(std::span<const double> p, std::span<const double> q);
double adaptive_weight(std::span<const double> teacher, std::span<const double> student_clean,
                       std::span<const double> student_adv, double beta);

// ---- per-row terms on a tape, each [B, 1] ----------------------------------

namespace ad {

Var clamped_log_softmax(const Var& logits);
Var cross_entropy_rows(const Var& logits, std::span<const int> labels);
Var ls_cross_entropy_rows(const Var& logits, std::span<const int> labels, double alpha);
// KL(p || q) where p is given by probabilities and their logs, q by logits.
Var kl_rows(const Var& p, const Var& log_p, const Var& q_logits);
// KL(p || softmax(q_logits)) for fixed probability rows p.
Var kl_rows_const(const Tensor& p, const Var& q_logits);
Var adaptive_weight_rows(const Tensor& teacher, const Var& p_clean, const Var& p_adv, double beta);

}  // namespace ad

// ---- regularized empirical risks -------------------------------------------

Var srst_awr_risk(const BoundNet& f, const LabeledBatch& labeled, const Tensor& unlabeled,
                  const Tensor& adv_unlabeled, const TeacherOutputs& teacher, const AWRConfig& cfg);

// Mean over the combined batch of CE(f(x), y) + lambda * KL(p(x) || p(x_adv)).
Var trades_risk(const BoundNet& f, const LabeledBatch& batch, const Tensor& adv, double lambda);

// Mean over the combined batch of CE(f(x_adv), y) + lambda * KL(ref || p(x_adv)).
// lambda = 0 is UAT-FT.
Var uat_risk(const BoundNet& f, const LabeledBatch& batch, const Tensor& adv, double lambda,
             const Tensor& frozen_ref_probs);

double srst_awr_risk(const ScoreNet& net, const ParamSet& params, const LabeledBatch& labeled,
                     const Tensor& unlabeled, const Tensor& adv_unlabeled, const TeacherOutputs& teacher,
                     const AWRConfig& cfg);
double trades_risk(const ScoreNet& net, const ParamSet& params, const LabeledBatch& batch, const Tensor& adv,
                   double lambda);
double uat_risk(const ScoreNet& net, const ParamSet& params, const LabeledBatch& batch, const Tensor& adv,
                double lambda, const Tensor& frozen_ref_probs);

/// Rows of probabilities for one-hot labels (used where true labels stand in
/// for a teacher).
Tensor one_hot(std::span<const int> labels, std::size_t num_classes);

}  // namespace srst
