#include "srst/losses.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace srst {

namespace {

const double kLogFloor = std::log(kProbFloor);

void check_simplex(std::span<const double> p, const char* what) {
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) + " has a negative or non-finite entry");
    }
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-8) {
    throw std::invalid_argument(std::string(what) + " sums to " + std::to_string(s) + ", not 1");
  }
}

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t classes) {
  if (labels.size() != rows) {
    throw std::invalid_argument("label count " + std::to_string(labels.size()) + " does not match " +
                                std::to_string(rows) + " rows");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw std::invalid_argument("label " + std::to_string(y) + " outside [0, " +
                                  std::to_string(classes) + ")");
    }
  }
}

Tensor smooth_targets(std::span<const int> labels, std::size_t classes, double alpha) {
  Tensor t = Tensor::zeros({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto row = label_smooth(labels[i], classes, alpha);
    std::copy(row.begin(), row.end(), t.row(i).begin());
  }
  return t;
}

Tensor row_tensor(std::span<const double> v) {
  return Tensor({1, v.size()}, std::vector<double>(v.begin(), v.end()));
}

// [B, C] -> [B, 1] holding entry (i, labels[i])
Var pick(const Var& a, std::span<const int> labels) {
  const Tensor& av = a.value();
  Tensor y = Tensor::zeros({av.rows(), 1});
  for (std::size_t i = 0; i < av.rows(); ++i) y(i, 0) = av(i, static_cast<std::size_t>(labels[i]));
  std::vector<int> idx(labels.begin(), labels.end());
  return a.tape().record(std::move(y), {a}, [a, idx](Tape& t, const Tensor& g) {
    Tensor ga = Tensor::zeros(a.value().shape());
    for (std::size_t i = 0; i < idx.size(); ++i) ga(i, static_cast<std::size_t>(idx[i])) = g(i, 0);
    t.accumulate(a, ga);
  });
}

void require_scalar_finite(const Var& v, const char* what) {
  if (!std::isfinite(v.value()[0])) throw std::domain_error(std::string(what) + " is not finite");
}

}  // namespace

void AWRConfig::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in [0, 1)");
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
  if (!(tau > 0.0)) throw std::invalid_argument("tau must be > 0");
}

void TeacherOutputs::validate(std::size_t rows, std::size_t classes) const {
  if (soft.rank() != 2 || probs.rank() != 2 || soft.rows() != rows || probs.rows() != rows ||
      soft.cols() != classes || probs.cols() != classes || hard.size() != rows) {
    throw std::invalid_argument("teacher outputs do not cover the unlabeled batch (" + std::to_string(rows) +
                                " x " + std::to_string(classes) + ")");
  }
  const std::vector<int> argmax = predict(probs);
  for (std::size_t i = 0; i < rows; ++i) {
    if (hard[i] != argmax[i])
      throw std::invalid_argument("teacher hard label at row " + std::to_string(i) + " is not the argmax of its row");
  }
}

TeacherOutputs TeacherOutputs::select_rows(std::span<const std::size_t> idx) const {
  TeacherOutputs out{soft.select_rows(idx), probs.select_rows(idx), {}};
  for (std::size_t i : idx) out.hard.push_back(hard[i]);
  return out;
}

std::vector<double> label_smooth(int y, std::size_t num_classes, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in [0, 1)");
  if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
    throw std::invalid_argument("label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) + ")");
  }
  const double off = alpha / static_cast<double>(num_classes);
  std::vector<double> out(num_classes, off);
  out[static_cast<std::size_t>(y)] = 1.0 - alpha + off;
  return out;
}

double cross_entropy(std::span<const double> logits, int y) {
  Tape tape;
  Var z = tape.constant(row_tensor(logits));
  const int labels[] = {y};
  return ad::cross_entropy_rows(z, labels).value()[0];
}

double ls_cross_entropy(std::span<const double> logits, int y, double alpha) {
  Tape tape;
  Var z = tape.constant(row_tensor(logits));
  const int labels[] = {y};
  return ad::ls_cross_entropy_rows(z, labels, alpha).value()[0];
}

double kl_div(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_div: length mismatch");
  check_simplex(p, "kl_div p");
  check_simplex(q, "kl_div q");
  double s = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    if (p[c] > 0.0) s += p[c] * (std::log(p[c]) - std::log(std::max(q[c], kProbFloor)));
  }
  return s;
}

double adaptive_weight(std::span<const double> teacher, std::span<const double> student_clean,
                       std::span<const double> student_adv, double beta) {
  if (teacher.size() != student_clean.size() || teacher.size() != student_adv.size()) {
    throw std::invalid_argument("adaptive_weight: length mismatch");
  }
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("beta must lie in [0, 1]");
  double clean = 0.0, adv = 0.0;
  for (std::size_t c = 0; c < teacher.size(); ++c) {
    clean += teacher[c] * student_clean[c];
    adv += teacher[c] * student_adv[c];
  }
  return beta * clean + (1.0 - beta) * (1.0 - adv);
}

Tensor one_hot(std::span<const int> labels, std::size_t num_classes) {
  check_labels(labels, labels.size(), num_classes);
  Tensor t = Tensor::zeros({labels.size(), num_classes});
  for (std::size_t i = 0; i < labels.size(); ++i) t(i, static_cast<std::size_t>(labels[i])) = 1.0;
  return t;
}

namespace ad {

Var clamped_log_softmax(const Var& logits) { return clamp_min(log_softmax(logits), kLogFloor); }

Var cross_entropy_rows(const Var& logits, std::span<const int> labels) {
  check_labels(labels, logits.value().rows(), logits.value().cols());
  return scale(pick(clamped_log_softmax(logits), labels), -1.0);
}

Var ls_cross_entropy_rows(const Var& logits, std::span<const int> labels, double alpha) {
  const Tensor& z = logits.value();
  check_labels(labels, z.rows(), z.cols());
  Var targets = logits.tape().constant(smooth_targets(labels, z.cols(), alpha));
  return scale(row_sum(mul(targets, clamped_log_softmax(logits))), -1.0);
}

Var kl_rows(const Var& p, const Var& log_p, const Var& q_logits) {
  return row_sum(mul(p, sub(log_p, clamped_log_softmax(q_logits))));
}

Var kl_rows_const(const Tensor& p, const Var& q_logits) {
  if (p.shape() != q_logits.value().shape()) {
    throw std::invalid_argument("kl: reference rows " + p.shape_string() + " vs logits " +
                                q_logits.value().shape_string());
  }
  for (std::size_t i = 0; i < p.rows(); ++i) check_simplex(p.row(i), "reference distribution");
  Tensor log_p = p;
  for (double& v : log_p.values()) v = v > 0.0 ? std::log(v) : 0.0;
  Tape& t = q_logits.tape();
  return kl_rows(t.constant(p), t.constant(std::move(log_p)), q_logits);
}

Var adaptive_weight_rows(const Tensor& teacher, const Var& p_clean, const Var& p_adv, double beta) {
  Var tv = p_clean.tape().constant(teacher);
  Var clean = row_sum(mul(tv, p_clean));
  Var adv = row_sum(mul(tv, p_adv));
  return add(scale(clean, beta), scale(add_scalar(scale(adv, -1.0), 1.0), 1.0 - beta));
}

}  // namespace ad

Var srst_awr_risk(const BoundNet& f, const LabeledBatch& labeled, const Tensor& unlabeled,
                  const Tensor& adv_unlabeled, const TeacherOutputs& teacher, const AWRConfig& cfg) {
  cfg.validate();
  if (labeled.x.rows() == 0 || unlabeled.rows() == 0) {
    throw std::invalid_argument("srst_awr_risk needs nonempty labeled and unlabeled batches");
  }
  if (adv_unlabeled.shape() != unlabeled.shape()) {
    throw std::invalid_argument("adversarial batch " + adv_unlabeled.shape_string() +
                                " is not aligned with unlabeled batch " + unlabeled.shape_string());
  }
  const std::size_t classes = f.net().num_classes();
  teacher.validate(unlabeled.rows(), classes);
  Tape& t = f.tape();

  Var risk = ad::mean(ad::ls_cross_entropy_rows(f(labeled.x), labeled.y, cfg.alpha));

  Var z_clean = f(unlabeled);
  if (cfg.gamma != 0.0) {
    Var kd = ad::kl_rows_const(teacher.soft, ad::scale(z_clean, 1.0 / cfg.tau));
    risk = ad::add(risk, ad::scale(ad::mean(kd), cfg.gamma));
  }
  if (cfg.lambda != 0.0) {
    Var z_adv = f(adv_unlabeled);
    Var logp_clean = ad::log_softmax(z_clean);
    Var p_clean = ad::exp(logp_clean);
    Var kl = cfg.detach_clean_in_kl ? ad::kl_rows(ad::detach(p_clean), ad::detach(logp_clean), z_adv)
                                    : ad::kl_rows(p_clean, logp_clean, z_adv);
    Var w;
    if (cfg.weighting == Weighting::uniform) {
      w = t.constant(Tensor::filled({unlabeled.rows(), 1}, 1.0));
    } else {
      Var p_adv = ad::exp(ad::log_softmax(z_adv));
      w = ad::adaptive_weight_rows(teacher.probs, p_clean, p_adv, cfg.beta);
      if (cfg.detach_weight) w = ad::detach(w);
    }
    risk = ad::add(risk, ad::scale(ad::mean(ad::mul(kl, w)), cfg.lambda));
  }
  require_scalar_finite(risk, "srst_awr_risk");
  return risk;
}

Var trades_risk(const BoundNet& f, const LabeledBatch& batch, const Tensor& adv, double lambda) {
  if (batch.x.rows() == 0) throw std::invalid_argument("trades_risk needs a nonempty batch");
  if (adv.shape() != batch.x.shape()) {
    throw std::invalid_argument("adversarial batch " + adv.shape_string() + " is not aligned with " +
                                batch.x.shape_string());
  }
  Var z = f(batch.x);
  Var rows = ad::cross_entropy_rows(z, batch.y);
  if (lambda != 0.0) {
    Var logp = ad::log_softmax(z);
    Var kl = ad::kl_rows(ad::exp(logp), logp, f(adv));
    rows = ad::add(rows, ad::scale(kl, lambda));
  }
  Var risk = ad::mean(rows);
  require_scalar_finite(risk, "trades_risk");
  return risk;
}

Var uat_risk(const BoundNet& f, const LabeledBatch& batch, const Tensor& adv, double lambda,
             const Tensor& frozen_ref_probs) {
  if (batch.x.rows() == 0) throw std::invalid_argument("uat_risk needs a nonempty batch");
  if (adv.shape() != batch.x.shape()) {
    throw std::invalid_argument("adversarial batch " + adv.shape_string() + " is not aligned with " +
                                batch.x.shape_string());
  }
  Var z_adv = f(adv);
  Var rows = ad::cross_entropy_rows(z_adv, batch.y);
  if (lambda != 0.0) rows = ad::add(rows, ad::scale(ad::kl_rows_const(frozen_ref_probs, z_adv), lambda));
  Var risk = ad::mean(rows);
  require_scalar_finite(risk, "uat_risk");
  return risk;
}

double srst_awr_risk(const ScoreNet& net, const ParamSet& params, const LabeledBatch& labeled,
                     const Tensor& unlabeled, const Tensor& adv_unlabeled, const TeacherOutputs& teacher,
                     const AWRConfig& cfg) {
  Tape tape;
  BoundNet f(tape, net, params, false);
  return srst_awr_risk(f, labeled, unlabeled, adv_unlabeled, teacher, cfg).value()[0];
}

double trades_risk(const ScoreNet& net, const ParamSet& params, const LabeledBatch& batch, const Tensor& adv,
                   double lambda) {
  Tape tape;
  BoundNet f(tape, net, params, false);
  return trades_risk(f, batch, adv, lambda).value()[0];
}

double uat_risk(const ScoreNet& net, const ParamSet& params, const LabeledBatch& batch, const Tensor& adv,
                double lambda, const Tensor& frozen_ref_probs) {
  Tape tape;
  BoundNet f(tape, net, params, false);
  return uat_risk(f, batch, adv, lambda, frozen_ref_probs).value()[0];
}

}  // namespace srst
