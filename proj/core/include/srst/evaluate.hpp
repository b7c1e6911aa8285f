#pragma once

#include <cstddef>

#include "srst/attacks.hpp"
#include "srst/dataset.hpp"
#include "srst/net.hpp"

namespace srst {

struct AccuracyCount {
  std::size_t correct = 0;
  std::size_t total = 0;

  [[nodiscard]] double rate() const {
    return total ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  }
};

AccuracyCount count_correct(const ScoreNet& net, const ParamSet& params, const Tensor& x, const std::vector<int>& y);

/// Accuracy on PGD outputs aimed at the true labels.
AccuracyCount robust_count(const ScoreNet& net, const ParamSet& params, const Dataset& data, AttackConfig attack,
                           const RngStream& stream);

struct EvalConfig {
  AttackConfig pgd = AttackConfig::pgd(0.1, 20);
  int restarts = 5;
  int blackbox_queries = 200;
};

struct MetricsRecord {
  // identification of the run that produced the numbers
  std::string preset;
  std::string method;
  std::string sweep_axis;
  double sweep_value = 0.0;
  std::uint64_t seed = 0;
  // metrics
  double std_acc = 0.0;
  double rob_acc_pgd20 = 0.0;
  double rob_acc_multi = 0.0;
  double rob_acc_blackbox = 0.0;
  double masking_gap = 0.0;  // black-box minus white-box (pgd20) accuracy
  std::size_t n_test = 0;
  double wall_clock_seconds = 0.0;

  friend bool operator==(const MetricsRecord&, const MetricsRecord&) = default;
};

MetricsRecord evaluate(const ScoreNet& net, const ParamSet& params, const Dataset& test, const EvalConfig& cfg,
                       const RngStream& stream);

}  // namespace srst
