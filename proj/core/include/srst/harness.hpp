#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "srst/dataset.hpp"
#include "srst/evaluate.hpp"
#include "srst/teacher.hpp"
#include "srst/trainer.hpp"

namespace srst {

// ---- metrics persistence ---------------------------------------------------

inline constexpr int kMetricsSchemaVersion = 1;

std::string metrics_to_json(const MetricsRecord& r);
MetricsRecord metrics_from_json(const std::string& line);
void write_metrics(const std::vector<MetricsRecord>& records, const std::filesystem::path& jsonl_path);
std::vector<MetricsRecord> read_metrics(const std::filesystem::path& jsonl_path);
// Fixed column order; an empty list still gets the header line.
void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::filesystem::path& csv_path);

/// Writes `contents` to a sibling temporary and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);

// ---- experiment configuration ---------------------------------------------

enum class TeacherKind { fixmatch, supervised };
std::string to_string(TeacherKind k);
TeacherKind teacher_kind_from_string(const std::string& s);

/// One trained-and-evaluated model family in a preset.
///   srst_awr, srst_trades, uat_pp  use the configured teacher
///   rst                            TRADES on pseudo-labels from a supervised teacher
///   supervised_awr                 labeled data only
///   teacher_fixmatch, teacher_supervised
///                                  no student; the teacher itself is evaluated
struct Method {
  std::string name;
  Objective objective;
  std::optional<TeacherKind> teacher;  // nullopt: use the configured one
  bool teacher_only = false;
};
Method method_from_string(const std::string& name);

enum class SweepAxis { none, n_labeled, lambda, gamma, beta, tau };
std::string to_string(SweepAxis a);
SweepAxis sweep_axis_from_string(const std::string& s);

struct ExperimentConfig {
  std::string preset = "custom";
  DatasetSpec dataset;
  SplitSpec split;
  TeacherKind teacher = TeacherKind::fixmatch;
  ScoreNet teacher_net{{2, 32, 32, 2}, Activation::relu};
  OptimizerConfig teacher_opt;
  FixMatchConfig fixmatch;
  TrainConfig train;
  double rst_lambda = 5.0;
  double uat_lambda = 5.0;
  InnerLoss baseline_inner_loss = InnerLoss::kl_from_clean;
  EvalConfig eval;
  std::vector<std::string> methods{"srst_awr"};
  SweepAxis sweep_axis = SweepAxis::none;
  std::vector<double> sweep_values;
  std::vector<std::uint64_t> seeds{0};
  bool record_wall_clock = false;

  void validate() const;
};

using ConfigMap = std::map<std::string, std::string>;

/// Flat `key = value` lines; `#` starts a comment. Unknown keys, duplicate
/// keys and lines without `=` are rejected with the line number.
ConfigMap parse_config(std::istream& in);
ConfigMap parse_config_file(const std::filesystem::path& path);
const std::vector<std::string>& config_keys();
void apply_config(ExperimentConfig& cfg, const ConfigMap& kv);
// Every key with its current value, in config_keys() order.
std::string dump_config(const ExperimentConfig& cfg);

/// Named presets at desk scale: fig1_labels, fig2_lambda, tab5_kd,
/// sec432_weight, appc3_beta, appc4_tau, appc1_kd. "custom" is the plain
/// defaults.
ExperimentConfig preset_config(const std::string& name);
const std::vector<std::string>& preset_names();

// ---- pipeline pieces ------------------------------------------------------

struct PreparedData {
  Dataset full;
  Splits splits;
};
PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed);

struct TrainedTeacher {
  ParamSet params;
  TeacherMeta meta;
};
TrainedTeacher train_teacher(const ExperimentConfig& cfg, TeacherKind kind, const Splits& splits, std::uint64_t seed);

// Configuration of one student run after method and sweep overrides.
ExperimentConfig point_config(const ExperimentConfig& cfg, double sweep_value);
TrainConfig student_config(const ExperimentConfig& cfg, const Method& m, std::uint64_t seed);

struct RunSummary {
  std::vector<MetricsRecord> records;
  std::size_t reused = 0;  // points found on disk and skipped
};

/// Teachers, students per (sweep value, method, seed), evaluation. Writes one
/// record per point under `out/points`, then metrics.jsonl, metrics.csv and
/// plot.csv. Completed points are read back instead of recomputed.
RunSummary run_preset(const ExperimentConfig& cfg, const std::filesystem::path& out, unsigned threads = 1);

/// Mean over seeds per (sweep value, method), in input order of first appearance.
void write_plot_data(const std::vector<MetricsRecord>& records, const std::filesystem::path& csv_path);

}  // namespace srst
