// srst: teacher/student training, evaluation, oracle sweeps and presets.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>

#include "srst/harness.hpp"
#include "srst/oracle.hpp"

namespace fs = std::filesystem;
using namespace srst;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  unsigned threads = 1;
};

ExperimentConfig load_config(const Globals& g, const std::string& preset = "custom") {
  ExperimentConfig cfg = preset_config(preset);
  if (!g.config.empty()) apply_config(cfg, parse_config_file(g.config));
  if (g.seed) cfg.seeds = {*g.seed};
  cfg.validate();
  return cfg;
}

std::uint64_t single_seed(const ExperimentConfig& cfg) { return cfg.seeds.front(); }

void write_sidecar(const fs::path& ckpt, const nlohmann::ordered_json& j) {
  write_file_atomic(ckpt.string() + ".meta.json", j.dump(2) + "\n");
}

int cmd_split(const Globals& g) {
  const ExperimentConfig cfg = load_config(g);
  const PreparedData data = prepare_data(cfg, single_seed(cfg));
  nlohmann::ordered_json j;
  j["seed"] = single_seed(cfg);
  j["labeled"] = data.splits.indices.labeled;
  j["unlabeled"] = data.splits.indices.unlabeled;
  j["validation"] = data.splits.indices.validation;
  j["test"] = data.splits.indices.test;
  write_file_atomic(fs::path(g.out) / "split.json", j.dump() + "\n");
  std::cout << "labeled " << data.splits.labeled.size() << " unlabeled " << data.splits.unlabeled.size()
            << " validation " << data.splits.validation.size() << " test " << data.splits.test.size() << "\n";
  return 0;
}

int cmd_teach(const Globals& g, const std::string& kind) {
  ExperimentConfig cfg = load_config(g);
  if (!kind.empty()) cfg.teacher = teacher_kind_from_string(kind);
  const std::uint64_t seed = single_seed(cfg);
  const PreparedData data = prepare_data(cfg, seed);
  const TrainedTeacher t = train_teacher(cfg, cfg.teacher, data.splits, seed);
  const fs::path out(g.out);
  fs::create_directories(out);
  save_params(out / "teacher.rslb", t.params);
  const SoftLabelStore store =
      export_soft_labels(cfg.teacher_net, t.params, data.splits.unlabeled.x, cfg.train.awr.tau, t.meta);
  save_soft_labels(out / "soft_labels.rsls", store);
  std::cout << to_string(cfg.teacher) << " teacher validation accuracy " << t.meta.accuracy << "\n"
            << "unlabeled fingerprint " << to_hex(store.dataset_fingerprint) << "\n";
  return 0;
}

int cmd_train(const Globals& g, const std::string& method_name, const std::string& teacher_path) {
  const ExperimentConfig cfg = load_config(g);
  const std::uint64_t seed = single_seed(cfg);
  const Method method = method_from_string(method_name);
  const PreparedData data = prepare_data(cfg, seed);
  const TrainConfig tc = student_config(cfg, method, seed);

  std::optional<SoftLabelStore> store;
  if (needs_teacher(method.objective)) {
    if (!teacher_path.empty()) {
      store = load_soft_labels(teacher_path, fingerprint(data.splits.unlabeled.x));
    } else {
      const TeacherKind kind = method.teacher.value_or(cfg.teacher);
      const TrainedTeacher t = train_teacher(cfg, kind, data.splits, seed);
      store = export_soft_labels(cfg.teacher_net, t.params, data.splits.unlabeled.x, tc.awr.tau, t.meta);
    }
  }
  const TrainResult r = run_training({data.splits.labeled, data.splits.unlabeled.x, data.splits.validation}, store, tc);

  const fs::path out(g.out);
  fs::create_directories(out);
  const fs::path ckpt = out / "checkpoint.rslb";
  save_params(ckpt, r.best);
  nlohmann::ordered_json meta;
  meta["epoch"] = r.best_epoch;
  meta["seed"] = seed;
  meta["method"] = method.name;
  meta["config_hash"] = to_hex(sha256(dump_config(cfg)));
  meta["selection_metric"] = "rob_acc_val_pgd10";
  meta["selection_value"] = r.history.empty() ? 0.0 : r.history[static_cast<std::size_t>(r.best_epoch)].rob_acc_val_pgd10;
  write_sidecar(ckpt, meta);
  std::ostringstream hist;
  write_history(hist, r.history);
  write_file_atomic(out / "history.jsonl", hist.str());
  write_file_atomic(out / "config.txt", dump_config(cfg));
  std::cout << "best epoch " << r.best_epoch << " robust validation accuracy " << meta["selection_value"] << "\n";
  return 0;
}

int cmd_eval(const Globals& g, const std::string& checkpoint) {
  const ExperimentConfig cfg = load_config(g);
  const std::uint64_t seed = single_seed(cfg);
  const PreparedData data = prepare_data(cfg, seed);
  const ParamSet params = load_params(checkpoint);
  MetricsRecord m = evaluate(cfg.train.net, params, data.splits.test, cfg.eval,
                             RngStream::named(seed, Stream::attack_start).child("eval"));
  m.preset = cfg.preset;
  m.method = "checkpoint";
  m.sweep_axis = "none";
  m.seed = seed;
  const fs::path out(g.out);
  write_metrics({m}, out / "metrics.jsonl");
  write_metrics_csv({m}, out / "metrics.csv");
  std::cout << metrics_to_json(m) << "\n";
  return 0;
}

int cmd_verify_bounds(const Globals& g, std::size_t count, std::size_t max_points, std::size_t max_classes) {
  const std::uint64_t first = g.seed.value_or(0);
  const fs::path out(g.out);
  std::ostringstream lines;
  std::size_t bound_violations = 0, lemma_violations = 0;
  for (std::uint64_t s = first; s < first + count; ++s) {
    const oracle::FiniteInstance inst = oracle::sweep_instance(s, max_points, max_classes);
    nlohmann::ordered_json j;
    j["seed"] = s;
    j["n_points"] = inst.size();
    j["num_classes"] = inst.num_classes;
    for (auto tie : {oracle::TieBreak::lowest_id, oracle::TieBreak::highest_id}) {
      const oracle::RiskReport r = oracle::exact_risks(inst, tie);
      const oracle::LemmaReport l = oracle::lemma_a1_check(inst, tie);
      const std::string key = tie == oracle::TieBreak::lowest_id ? "lowest_id" : "highest_id";
      j[key] = {{"r_nat", r.r_nat}, {"r_bdy", r.r_bdy},         {"r_rob", r.r_rob},     {"bound_thm31", r.bound_thm31},
                {"bound_thm32", r.bound_thm32}, {"lemma_lhs", l.lhs}, {"lemma_rhs", l.rhs}};
      // equal sums in a different order can differ by an ulp
      if (r.r_rob > r.bound_thm31 + 1e-12 || r.r_rob > r.bound_thm32 + 1e-12) ++bound_violations;
      if (l.lhs > l.rhs) ++lemma_violations;
    }
    lines << j.dump() << "\n";
  }
  write_file_atomic(out / "bounds.jsonl", lines.str());
  std::cout << count << " instances, theorem bound violations " << bound_violations
            << ", instances (per tie rule) with lemma lhs > rhs " << lemma_violations << "\n";
  return bound_violations == 0 ? 0 : 1;
}

int cmd_preset(const Globals& g, const std::string& name) {
  const ExperimentConfig cfg = load_config(g, name);
  const fs::path out = fs::path(g.out) / name;
  const RunSummary s = run_preset(cfg, out, g.threads);
  write_file_atomic(out / "config.txt", dump_config(cfg));
  std::cout << s.records.size() << " records (" << s.reused << " reused) in " << out << "\n";
  for (const auto& r : s.records) {
    std::cout << "  " << r.method << " " << r.sweep_axis << "=" << r.sweep_value << " seed " << r.seed
              << ": std " << r.std_acc << " pgd20 " << r.rob_acc_pgd20 << " multi " << r.rob_acc_multi
              << " blackbox " << r.rob_acc_blackbox << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised robust training with adaptive weights"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "flat key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "master seed (overrides the config's seed list)");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--threads", g.threads, "worker threads for independent sweep points")->check(CLI::PositiveNumber);

  auto* teach = app.add_subcommand("teach", "train a teacher and export its soft labels");
  std::string kind;
  teach->add_option("--kind", kind, "fixmatch or supervised");

  auto* train = app.add_subcommand("train", "train one student");
  std::string method = "srst_awr", teacher_path;
  train->add_option("--method", method, "srst_awr, srst_trades, rst, uat_pp or supervised_awr");
  train->add_option("--teacher", teacher_path, "soft-label file from `teach`")->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  std::string checkpoint;
  eval->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);

  auto* bounds = app.add_subcommand("verify-bounds", "exact risk decomposition and bounds on random instances");
  std::size_t count = 1000, max_points = 12, max_classes = 4;
  bounds->add_option("--count", count);
  bounds->add_option("--max-points", max_points);
  bounds->add_option("--max-classes", max_classes);

  auto* split = app.add_subcommand("split", "write the split indices");

  auto* preset = app.add_subcommand("preset", "run a figure/table preset");
  std::string preset_name;
  preset->add_option("name", preset_name)->required()->check(CLI::IsMember(preset_names()));

  auto* keys = app.add_subcommand("config-keys", "print every config key with its default");

  for (auto* sub : {teach, train, eval, bounds, split, preset, keys}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  try {
    if (*teach) return cmd_teach(g, kind);
    if (*train) return cmd_train(g, method, teacher_path);
    if (*eval) return cmd_eval(g, checkpoint);
    if (*bounds) return cmd_verify_bounds(g, count, max_points, max_classes);
    if (*split) return cmd_split(g);
    if (*preset) return cmd_preset(g, preset_name);
    if (*keys) {
      std::cout << dump_config(ExperimentConfig{});
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
