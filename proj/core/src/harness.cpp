#include "srst/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <mutex>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace srst {

namespace fs = std::filesystem;

// ---- metrics persistence ---------------------------------------------------

namespace {

const std::vector<std::string>& metric_fields() {
  static const std::vector<std::string> f{"schema_version", "preset",        "method",           "sweep_axis",
                                          "sweep_value",    "seed",          "std_acc",          "rob_acc_pgd20",
                                          "rob_acc_multi",  "rob_acc_blackbox", "masking_gap",   "n_test",
                                          "wall_clock_seconds"};
  return f;
}

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string metrics_to_json(const MetricsRecord& r) {
  nlohmann::ordered_json j;
  j["schema_version"] = kMetricsSchemaVersion;
  j["preset"] = r.preset;
  j["method"] = r.method;
  j["sweep_axis"] = r.sweep_axis;
  j["sweep_value"] = r.sweep_value;
  j["seed"] = r.seed;
  j["std_acc"] = r.std_acc;
  j["rob_acc_pgd20"] = r.rob_acc_pgd20;
  j["rob_acc_multi"] = r.rob_acc_multi;
  j["rob_acc_blackbox"] = r.rob_acc_blackbox;
  j["masking_gap"] = r.masking_gap;
  j["n_test"] = r.n_test;
  j["wall_clock_seconds"] = r.wall_clock_seconds;
  return j.dump();
}

MetricsRecord metrics_from_json(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  if (!j.is_object()) throw std::invalid_argument("metrics line is not a JSON object");
  for (const auto& [key, _] : j.items()) {
    const auto& f = metric_fields();
    if (std::find(f.begin(), f.end(), key) == f.end()) {
      throw std::invalid_argument("unknown metrics field '" + key + "'");
    }
  }
  const int version = j.at("schema_version").get<int>();
  if (version != kMetricsSchemaVersion) {
    throw std::invalid_argument("metrics schema version " + std::to_string(version) + ", expected " +
                                std::to_string(kMetricsSchemaVersion));
  }
  MetricsRecord r;
  r.preset = j.at("preset").get<std::string>();
  r.method = j.at("method").get<std::string>();
  r.sweep_axis = j.at("sweep_axis").get<std::string>();
  r.sweep_value = j.at("sweep_value").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.std_acc = j.at("std_acc").get<double>();
  r.rob_acc_pgd20 = j.at("rob_acc_pgd20").get<double>();
  r.rob_acc_multi = j.at("rob_acc_multi").get<double>();
  r.rob_acc_blackbox = j.at("rob_acc_blackbox").get<double>();
  r.masking_gap = j.at("masking_gap").get<double>();
  r.n_test = j.at("n_test").get<std::size_t>();
  r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
  return r;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_metrics(const std::vector<MetricsRecord>& records, const fs::path& jsonl_path) {
  std::string s;
  for (const auto& r : records) s += metrics_to_json(r) + "\n";
  write_file_atomic(jsonl_path, s);
}

std::vector<MetricsRecord> read_metrics(const fs::path& jsonl_path) {
  std::istringstream in(read_all(jsonl_path));
  std::vector<MetricsRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(metrics_from_json(line));
    } catch (const std::exception& e) {
      throw std::invalid_argument(jsonl_path.string() + " line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

void write_metrics_csv(const std::vector<MetricsRecord>& records, const fs::path& csv_path) {
  std::ostringstream out;
  const auto& f = metric_fields();
  for (std::size_t i = 1; i < f.size(); ++i) out << (i > 1 ? "," : "") << f[i];
  out << '\n';
  for (const auto& r : records) {
    out << r.preset << ',' << r.method << ',' << r.sweep_axis << ',' << shortest(r.sweep_value) << ',' << r.seed << ','
        << shortest(r.std_acc) << ',' << shortest(r.rob_acc_pgd20) << ',' << shortest(r.rob_acc_multi) << ','
        << shortest(r.rob_acc_blackbox) << ',' << shortest(r.masking_gap) << ',' << r.n_test << ','
        << shortest(r.wall_clock_seconds) << '\n';
  }
  write_file_atomic(csv_path, out.str());
}

// ---- enums -----------------------------------------------------------------

std::string to_string(TeacherKind k) { return k == TeacherKind::fixmatch ? "fixmatch" : "supervised"; }

TeacherKind teacher_kind_from_string(const std::string& s) {
  if (s == "fixmatch") return TeacherKind::fixmatch;
  if (s == "supervised") return TeacherKind::supervised;
  throw std::invalid_argument("unknown teacher kind '" + s + "'");
}

Method method_from_string(const std::string& name) {
  if (name == "srst_awr") return {name, Objective::srst_awr, std::nullopt};
  if (name == "srst_trades") return {name, Objective::srst_trades, std::nullopt};
  if (name == "uat_pp") return {name, Objective::uat_pp, std::nullopt};
  if (name == "rst") return {name, Objective::trades_rst, TeacherKind::supervised};
  if (name == "supervised_awr") return {name, Objective::supervised_awr, std::nullopt};
  if (name == "teacher_fixmatch") return {name, Objective::srst_awr, TeacherKind::fixmatch, true};
  if (name == "teacher_supervised") return {name, Objective::srst_awr, TeacherKind::supervised, true};
  throw std::invalid_argument("unknown method '" + name + "'");
}

std::string to_string(SweepAxis a) {
  switch (a) {
    case SweepAxis::none: return "none";
    case SweepAxis::n_labeled: return "n_labeled";
    case SweepAxis::lambda: return "lambda";
    case SweepAxis::gamma: return "gamma";
    case SweepAxis::beta: return "beta";
    case SweepAxis::tau: return "tau";
  }
  return "?";
}

SweepAxis sweep_axis_from_string(const std::string& s) {
  for (auto a : {SweepAxis::none, SweepAxis::n_labeled, SweepAxis::lambda, SweepAxis::gamma, SweepAxis::beta,
                 SweepAxis::tau}) {
    if (to_string(a) == s) return a;
  }
  throw std::invalid_argument("unknown sweep axis '" + s + "'");
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (methods.empty()) throw std::invalid_argument("at least one method is required");
  for (const auto& m : methods) method_from_string(m);
  if (sweep_axis != SweepAxis::none && sweep_values.empty()) {
    throw std::invalid_argument("sweep axis " + to_string(sweep_axis) + " needs sweep values");
  }
  if (sweep_axis == SweepAxis::none && !sweep_values.empty()) {
    throw std::invalid_argument("sweep values given without a sweep axis");
  }
  teacher_net.validate();
  fixmatch.validate();
  train.validate();
  if (!(rst_lambda >= 0.0 && uat_lambda >= 0.0)) throw std::invalid_argument("baseline lambdas must be >= 0");
  if (eval.restarts < 1) throw std::invalid_argument("eval restarts must be >= 1");
  if (eval.blackbox_queries < 0) throw std::invalid_argument("eval blackbox queries must be >= 0");
  eval.pgd.validate();
}

// ---- config file -----------------------------------------------------------

namespace {

double parse_num(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("config key " + key + ": '" + v + "' is not a number");
  }
  return out;
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("config key " + key + ": '" + v + "' is not an integer");
  }
  return out;
}

std::size_t parse_count(const std::string& key, const std::string& v) {
  const long long n = parse_int(key, v);
  if (n < 0) throw std::invalid_argument("config key " + key + " must be >= 0");
  return static_cast<std::size_t>(n);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config key " + key + ": '" + v + "' is not a boolean");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

std::vector<std::string> parse_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <class T, class F>
std::string join(const std::vector<T>& xs, F fmt) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + fmt(xs[i]);
  return s;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

struct Key {
  std::string name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define SRST_NUM(name, field)                                                            \
  Key {                                                                                  \
    name, [](ExperimentConfig& c, const std::string& v) { c.field = parse_num(name, v); }, \
        [](const ExperimentConfig& c) { return shortest(c.field); }                      \
  }
#define SRST_INT(name, field)                                                                               \
  Key {                                                                                                     \
    name, [](ExperimentConfig& c, const std::string& v) { c.field = static_cast<int>(parse_int(name, v)); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }                                   \
  }
#define SRST_COUNT(name, field)                                                            \
  Key {                                                                                    \
    name, [](ExperimentConfig& c, const std::string& v) { c.field = parse_count(name, v); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }                  \
  }
#define SRST_BOOL(name, field)                                                            \
  Key {                                                                                   \
    name, [](ExperimentConfig& c, const std::string& v) { c.field = parse_bool(name, v); }, \
        [](const ExperimentConfig& c) { return bool_str(c.field); }                       \
  }

std::vector<std::size_t> parse_widths(const std::string& key, const std::string& v) {
  std::vector<std::size_t> w;
  for (const auto& s : parse_list(v)) w.push_back(parse_count(key, s));
  return w;
}

std::string widths_str(const std::vector<std::size_t>& w) {
  return join(w, [](std::size_t x) { return std::to_string(x); });
}

const std::vector<Key>& keys() {
  static const std::vector<Key> k{
      {"preset", [](ExperimentConfig& c, const std::string& v) { c.preset = v; },
       [](const ExperimentConfig& c) { return c.preset; }},
      {"methods", [](ExperimentConfig& c, const std::string& v) { c.methods = parse_list(v); },
       [](const ExperimentConfig& c) { return join(c.methods, [](const std::string& s) { return s; }); }},
      {"seeds",
       [](ExperimentConfig& c, const std::string& v) {
         c.seeds.clear();
         for (const auto& s : parse_list(v)) c.seeds.push_back(static_cast<std::uint64_t>(parse_count("seeds", s)));
       },
       [](const ExperimentConfig& c) { return join(c.seeds, [](std::uint64_t s) { return std::to_string(s); }); }},
      {"sweep.axis", [](ExperimentConfig& c, const std::string& v) { c.sweep_axis = sweep_axis_from_string(v); },
       [](const ExperimentConfig& c) { return to_string(c.sweep_axis); }},
      {"sweep.values",
       [](ExperimentConfig& c, const std::string& v) {
         c.sweep_values.clear();
         for (const auto& s : parse_list(v)) c.sweep_values.push_back(parse_num("sweep.values", s));
       },
       [](const ExperimentConfig& c) { return join(c.sweep_values, shortest); }},
      {"record_wall_clock", [](ExperimentConfig& c, const std::string& v) { c.record_wall_clock = parse_bool("record_wall_clock", v); },
       [](const ExperimentConfig& c) { return bool_str(c.record_wall_clock); }},
      {"dataset.source", [](ExperimentConfig& c, const std::string& v) { c.dataset.source = data_source_from_string(v); },
       [](const ExperimentConfig& c) { return to_string(c.dataset.source); }},
      {"dataset.csv_path", [](ExperimentConfig& c, const std::string& v) { c.dataset.csv_path = v; },
       [](const ExperimentConfig& c) { return c.dataset.csv_path.string(); }},
      SRST_COUNT("dataset.n_points", dataset.n_points),
      SRST_COUNT("dataset.dimension", dataset.dimension),
      SRST_COUNT("dataset.num_classes", dataset.num_classes),
      SRST_NUM("dataset.noise", dataset.noise),
      SRST_COUNT("split.n_labeled", split.n_labeled),
      SRST_NUM("split.validation_fraction", split.validation_fraction),
      SRST_NUM("split.test_fraction", split.test_fraction),
      SRST_BOOL("split.stratify", split.stratify),
      {"teacher.kind", [](ExperimentConfig& c, const std::string& v) { c.teacher = teacher_kind_from_string(v); },
       [](const ExperimentConfig& c) { return to_string(c.teacher); }},
      {"teacher.widths", [](ExperimentConfig& c, const std::string& v) { c.teacher_net.layer_widths = parse_widths("teacher.widths", v); },
       [](const ExperimentConfig& c) { return widths_str(c.teacher_net.layer_widths); }},
      {"teacher.activation", [](ExperimentConfig& c, const std::string& v) { c.teacher_net.activation = activation_from_string(v); },
       [](const ExperimentConfig& c) { return to_string(c.teacher_net.activation); }},
      SRST_INT("teacher.epochs", teacher_opt.epochs),
      SRST_COUNT("teacher.batch_size", teacher_opt.batch_size),
      SRST_NUM("teacher.lr", teacher_opt.lr),
      SRST_NUM("teacher.momentum", teacher_opt.momentum),
      SRST_NUM("teacher.weight_decay", teacher_opt.weight_decay),
      SRST_NUM("fixmatch.threshold", fixmatch.confidence_threshold),
      SRST_NUM("fixmatch.unlabeled_weight", fixmatch.unlabeled_weight),
      SRST_COUNT("fixmatch.unlabeled_batch", fixmatch.unlabeled_batch),
      SRST_NUM("fixmatch.weak_noise", fixmatch.weak.noise),
      SRST_NUM("fixmatch.weak_shift", fixmatch.weak.shift),
      SRST_NUM("fixmatch.strong_noise", fixmatch.strong.noise),
      SRST_NUM("fixmatch.strong_cutout", fixmatch.strong.cutout_fraction),
      {"net.widths", [](ExperimentConfig& c, const std::string& v) { c.train.net.layer_widths = parse_widths("net.widths", v); },
       [](const ExperimentConfig& c) { return widths_str(c.train.net.layer_widths); }},
      {"net.activation", [](ExperimentConfig& c, const std::string& v) { c.train.net.activation = activation_from_string(v); },
       [](const ExperimentConfig& c) { return to_string(c.train.net.activation); }},
      SRST_INT("train.epochs", train.epochs),
      SRST_COUNT("train.labeled_batch", train.labeled_batch),
      SRST_COUNT("train.unlabeled_batch", train.unlabeled_batch),
      SRST_NUM("train.lr", train.initial_lr),
      SRST_NUM("train.momentum", train.momentum),
      SRST_NUM("train.weight_decay", train.weight_decay),
      {"train.lr_drop_epochs",
       [](ExperimentConfig& c, const std::string& v) {
         c.train.lr_drop_epochs.clear();
         for (const auto& s : parse_list(v)) c.train.lr_drop_epochs.push_back(static_cast<int>(parse_int("train.lr_drop_epochs", s)));
       },
       [](const ExperimentConfig& c) { return join(c.train.lr_drop_epochs, [](int e) { return std::to_string(e); }); }},
      SRST_NUM("train.lr_drop_factor", train.lr_drop_factor),
      SRST_INT("train.swa_start_epoch", train.swa_start_epoch),
      SRST_NUM("awr.alpha", train.awr.alpha),
      SRST_NUM("awr.lambda", train.awr.lambda),
      SRST_NUM("awr.gamma", train.awr.gamma),
      SRST_NUM("awr.beta", train.awr.beta),
      SRST_NUM("awr.tau", train.awr.tau),
      SRST_BOOL("awr.detach_weight", train.awr.detach_weight),
      SRST_BOOL("awr.detach_clean_in_kl", train.awr.detach_clean_in_kl),
      SRST_NUM("rst.lambda", rst_lambda),
      SRST_NUM("uat.lambda", uat_lambda),
      SRST_NUM("attack.epsilon", train.attack.epsilon),
      SRST_NUM("attack.nu", train.attack.nu),
      SRST_INT("attack.steps", train.attack.steps),
      SRST_BOOL("attack.random_start", train.attack.random_start),
      {"attack.inner_loss", [](ExperimentConfig& c, const std::string& v) { c.train.attack.inner_loss = inner_loss_from_string(v); },
       [](const ExperimentConfig& c) { return to_string(c.train.attack.inner_loss); }},
      {"baseline.inner_loss", [](ExperimentConfig& c, const std::string& v) { c.baseline_inner_loss = inner_loss_from_string(v); },
       [](const ExperimentConfig& c) { return to_string(c.baseline_inner_loss); }},
      SRST_NUM("selection.epsilon", train.selection_attack.epsilon),
      SRST_NUM("selection.nu", train.selection_attack.nu),
      SRST_INT("selection.steps", train.selection_attack.steps),
      SRST_NUM("eval.epsilon", eval.pgd.epsilon),
      SRST_NUM("eval.nu", eval.pgd.nu),
      SRST_INT("eval.steps", eval.pgd.steps),
      SRST_INT("eval.restarts", eval.restarts),
      SRST_INT("eval.blackbox_queries", eval.blackbox_queries),
  };
  return k;
}

#undef SRST_NUM
#undef SRST_INT
#undef SRST_COUNT
#undef SRST_BOOL

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& k : keys()) n.push_back(k.name);
    return n;
  }();
  return names;
}

ConfigMap parse_config(std::istream& in) {
  ConfigMap kv;
  std::string line;
  std::size_t n = 0;
  const auto& names = config_keys();
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(n);
    if (eq == std::string::npos) throw std::invalid_argument(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (std::find(names.begin(), names.end(), key) == names.end()) {
      throw std::invalid_argument(where + ": unknown key '" + key + "'");
    }
    if (!kv.emplace(key, value).second) throw std::invalid_argument(where + ": duplicate key '" + key + "'");
  }
  return kv;
}

ConfigMap parse_config_file(const fs::path& path) {
  std::istringstream in(read_all(path));
  return parse_config(in);
}

void apply_config(ExperimentConfig& cfg, const ConfigMap& kv) {
  for (const auto& k : keys()) {
    if (auto it = kv.find(k.name); it != kv.end()) k.set(cfg, it->second);
  }
  for (const auto& [key, _] : kv) {
    const auto& n = config_keys();
    if (std::find(n.begin(), n.end(), key) == n.end()) throw std::invalid_argument("unknown config key '" + key + "'");
  }
  // nu follows epsilon unless set explicitly
  if (kv.contains("attack.epsilon") && !kv.contains("attack.nu")) cfg.train.attack.nu = cfg.train.attack.epsilon / 4.0;
  if (kv.contains("selection.epsilon") && !kv.contains("selection.nu")) {
    cfg.train.selection_attack.nu = cfg.train.selection_attack.epsilon / 4.0;
  }
  if (kv.contains("eval.epsilon") && !kv.contains("eval.nu")) cfg.eval.pgd.nu = cfg.eval.pgd.epsilon / 4.0;
}

std::string dump_config(const ExperimentConfig& cfg) {
  std::string s;
  for (const auto& k : keys()) s += k.name + " = " + k.get(cfg) + "\n";
  return s;
}

// ---- presets ---------------------------------------------------------------

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> n{"custom",     "fig1_labels", "fig2_lambda", "tab5_kd",
                                          "sec432_weight", "appc3_beta", "appc4_tau", "appc1_kd"};
  return n;
}

namespace {

// Two moons with 20 labels and eps = 0.1, sized to run in seconds per student.
ExperimentConfig desk_base() {
  ExperimentConfig c;
  c.dataset.source = DataSource::synthetic_two_moons;
  c.dataset.n_points = 1000;
  c.dataset.noise = 0.1;
  c.split.n_labeled = 20;
  c.split.validation_fraction = 0.2;
  c.split.test_fraction = 0.2;
  c.teacher_opt.epochs = 3000;
  c.teacher_opt.batch_size = 64;
  c.teacher_opt.lr = 0.05;
  c.fixmatch.optimizer = c.teacher_opt;
  c.fixmatch.confidence_threshold = 0.8;
  c.fixmatch.strong.noise = 0.15;
  c.train.epochs = 600;
  c.train.initial_lr = 0.05;
  c.train.lr_drop_epochs = {300, 450};
  c.train.swa_start_epoch = 300;
  c.train.attack = AttackConfig::pgd(0.1, 10, InnerLoss::ce_teacher_label);
  c.train.selection_attack = AttackConfig::pgd(0.1, 10);
  c.eval.pgd = AttackConfig::pgd(0.1, 20);
  c.seeds = {0, 1, 2};
  return c;
}

}  // namespace

ExperimentConfig preset_config(const std::string& name) {
  if (name == "custom") return ExperimentConfig{};
  ExperimentConfig c = desk_base();
  c.preset = name;
  if (name == "fig1_labels") {
    c.methods = {"srst_awr", "rst"};
    c.sweep_axis = SweepAxis::n_labeled;
    c.sweep_values = {10, 20, 50};
  } else if (name == "fig2_lambda") {
    c.methods = {"srst_awr", "rst"};
    c.sweep_axis = SweepAxis::lambda;
    c.sweep_values = {1, 5, 20};
  } else if (name == "tab5_kd") {
    c.methods = {"srst_awr"};
    c.sweep_axis = SweepAxis::gamma;
    c.sweep_values = {0, 4};
  } else if (name == "sec432_weight") {
    c.methods = {"srst_awr", "srst_trades"};
  } else if (name == "appc3_beta") {
    c.methods = {"srst_awr"};
    c.sweep_axis = SweepAxis::beta;
    c.sweep_values = {0, 0.25, 0.5, 0.75, 1};
  } else if (name == "appc4_tau") {
    c.methods = {"srst_awr"};
    c.sweep_axis = SweepAxis::tau;
    c.sweep_values = {1, 1.2, 2, 4};
  } else if (name == "appc1_kd") {
    // distillation without the robust term: does the student catch the teacher?
    c.methods = {"teacher_fixmatch", "srst_awr"};
    c.train.awr.lambda = 0.0;
  } else {
    throw std::invalid_argument("unknown preset '" + name + "'");
  }
  return c;
}

// ---- pipeline --------------------------------------------------------------

PreparedData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  DatasetSpec ds = cfg.dataset;
  ds.seed = seed;
  SplitSpec sp = cfg.split;
  sp.seed = seed;
  PreparedData p{load_or_generate(ds), {}};
  p.splits = make_split(p.full, sp);
  return p;
}

TrainedTeacher train_teacher(const ExperimentConfig& cfg, TeacherKind kind, const Splits& splits, std::uint64_t seed) {
  const std::uint64_t tseed = RngStream(seed).child("teacher").key();
  TrainedTeacher t;
  if (kind == TeacherKind::fixmatch) {
    FixMatchConfig fm = cfg.fixmatch;
    fm.optimizer = cfg.teacher_opt;
    t.params = train_fixmatch_teacher(splits.labeled, splits.unlabeled.x, cfg.teacher_net, fm, tseed);
  } else {
    t.params = train_supervised_teacher(splits.labeled, cfg.teacher_net, cfg.teacher_opt, tseed);
  }
  t.meta.kind = to_string(kind);
  t.meta.seed = seed;
  t.meta.accuracy = count_correct(cfg.teacher_net, t.params, splits.validation.x, splits.validation.y).rate();
  return t;
}

ExperimentConfig point_config(const ExperimentConfig& cfg, double v) {
  ExperimentConfig c = cfg;
  switch (cfg.sweep_axis) {
    case SweepAxis::none: break;
    case SweepAxis::n_labeled:
      if (v < 0 || v != std::floor(v)) throw std::invalid_argument("n_labeled sweep values must be whole numbers");
      c.split.n_labeled = static_cast<std::size_t>(v);
      break;
    case SweepAxis::lambda:
      c.train.awr.lambda = c.rst_lambda = c.uat_lambda = v;
      break;
    case SweepAxis::gamma: c.train.awr.gamma = v; break;
    case SweepAxis::beta: c.train.awr.beta = v; break;
    case SweepAxis::tau: c.train.awr.tau = v; break;
  }
  return c;
}

TrainConfig student_config(const ExperimentConfig& cfg, const Method& m, std::uint64_t seed) {
  TrainConfig t = cfg.train;
  t.objective = m.objective;
  t.seed = seed;
  if (m.objective == Objective::trades_rst) t.awr.lambda = cfg.rst_lambda;
  if (m.objective == Objective::uat_pp) t.awr.lambda = cfg.uat_lambda;
  if (m.objective == Objective::trades_rst || m.objective == Objective::uat_pp) {
    t.attack.inner_loss = cfg.baseline_inner_loss;
  }
  return t;
}

namespace {

struct Job {
  double value;
  Method method;
  std::uint64_t seed;
  fs::path record;
};

std::string value_dir(SweepAxis axis, double v) {
  return axis == SweepAxis::none ? std::string("single") : to_string(axis) + "_" + shortest(v);
}

// Teachers are shared by every method and sweep point with the same data.
struct TeacherKey {
  std::uint64_t seed;
  std::size_t n_labeled;
  TeacherKind kind;
  auto operator<=>(const TeacherKey&) const = default;
};

std::optional<TeacherKind> teacher_of(const ExperimentConfig& c, const Method& m) {
  if (m.teacher_only) return m.teacher;
  if (!needs_teacher(m.objective)) return std::nullopt;
  return m.teacher.value_or(c.teacher);
}

fs::path teacher_path(const fs::path& out, const TeacherKey& k) {
  return out / "teachers" /
         ("seed_" + std::to_string(k.seed) + "_labels_" + std::to_string(k.n_labeled) + "_" + to_string(k.kind) +
          ".rslb");
}

template <class F>
void parallel_for(std::size_t n, unsigned threads, F body) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < std::min<std::size_t>(threads, n); ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

RunSummary run_preset(const ExperimentConfig& cfg, const fs::path& out, unsigned threads) {
  cfg.validate();
  const std::vector<double> values = cfg.sweep_axis == SweepAxis::none ? std::vector<double>{0.0} : cfg.sweep_values;

  std::vector<Job> jobs;
  for (double v : values)
    for (const auto& name : cfg.methods)
      for (std::uint64_t seed : cfg.seeds) {
        jobs.push_back({v, method_from_string(name), seed,
                        out / "points" / value_dir(cfg.sweep_axis, v) / name / ("seed_" + std::to_string(seed) + ".json")});
      }

  RunSummary summary;
  std::vector<std::optional<MetricsRecord>> results(jobs.size());
  std::set<TeacherKey> needed;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (fs::exists(jobs[i].record)) {
      results[i] = read_metrics(jobs[i].record).at(0);
      ++summary.reused;
      continue;
    }
    const ExperimentConfig pc = point_config(cfg, jobs[i].value);
    if (auto kind = teacher_of(pc, jobs[i].method)) needed.insert({jobs[i].seed, pc.split.n_labeled, *kind});
  }

  // Teachers first so that student jobs only read shared state.
  const std::vector<TeacherKey> teacher_keys(needed.begin(), needed.end());
  std::map<TeacherKey, TrainedTeacher> teachers;
  std::mutex teachers_mutex;
  parallel_for(teacher_keys.size(), threads, [&](std::size_t i) {
    const TeacherKey& k = teacher_keys[i];
    ExperimentConfig pc = cfg;
    pc.split.n_labeled = k.n_labeled;
    const fs::path path = teacher_path(out, k);
    const PreparedData data = prepare_data(pc, k.seed);
    TrainedTeacher t;
    if (fs::exists(path)) {
      t.params = load_params(path);
      check_params(pc.teacher_net, t.params);
      t.meta.kind = to_string(k.kind);
      t.meta.seed = k.seed;
      t.meta.accuracy =
          count_correct(pc.teacher_net, t.params, data.splits.validation.x, data.splits.validation.y).rate();
    } else {
      t = train_teacher(pc, k.kind, data.splits, k.seed);
      fs::create_directories(path.parent_path());
      fs::path tmp = path;
      tmp += ".tmp";
      save_params(tmp, t.params);
      fs::rename(tmp, path);
    }
    std::lock_guard lock(teachers_mutex);
    teachers.emplace(k, std::move(t));
  });

  parallel_for(jobs.size(), threads, [&](std::size_t i) {
    if (results[i]) return;
    const Job& job = jobs[i];
    try {
      const auto start = std::chrono::steady_clock::now();
      const ExperimentConfig pc = point_config(cfg, job.value);
      const PreparedData data = prepare_data(pc, job.seed);
      const RngStream eval_stream = RngStream::named(job.seed, Stream::attack_start).child("eval");
      MetricsRecord m;
      std::vector<EpochRecord> history;
      if (job.method.teacher_only) {
        const TrainedTeacher& t = teachers.at({job.seed, pc.split.n_labeled, *job.method.teacher});
        m = evaluate(pc.teacher_net, t.params, data.splits.test, pc.eval, eval_stream);
      } else {
        const TrainConfig tc = student_config(pc, job.method, job.seed);
        std::optional<SoftLabelStore> store;
        if (auto kind = teacher_of(pc, job.method)) {
          const TrainedTeacher& t = teachers.at({job.seed, pc.split.n_labeled, *kind});
          store = export_soft_labels(pc.teacher_net, t.params, data.splits.unlabeled.x, tc.awr.tau, t.meta);
        }
        TrainResult tr =
            run_training({data.splits.labeled, data.splits.unlabeled.x, data.splits.validation}, store, tc);
        m = evaluate(tc.net, tr.best, data.splits.test, pc.eval, eval_stream);
        history = std::move(tr.history);
      }
      m.preset = cfg.preset;
      m.method = job.method.name;
      m.sweep_axis = to_string(cfg.sweep_axis);
      m.sweep_value = job.value;
      m.seed = job.seed;
      if (cfg.record_wall_clock) {
        m.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      }
      if (!history.empty()) {
        std::ostringstream hist;
        write_history(hist, history);
        fs::path hpath = job.record;
        hpath.replace_extension(".history.jsonl");
        write_file_atomic(hpath, hist.str());
      }
      write_metrics({m}, job.record);
      results[i] = m;
    } catch (const std::exception& e) {
      throw std::runtime_error("sweep point " + to_string(cfg.sweep_axis) + "=" + shortest(job.value) + " method " +
                               job.method.name + " seed " + std::to_string(job.seed) + ": " + e.what());
    }
  });

  for (auto& r : results) summary.records.push_back(*r);
  write_metrics(summary.records, out / "metrics.jsonl");
  write_metrics_csv(summary.records, out / "metrics.csv");
  write_plot_data(summary.records, out / "plot.csv");
  return summary;
}

void write_plot_data(const std::vector<MetricsRecord>& records, const fs::path& csv_path) {
  struct Acc {
    std::string axis, method;
    double value;
    std::size_t n = 0;
    double std_acc = 0, pgd20 = 0, multi = 0, bb = 0;
  };
  std::vector<Acc> groups;
  for (const auto& r : records) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const Acc& a) { return a.value == r.sweep_value && a.method == r.method; });
    if (it == groups.end()) {
      groups.push_back({r.sweep_axis, r.method, r.sweep_value});
      it = groups.end() - 1;
    }
    ++it->n;
    it->std_acc += r.std_acc;
    it->pgd20 += r.rob_acc_pgd20;
    it->multi += r.rob_acc_multi;
    it->bb += r.rob_acc_blackbox;
  }
  std::ostringstream out;
  out << "sweep_axis,sweep_value,method,n_seeds,std_acc_mean,rob_acc_pgd20_mean,rob_acc_multi_mean,"
         "rob_acc_blackbox_mean\n";
  for (const auto& g : groups) {
    const double n = static_cast<double>(g.n);
    out << g.axis << ',' << shortest(g.value) << ',' << g.method << ',' << g.n << ',' << shortest(g.std_acc / n) << ','
        << shortest(g.pgd20 / n) << ',' << shortest(g.multi / n) << ',' << shortest(g.bb / n) << '\n';
  }
  write_file_atomic(csv_path, out.str());
}

}  // namespace srst
