#include "srst/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "srst/rng.hpp"

namespace srst {

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out{x.select_rows(indices), {}, num_classes};
  out.y.reserve(indices.size());
  for (std::size_t i : indices) out.y.push_back(y[i]);
  return out;
}

std::string to_string(DataSource s) {
  switch (s) {
    case DataSource::csv_file: return "csv_file";
    case DataSource::synthetic_two_moons: return "two_moons";
    case DataSource::synthetic_gauss_mix: return "gauss_mix";
    case DataSource::synthetic_circles: return "circles";
  }
  return "?";
}

DataSource data_source_from_string(const std::string& s) {
  if (s == "csv_file" || s == "csv") return DataSource::csv_file;
  if (s == "two_moons" || s == "synthetic_two_moons") return DataSource::synthetic_two_moons;
  if (s == "gauss_mix" || s == "synthetic_gauss_mix") return DataSource::synthetic_gauss_mix;
  if (s == "circles" || s == "synthetic_circles") return DataSource::synthetic_circles;
  throw std::invalid_argument("unknown data source '" + s + "'");
}

namespace {

void min_max_normalize(Tensor& x) {
  if (x.rows() == 0) return;
  for (std::size_t j = 0; j < x.cols(); ++j) {
    double lo = x(0, j), hi = x(0, j);
    for (std::size_t i = 1; i < x.rows(); ++i) {
      lo = std::min(lo, x(i, j));
      hi = std::max(hi, x(i, j));
    }
    for (std::size_t i = 0; i < x.rows(); ++i) {
      x(i, j) = hi > lo ? (x(i, j) - lo) / (hi - lo) : 0.5;
    }
  }
}

// Shuffles rows so classes are interleaved.
Dataset finish(std::vector<std::vector<double>> points, std::vector<int> labels, std::size_t classes, Sampler& rng) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));
  const std::size_t d = points.empty() ? 0 : points.front().size();
  Tensor x = Tensor::zeros({points.size(), d});
  std::vector<int> y(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::copy(points[order[i]].begin(), points[order[i]].end(), x.row(i).begin());
    y[i] = labels[order[i]];
  }
  min_max_normalize(x);
  return {std::move(x), std::move(y), classes};
}

double spaced(std::size_t i, std::size_t n) {
  return n > 1 ? std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1) : 0.0;
}

Dataset two_moons(const DatasetSpec& spec) {
  Sampler rng(RngStream(spec.seed).child("two_moons"));
  const std::size_t n_outer = spec.n_points / 2, n_inner = spec.n_points - n_outer;
  std::vector<std::vector<double>> pts;
  std::vector<int> labels;
  for (std::size_t i = 0; i < n_outer; ++i) {
    const double t = spaced(i, n_outer);
    pts.push_back({std::cos(t) + spec.noise * rng.normal(), std::sin(t) + spec.noise * rng.normal()});
    labels.push_back(0);
  }
  for (std::size_t i = 0; i < n_inner; ++i) {
    const double t = spaced(i, n_inner);
    pts.push_back({1.0 - std::cos(t) + spec.noise * rng.normal(), 0.5 - std::sin(t) + spec.noise * rng.normal()});
    labels.push_back(1);
  }
  return finish(std::move(pts), std::move(labels), 2, rng);
}

Dataset circles(const DatasetSpec& spec) {
  Sampler rng(RngStream(spec.seed).child("circles"));
  const std::size_t n_outer = spec.n_points / 2, n_inner = spec.n_points - n_outer;
  std::vector<std::vector<double>> pts;
  std::vector<int> labels;
  auto ring = [&](std::size_t n, double radius, int label) {
    for (std::size_t i = 0; i < n; ++i) {
      const double t = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
      pts.push_back({radius * std::cos(t) + spec.noise * rng.normal(), radius * std::sin(t) + spec.noise * rng.normal()});
      labels.push_back(label);
    }
  };
  ring(n_outer, 1.0, 0);
  ring(n_inner, 0.5, 1);
  return finish(std::move(pts), std::move(labels), 2, rng);
}

Dataset gauss_mix(const DatasetSpec& spec) {
  if (spec.num_classes < 2) throw std::invalid_argument("gauss_mix needs at least 2 classes");
  if (spec.dimension < 1) throw std::invalid_argument("gauss_mix needs dimension >= 1");
  Sampler rng(RngStream(spec.seed).child("gauss_mix"));
  std::vector<std::vector<double>> means(spec.num_classes, std::vector<double>(spec.dimension));
  for (auto& m : means)
    for (double& v : m) v = rng.uniform();
  std::vector<std::vector<double>> pts;
  std::vector<int> labels;
  for (std::size_t i = 0; i < spec.n_points; ++i) {
    const std::size_t c = i % spec.num_classes;
    std::vector<double> p = means[c];
    if (spec.noise != 0.0) {
      for (double& v : p) v += spec.noise * rng.normal();
    }
    pts.push_back(std::move(p));
    labels.push_back(static_cast<int>(c));
  }
  return finish(std::move(pts), std::move(labels), spec.num_classes, rng);
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string field;
  while (std::getline(ss, field, ',')) {
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

Dataset csv(const DatasetSpec& spec) {
  std::ifstream in(spec.csv_path);
  if (!in) throw std::runtime_error("cannot open " + spec.csv_path.string());
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t d = 0;
  std::string line;
  std::size_t row = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = split_fields(line);
    std::vector<double> parsed(fields.size());
    bool numeric = true;
    for (std::size_t k = 0; k < fields.size(); ++k) numeric = numeric && parse_double(fields[k], parsed[k]);
    if (first && !numeric) {
      first = false;
      continue;  // header
    }
    first = false;
    const std::string where = "csv row " + std::to_string(row);
    if (!numeric) throw std::invalid_argument(where + ": non-numeric field");
    if (fields.size() < 2) throw std::invalid_argument(where + ": need features and a label");
    if (d == 0) d = fields.size() - 1;
    if (fields.size() != d + 1) {
      throw std::invalid_argument(where + ": expected " + std::to_string(d + 1) + " fields, got " +
                                  std::to_string(fields.size()));
    }
    for (std::size_t k = 0; k < d; ++k) {
      if (!std::isfinite(parsed[k])) throw std::invalid_argument(where + ": non-finite feature");
      values.push_back(parsed[k]);
    }
    const double label = parsed[d];
    if (label != std::floor(label) || label < 0 || label >= static_cast<double>(spec.num_classes)) {
      throw std::invalid_argument(where + ": label " + fields[d] + " outside [0, " +
                                  std::to_string(spec.num_classes) + ")");
    }
    labels.push_back(static_cast<int>(label));
  }
  if (labels.empty()) throw std::invalid_argument("csv file " + spec.csv_path.string() + " has no rows");
  Tensor x({labels.size(), d}, std::move(values));
  min_max_normalize(x);
  return {std::move(x), std::move(labels), spec.num_classes};
}

}  // namespace

Dataset load_or_generate(const DatasetSpec& spec) {
  if (spec.source != DataSource::csv_file && spec.n_points == 0) {
    throw std::invalid_argument("synthetic dataset needs n_points >= 1");
  }
  switch (spec.source) {
    case DataSource::csv_file: return csv(spec);
    case DataSource::synthetic_two_moons: return two_moons(spec);
    case DataSource::synthetic_gauss_mix: return gauss_mix(spec);
    case DataSource::synthetic_circles: return circles(spec);
  }
  throw std::logic_error("unhandled data source");
}

Splits make_split(const Dataset& data, const SplitSpec& spec) {
  const std::size_t n = data.size();
  if (!(spec.validation_fraction >= 0.0 && spec.test_fraction >= 0.0 &&
        spec.validation_fraction + spec.test_fraction < 1.0)) {
    throw std::invalid_argument("validation and test fractions must be >= 0 and sum below 1");
  }
  const auto n_val = static_cast<std::size_t>(std::llround(spec.validation_fraction * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::llround(spec.test_fraction * static_cast<double>(n)));
  if (n_val + n_test > n) throw std::invalid_argument("split fractions exceed the dataset");
  const std::size_t pool_size = n - n_val - n_test;
  if (spec.n_labeled > pool_size) {
    throw std::invalid_argument("n_labeled " + std::to_string(spec.n_labeled) + " exceeds training pool of " +
                                std::to_string(pool_size));
  }
  if (spec.stratify && spec.n_labeled < data.num_classes) {
    throw std::invalid_argument("stratified split needs n_labeled >= class count");
  }

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Sampler rng(RngStream::named(spec.seed, Stream::data_split));
  rng.shuffle(std::span<std::size_t>(perm));

  SplitIndices idx;
  idx.validation.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_val));
  idx.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_val),
                  perm.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  const std::vector<std::size_t> pool(perm.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), perm.end());

  std::vector<bool> taken(pool.size(), false);
  if (spec.stratify) {
    const std::size_t classes = data.num_classes;
    std::vector<std::size_t> quota(classes, spec.n_labeled / classes);
    for (std::size_t c = 0; c < spec.n_labeled % classes; ++c) ++quota[c];
    for (std::size_t k = 0; k < pool.size(); ++k) {
      auto c = static_cast<std::size_t>(data.y[pool[k]]);
      if (quota[c] > 0) {
        --quota[c];
        taken[k] = true;
        idx.labeled.push_back(pool[k]);
      }
    }
  }
  // Fill whatever stratification could not, in pool order.
  for (std::size_t k = 0; k < pool.size() && idx.labeled.size() < spec.n_labeled; ++k) {
    if (!taken[k]) {
      taken[k] = true;
      idx.labeled.push_back(pool[k]);
    }
  }
  for (std::size_t k = 0; k < pool.size(); ++k)
    if (!taken[k]) idx.unlabeled.push_back(pool[k]);

  for (auto* v : {&idx.labeled, &idx.unlabeled, &idx.validation, &idx.test}) std::sort(v->begin(), v->end());

  Splits s;
  s.labeled = data.subset(idx.labeled);
  s.unlabeled = data.subset(idx.unlabeled);
  s.validation = data.subset(idx.validation);
  s.test = data.subset(idx.test);
  s.indices = std::move(idx);
  return s;
}

}  // namespace srst
