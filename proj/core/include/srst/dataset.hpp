#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "srst/tensor.hpp"

namespace srst {

/// Labeled points with features in [0, 1]^d.
struct Dataset {
  Tensor x;
  std::vector<int> y;
  std::size_t num_classes = 2;

  [[nodiscard]] std::size_t size() const { return y.size(); }
  [[nodiscard]] std::size_t dim() const { return x.cols(); }
  [[nodiscard]] Dataset subset(std::span<const std::size_t> indices) const;
};

enum class DataSource { csv_file, synthetic_two_moons, synthetic_gauss_mix, synthetic_circles };

std::string to_string(DataSource s);
DataSource data_source_from_string(const std::string& s);

struct DatasetSpec {
  DataSource source = DataSource::synthetic_two_moons;
  std::filesystem::path csv_path;
  std::size_t n_points = 1000;
  std::size_t dimension = 2;
  std::size_t num_classes = 2;
  double noise = 0.1;
  std::uint64_t seed = 0;
};

/// Synthetic sources are generated from `seed` and mapped into [0, 1]^d by a
/// per-coordinate min-max map. CSV rows are d feature columns followed by an
/// integer label; an optional header line is skipped.
Dataset load_or_generate(const DatasetSpec& spec);

struct SplitSpec {
  std::size_t n_labeled = 20;
  double validation_fraction = 0.2;
  double test_fraction = 0.2;
  bool stratify = true;
  std::uint64_t seed = 0;
};

struct SplitIndices {
  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

struct Splits {
  SplitIndices indices;
  Dataset labeled;
  Dataset unlabeled;  // labels retained for diagnostics only
  Dataset validation;
  Dataset test;
};

Splits make_split(const Dataset& data, const SplitSpec& spec);

}  // namespace srst
