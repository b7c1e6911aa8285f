#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <span>
#include <vector>

#include "srst/rng.hpp"

namespace srst::detail {

// Mini-batches over one shuffled pass; the last batch may be short.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch, const RngStream& stream) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Sampler rng(stream);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; s += batch) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + batch)));
  }
  return out;
}

// Indices drawn uniformly with replacement.
inline std::vector<std::size_t> sample_rows(std::size_t n, std::size_t count, const RngStream& stream) {
  Sampler pick(stream);
  std::vector<std::size_t> out(count);
  for (auto& i : out) i = pick.below(n);
  return out;
}

}  // namespace srst::detail
