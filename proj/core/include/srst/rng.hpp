#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace srst {

// The five purposes randomness is drawn for. Every stream is derived from the
// master seed, so ablations differ only where intended.
enum class Stream : std::uint64_t {
  data_split = 1,
  init = 2,
  batch_order = 3,
  attack_start = 4,
  augmentation = 5,
};

/// Identity of a random stream. A stream is a 64-bit key; engines are created
/// on demand, and child streams are derived by hashing, so a stream can be
/// split per example or per step without sharing mutable state.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : key_(mix(seed)) {}

  static RngStream named(std::uint64_t master_seed, Stream purpose) {
    return RngStream(master_seed).child(static_cast<std::uint64_t>(purpose));
  }

  [[nodiscard]] RngStream child(std::uint64_t index) const {
    return RngStream(Raw{}, mix(key_ ^ mix(index + 0x9e3779b97f4a7c15ULL)));
  }
  [[nodiscard]] RngStream child(std::string_view name) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : name) {
      h ^= static_cast<unsigned char>(c);
      h *= 0x100000001b3ULL;
    }
    return child(h);
  }

  [[nodiscard]] std::uint64_t key() const { return key_; }

 private:
  struct Raw {};
  RngStream(Raw, std::uint64_t key) : key_(key) {}

  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
};

/// Mutable sampler bound to one stream.
class Sampler {
 public:
  explicit Sampler(const RngStream& stream) : engine_(stream.key()) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  std::size_t below(std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_);
  }
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::swap(values[i - 1], values[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace srst
