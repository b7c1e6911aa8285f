#pragma once

#include <cstdint>
#include <vector>

namespace srst::oracle {

// Which flipping neighbour z(x) picks when several exist. The theorems allow
// any maximiser; highest_id is the alternative used to probe insensitivity.
enum class TieBreak { lowest_id, highest_id };

/// Finite stand-in for (X, Y) with an explicit neighbourhood per point.
struct FiniteInstance {
  std::size_t num_classes = 2;
  std::vector<std::vector<std::size_t>> neighborhood;  // ball of each point, contains itself
  std::vector<int> classifier;                         // F(x)
  std::vector<std::vector<double>> conditionals;       // p(Y = . | x)
  std::vector<double> marginal;                        // p(x)

  [[nodiscard]] std::size_t size() const { return classifier.size(); }
  void validate() const;
};

/// Binary instance driven by a real score f(x); F(x) = +1 iff f(x) >= 0.
/// Class index 0 is y = -1 and index 1 is y = +1.
struct BinaryInstance {
  std::vector<double> score;
  std::vector<std::vector<std::size_t>> neighborhood;
  std::vector<double> p_positive;  // p(Y = +1 | x)
  std::vector<double> marginal;
  double lambda = 1.0;

  [[nodiscard]] std::size_t size() const { return score.size(); }
  void validate() const;
  [[nodiscard]] FiniteInstance as_finite() const;
};

struct RiskReport {
  double r_nat = 0.0;
  double r_bdy = 0.0;
  double r_rob = 0.0;
  double bound_thm31 = 0.0;  // r_nat + E 1{F(x) != F(z)} p(Y != F(z) | x)
  double bound_thm32 = 0.0;  // r_nat + E 1{F(x) != F(z)} p(Y  = F(x) | x)
};

struct LemmaPoint {
  double lhs = 0.0;  // E_{Y|x} 1{exists x' in B: F(x) != F(x'), F(x') != Y}
  double rhs = 0.0;  // E_{Y|x} 1{F(x) != F(z), Y != F(z)}
};

struct LemmaReport {
  std::vector<LemmaPoint> per_point;
  double lhs = 0.0;  // marginal-weighted totals
  double rhs = 0.0;
};

struct BinaryBounds {
  double rhs_semiarow = 0.0;
  double rhs_semicow = 0.0;
  double rhs_trades = 0.0;
  double r_rob = 0.0;
};

std::size_t worst_case_point(const FiniteInstance& inst, std::size_t point, TieBreak tie = TieBreak::lowest_id);

RiskReport exact_risks(const FiniteInstance& inst, TieBreak tie = TieBreak::lowest_id);

LemmaReport lemma_a1_check(const FiniteInstance& inst, TieBreak tie = TieBreak::lowest_id);

// Base-2 logistic loss log2(1 + e^{-t}); phi(t) >= 1{t <= 0}.
double binary_surrogate(double t);

BinaryBounds binary_bounds(const BinaryInstance& inst, TieBreak tie = TieBreak::lowest_id);

/// Reproducible random instance. Each point's ball holds itself plus every
/// other point independently with probability `ball_density`.
FiniteInstance random_instance(std::uint64_t seed, std::size_t n_points, std::size_t num_classes,
                               double ball_density, bool symmetric = false);

BinaryInstance random_binary_instance(std::uint64_t seed, std::size_t n_points, double ball_density,
                                      double lambda);

// Shapes for seeded sweeps: 1..max_points points, 2..max_classes classes.
struct SweepShape {
  std::size_t n_points = 1;
  std::size_t num_classes = 2;
  double ball_density = 0.0;
};
SweepShape sweep_shape(std::uint64_t seed, std::size_t max_points, std::size_t max_classes);
FiniteInstance sweep_instance(std::uint64_t seed, std::size_t max_points = 12, std::size_t max_classes = 4);
BinaryInstance sweep_binary_instance(std::uint64_t seed, double lambda, std::size_t max_points = 12);

}  // namespace srst::oracle
