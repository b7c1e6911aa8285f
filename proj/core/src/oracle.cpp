#include "srst/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "srst/rng.hpp"

namespace srst::oracle {

namespace {

void check_distribution(const std::vector<double>& p, const std::string& what) {
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument(what + " has an invalid entry");
    s += v;
  }
  if (std::abs(s - 1.0) > 1e-9) throw std::invalid_argument(what + " does not sum to 1");
}

void check_balls(const std::vector<std::vector<std::size_t>>& balls, std::size_t n) {
  if (balls.size() != n) throw std::invalid_argument("one neighbourhood per point required");
  for (std::size_t i = 0; i < n; ++i) {
    bool self = false;
    for (std::size_t j : balls[i]) {
      if (j >= n) throw std::invalid_argument("neighbourhood of point " + std::to_string(i) + " names unknown point");
      self = self || j == i;
    }
    if (!self) throw std::invalid_argument("point " + std::to_string(i) + " is missing from its own ball");
  }
}

bool has_flip(const FiniteInstance& inst, std::size_t x) {
  for (std::size_t j : inst.neighborhood[x]) {
    if (inst.classifier[j] != inst.classifier[x]) return true;
  }
  return false;
}

std::vector<double> random_simplex(Sampler& rng, std::size_t n) {
  std::vector<double> w(n);
  double s = 0.0;
  for (double& v : w) {
    v = rng.uniform(0.05, 1.0);
    s += v;
  }
  for (double& v : w) v /= s;
  return w;
}

std::vector<std::vector<std::size_t>> random_balls(Sampler& rng, std::size_t n, double density, bool symmetric) {
  std::vector<std::vector<bool>> member(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) {
    member[i][i] = true;
    for (std::size_t j = symmetric ? i + 1 : 0; j < n; ++j) {
      if (j == i) continue;
      if (rng.bernoulli(density)) {
        member[i][j] = true;
        if (symmetric) member[j][i] = true;
      }
    }
  }
  std::vector<std::vector<std::size_t>> balls(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (member[i][j]) balls[i].push_back(j);
  return balls;
}

}  // namespace

void FiniteInstance::validate() const {
  const std::size_t n = classifier.size();
  if (n == 0) throw std::invalid_argument("instance has no points");
  if (num_classes < 2) throw std::invalid_argument("instance needs at least 2 classes");
  if (conditionals.size() != n || marginal.size() != n) throw std::invalid_argument("instance arrays disagree in size");
  check_balls(neighborhood, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (classifier[i] < 0 || static_cast<std::size_t>(classifier[i]) >= num_classes) {
      throw std::invalid_argument("classifier label out of range at point " + std::to_string(i));
    }
    if (conditionals[i].size() != num_classes) throw std::invalid_argument("conditional has wrong length");
    check_distribution(conditionals[i], "conditional of point " + std::to_string(i));
  }
  check_distribution(marginal, "marginal");
}

void BinaryInstance::validate() const {
  const std::size_t n = score.size();
  if (n == 0) throw std::invalid_argument("instance has no points");
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be > 0");
  if (p_positive.size() != n || marginal.size() != n) throw std::invalid_argument("instance arrays disagree in size");
  check_balls(neighborhood, n);
  for (double p : p_positive) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p(Y=+1|x) outside [0, 1]");
  }
  check_distribution(marginal, "marginal");
}

FiniteInstance BinaryInstance::as_finite() const {
  validate();
  FiniteInstance f;
  f.num_classes = 2;
  f.neighborhood = neighborhood;
  f.marginal = marginal;
  for (std::size_t i = 0; i < size(); ++i) {
    f.classifier.push_back(score[i] >= 0.0 ? 1 : 0);
    f.conditionals.push_back({1.0 - p_positive[i], p_positive[i]});
  }
  return f;
}

std::size_t worst_case_point(const FiniteInstance& inst, std::size_t point, TieBreak tie) {
  if (point >= inst.size()) throw std::out_of_range("unknown point id " + std::to_string(point));
  const int label = inst.classifier[point];
  bool found = false;
  std::size_t best = point;
  for (std::size_t j : inst.neighborhood[point]) {
    if (inst.classifier[j] == label) continue;
    if (!found || (tie == TieBreak::lowest_id ? j < best : j > best)) best = j;
    found = true;
  }
  return best;
}

RiskReport exact_risks(const FiniteInstance& inst, TieBreak tie) {
  inst.validate();
  RiskReport r;
  double extra31 = 0.0, extra32 = 0.0;
  for (std::size_t x = 0; x < inst.size(); ++x) {
    const double m = inst.marginal[x];
    const auto& p = inst.conditionals[x];
    const auto fx = static_cast<std::size_t>(inst.classifier[x]);
    const std::size_t z = worst_case_point(inst, x, tie);
    const auto fz = static_cast<std::size_t>(inst.classifier[z]);

    double nat = 0.0, rob = 0.0;
    for (std::size_t y = 0; y < inst.num_classes; ++y) {
      if (y != fx) nat += p[y];
      bool worst = false;
      for (std::size_t j : inst.neighborhood[x]) {
        worst = worst || static_cast<std::size_t>(inst.classifier[j]) != y;
      }
      if (worst) rob += p[y];
    }
    r.r_nat += m * nat;
    r.r_rob += m * rob;
    if (has_flip(inst, x)) r.r_bdy += m * p[fx];
    if (fx != fz) {
      extra31 += m * (1.0 - p[fz]);
      extra32 += m * p[fx];
    }
  }
  r.bound_thm31 = r.r_nat + extra31;
  r.bound_thm32 = r.r_nat + extra32;
  return r;
}

LemmaReport lemma_a1_check(const FiniteInstance& inst, TieBreak tie) {
  inst.validate();
  LemmaReport rep;
  for (std::size_t x = 0; x < inst.size(); ++x) {
    const auto& p = inst.conditionals[x];
    const int fx = inst.classifier[x];
    const std::size_t z = worst_case_point(inst, x, tie);
    const int fz = inst.classifier[z];
    LemmaPoint pt;
    for (std::size_t y = 0; y < inst.num_classes; ++y) {
      const int yi = static_cast<int>(y);
      bool left = false;
      for (std::size_t j : inst.neighborhood[x]) {
        const int fj = inst.classifier[j];
        left = left || (fj != fx && fj != yi);
      }
      if (left) pt.lhs += p[y];
      if (fx != fz && yi != fz) pt.rhs += p[y];
    }
    rep.lhs += inst.marginal[x] * pt.lhs;
    rep.rhs += inst.marginal[x] * pt.rhs;
    rep.per_point.push_back(pt);
  }
  return rep;
}

double binary_surrogate(double t) {
  // log1p(e^{-t}) evaluated without overflow for large negative t
  const double nats = t >= 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
  return nats / std::numbers::ln2;
}

BinaryBounds binary_bounds(const BinaryInstance& inst, TieBreak tie) {
  const FiniteInstance fin = inst.as_finite();
  BinaryBounds b;
  double first = 0.0, arow = 0.0, cow = 0.0, trades = 0.0;
  for (std::size_t x = 0; x < inst.size(); ++x) {
    const double m = inst.marginal[x];
    const double f = inst.score[x];
    const double pp = inst.p_positive[x];
    first += m * (pp * binary_surrogate(f) + (1.0 - pp) * binary_surrogate(-f));

    const std::size_t z = worst_case_point(fin, x, tie);
    const double reg = binary_surrogate(f * inst.score[z] / inst.lambda);
    const auto& cond = fin.conditionals[x];
    const auto fz = static_cast<std::size_t>(fin.classifier[z]);
    const auto fx = static_cast<std::size_t>(fin.classifier[x]);
    arow += m * reg * (1.0 - cond[fz]);
    cow += m * reg * cond[fx];
    trades += m * reg;
  }
  b.rhs_semiarow = first + arow;
  b.rhs_semicow = first + cow;
  b.rhs_trades = first + trades;
  b.r_rob = exact_risks(fin, tie).r_rob;
  return b;
}

FiniteInstance random_instance(std::uint64_t seed, std::size_t n_points, std::size_t num_classes,
                               double ball_density, bool symmetric) {
  if (n_points < 1) throw std::invalid_argument("random_instance needs n_points >= 1");
  if (num_classes < 2) throw std::invalid_argument("random_instance needs at least 2 classes");
  if (!(ball_density >= 0.0 && ball_density <= 1.0)) throw std::invalid_argument("ball_density outside [0, 1]");
  Sampler rng(RngStream(seed).child("finite-instance"));
  FiniteInstance inst;
  inst.num_classes = num_classes;
  inst.neighborhood = random_balls(rng, n_points, ball_density, symmetric);
  for (std::size_t i = 0; i < n_points; ++i) {
    inst.classifier.push_back(static_cast<int>(rng.below(num_classes)));
    if (rng.bernoulli(0.25)) {
      std::vector<double> point_mass(num_classes, 0.0);
      point_mass[rng.below(num_classes)] = 1.0;
      inst.conditionals.push_back(std::move(point_mass));
    } else {
      inst.conditionals.push_back(random_simplex(rng, num_classes));
    }
  }
  inst.marginal = random_simplex(rng, n_points);
  return inst;
}

BinaryInstance random_binary_instance(std::uint64_t seed, std::size_t n_points, double ball_density,
                                      double lambda) {
  if (n_points < 1) throw std::invalid_argument("random_binary_instance needs n_points >= 1");
  Sampler rng(RngStream(seed).child("binary-instance"));
  BinaryInstance inst;
  inst.lambda = lambda;
  inst.neighborhood = random_balls(rng, n_points, ball_density, false);
  for (std::size_t i = 0; i < n_points; ++i) {
    inst.score.push_back(rng.bernoulli(0.1) ? 0.0 : rng.uniform(-3.0, 3.0));
    const double u = rng.uniform();
    inst.p_positive.push_back(u < 0.15 ? 0.0 : (u < 0.3 ? 1.0 : rng.uniform()));
  }
  inst.marginal = random_simplex(rng, n_points);
  inst.validate();
  return inst;
}

SweepShape sweep_shape(std::uint64_t seed, std::size_t max_points, std::size_t max_classes) {
  if (max_points < 1 || max_classes < 2) throw std::invalid_argument("sweep_shape needs max_points >= 1, max_classes >= 2");
  Sampler rng(RngStream(seed).child("sweep-shape"));
  SweepShape s;
  s.n_points = 1 + rng.below(max_points);
  s.num_classes = 2 + rng.below(max_classes - 1);
  s.ball_density = rng.uniform(0.05, 0.8);
  return s;
}

FiniteInstance sweep_instance(std::uint64_t seed, std::size_t max_points, std::size_t max_classes) {
  const SweepShape s = sweep_shape(seed, max_points, max_classes);
  return random_instance(seed, s.n_points, s.num_classes, s.ball_density);
}

BinaryInstance sweep_binary_instance(std::uint64_t seed, double lambda, std::size_t max_points) {
  const SweepShape s = sweep_shape(seed, max_points, 2);
  return random_binary_instance(seed, s.n_points, s.ball_density, lambda);
}

}  // namespace srst::oracle
