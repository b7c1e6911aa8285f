#include <gtest/gtest.h>

#include <cmath>

#include "srst/losses.hpp"
#include "test_util.hpp"

using namespace srst;
using namespace srst::testing;

namespace {

// Single-layer-equivalent net whose logits equal the input: 2 -> 2 -> 2 with
// identity weights. Inputs are kept nonnegative so relu is the identity.
ScoreNet passthrough_net(std::size_t c) { return {{c, c, c}, Activation::relu}; }

ParamSet passthrough_params(std::size_t c) {
  ParamSet p;
  for (int l = 0; l < 2; ++l) {
    Tensor w = Tensor::zeros({c, c});
    for (std::size_t i = 0; i < c; ++i) w(i, i) = 1.0;
    p.layers.push_back({w, Tensor::zeros({1, c})});
  }
  return p;
}

}  // namespace

// ---- single-example values ---------------------------------------------------

TEST(LabelSmooth, Examples) {
  const auto s = label_smooth(2, 4, 0.2);
  const std::vector<double> expect{0.05, 0.05, 0.85, 0.05};
  for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(s[c], expect[c], 1e-15);
  EXPECT_EQ(label_smooth(1, 3, 0.0), (std::vector<double>{0, 1, 0}));
  EXPECT_THROW(label_smooth(4, 4, 0.2), std::invalid_argument);
  EXPECT_THROW(label_smooth(-1, 4, 0.2), std::invalid_argument);
  EXPECT_THROW(label_smooth(0, 4, 1.0), std::invalid_argument);
}

TEST(LabelSmooth, SumsToOneWithTwoDistinctValues) {
  Sampler rng(RngStream(1));
  for (int t = 0; t < 200; ++t) {
    const std::size_t c = 2 + rng.below(8);
    const double alpha = rng.uniform(0.0, 0.99);
    const auto s = label_smooth(static_cast<int>(rng.below(c)), c, alpha);
    double sum = 0.0;
    for (double v : s) sum += v;
    EXPECT_NEAR(sum, 1.0, 1e-12);
    std::vector<double> distinct(s);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    EXPECT_EQ(distinct.size(), 2u);
  }
}

TEST(LsCrossEntropy, Examples) {
  const std::vector<double> zero{0, 0}, two{2, 0};
  EXPECT_NEAR(ls_cross_entropy(zero, 0, 0.0), std::log(2.0), 1e-15);
  EXPECT_NEAR(ls_cross_entropy(zero, 0, 0.2), std::log(2.0), 1e-15);
  const double ce0 = std::log1p(std::exp(-2.0)), ce1 = std::log1p(std::exp(2.0));
  EXPECT_NEAR(ls_cross_entropy(two, 0, 0.2), 0.9 * ce0 + 0.1 * ce1, 1e-14);
}

TEST(LsCrossEntropy, ZeroAlphaIsBitExactCrossEntropy) {
  Sampler rng(RngStream(2));
  for (int t = 0; t < 500; ++t) {
    std::vector<double> z(2 + rng.below(5));
    for (double& v : z) v = rng.uniform(-30, 30);
    const int y = static_cast<int>(rng.below(z.size()));
    EXPECT_EQ(ls_cross_entropy(z, y, 0.0), cross_entropy(z, y));
  }
}

TEST(LsCrossEntropy, PositiveBelowUniformSmoothing) {
  Sampler rng(RngStream(3));
  for (int t = 0; t < 500; ++t) {
    std::vector<double> z(2 + rng.below(5));
    for (double& v : z) v = rng.uniform(-10, 10);
    const double c = static_cast<double>(z.size());
    const double alpha = rng.uniform(0.0, 1.0 - 1.0 / c - 1e-3);
    const int y = static_cast<int>(rng.below(z.size()));
    const double v = ls_cross_entropy(z, y, alpha);
    EXPECT_GT(v, 0.0);
    EXPECT_NEAR(v, ref_ls_ce(z, y, alpha), 1e-12 * std::max(1.0, v));
  }
}

TEST(KlDiv, Examples) {
  const std::vector<double> a{0.3, 0.7};
  EXPECT_EQ(kl_div(a, a), 0.0);
  EXPECT_NEAR(kl_div(std::vector<double>{1, 0}, std::vector<double>{0.5, 0.5}), std::log(2.0), 1e-15);
  EXPECT_NEAR(kl_div(std::vector<double>{0.6, 0.4}, std::vector<double>{0.4, 0.6}),
              0.6 * std::log(1.5) + 0.4 * std::log(2.0 / 3.0), 1e-15);
  EXPECT_NEAR(kl_div(std::vector<double>{0.6, 0.4}, std::vector<double>{0.4, 0.6}), 0.08109, 1e-5);
}

TEST(KlDiv, RejectsNonSimplexInput) {
  EXPECT_THROW(kl_div(std::vector<double>{0.5, 0.6}, std::vector<double>{0.5, 0.5}), std::invalid_argument);
  EXPECT_THROW(kl_div(std::vector<double>{0.5, 0.5}, std::vector<double>{-0.1, 1.1}), std::invalid_argument);
  EXPECT_THROW(kl_div(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5}), std::invalid_argument);
  EXPECT_NO_THROW(kl_div(std::vector<double>{0.5, 0.5 + 5e-9}, std::vector<double>{0.5, 0.5}));
}

TEST(KlDiv, ClampKeepsZeroQFinite) {
  const double v = kl_div(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0});
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, 0.5 * std::log(0.5) + 0.5 * (std::log(0.5) - std::log(kProbFloor)), 1e-12);
}

TEST(KlDiv, NonnegativeProperty) {
  Sampler rng(RngStream(4));
  for (int t = 0; t < 500; ++t) {
    const std::size_t c = 2 + rng.below(5);
    EXPECT_GE(kl_div(random_simplex_row(rng, c), random_simplex_row(rng, c)), 0.0);
  }
}

TEST(AdaptiveWeight, Examples) {
  const std::vector<double> pt{0.7, 0.3}, pc{0.6, 0.4}, pa{0.2, 0.8};
  EXPECT_NEAR(adaptive_weight(pt, pc, pa, 0.5), 0.58, 1e-15);
  const std::vector<double> one{0, 1, 0}, other{1, 0, 0};
  EXPECT_EQ(adaptive_weight(one, one, other, 1.0), 1.0);
  EXPECT_EQ(adaptive_weight(one, other, one, 0.0), 0.0);
  EXPECT_THROW(adaptive_weight(pt, pc, one, 0.5), std::invalid_argument);
}

TEST(AdaptiveWeight, InUnitIntervalProperty) {
  Sampler rng(RngStream(5));
  for (int t = 0; t < 1000; ++t) {
    const std::size_t c = 2 + rng.below(6);
    const double w = adaptive_weight(random_simplex_row(rng, c), random_simplex_row(rng, c),
                                     random_simplex_row(rng, c), rng.uniform());
    EXPECT_GE(w, 0.0);
    EXPECT_LE(w, 1.0);
  }
}

TEST(AWRConfig, ValidateRanges) {
  AWRConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.alpha, 0.2);
  EXPECT_EQ(c.gamma, 4.0);
  EXPECT_EQ(c.beta, 0.5);
  EXPECT_EQ(c.tau, 1.2);
  EXPECT_TRUE(c.detach_weight);
  EXPECT_FALSE(c.detach_clean_in_kl);
  for (auto bad : {AWRConfig{.alpha = 1.0}, AWRConfig{.lambda = -1}, AWRConfig{.gamma = -1}, AWRConfig{.beta = 1.5},
                   AWRConfig{.tau = 0.0}}) {
    EXPECT_THROW(bad.validate(), std::invalid_argument);
  }
}

// ---- risks -------------------------------------------------------------------

TEST(SrstAwrRisk, ZeroLambdaGammaIsLabeledLsCe) {
  Sampler rng(RngStream(6));
  for (int t = 0; t < 50; ++t) {
    RandomBatch b = random_batch(rng, static_cast<std::uint64_t>(t));
    AWRConfig cfg = random_awr(rng);
    cfg.lambda = 0.0;
    cfg.gamma = 0.0;
    const Tensor z = forward_logits(b.net, b.params, b.labeled.x);
    double expect = 0.0;
    for (std::size_t i = 0; i < b.labeled.y.size(); ++i) expect += ls_cross_entropy(z.row(i), b.labeled.y[i], cfg.alpha);
    expect /= static_cast<double>(b.labeled.y.size());
    EXPECT_NEAR(srst_awr_risk(b.net, b.params, b.labeled, b.unlabeled, b.adv, b.teacher, cfg), expect, 1e-12);
  }
}

TEST(SrstAwrRisk, NoAttackMeansNoRegularizer) {
  Sampler rng(RngStream(7));
  for (int t = 0; t < 50; ++t) {
    RandomBatch b = random_batch(rng, static_cast<std::uint64_t>(t));
    AWRConfig cfg = random_awr(rng);
    AWRConfig no_reg = cfg;
    no_reg.lambda = 0.0;
    EXPECT_EQ(srst_awr_risk(b.net, b.params, b.labeled, b.unlabeled, b.unlabeled, b.teacher, cfg),
              srst_awr_risk(b.net, b.params, b.labeled, b.unlabeled, b.unlabeled, b.teacher, no_reg));
  }
}

TEST(SrstAwrRisk, HandComposedSingleExample) {
  // logits equal the inputs through the passthrough net
  const ScoreNet net = passthrough_net(2);
  const ParamSet p = passthrough_params(2);
  const LabeledBatch lb{mat({{2.0, 0.0}}), {0}};
  const Tensor u = mat({{1.0, 0.5}}), adv = mat({{0.2, 0.9}});
  TeacherOutputs t;
  t.probs = mat({{0.7, 0.3}});
  t.soft = mat({{0.65, 0.35}});
  t.hard = {0};
  AWRConfig cfg;  // alpha 0.2, lambda 20, gamma 4, beta 0.5, tau 1.2

  const double sup = 0.9 * std::log1p(std::exp(-2.0)) + 0.1 * std::log1p(std::exp(2.0));
  auto sm = [](double a, double b) {
    const double e = std::exp(a - b);
    return std::vector<double>{e / (1 + e), 1 / (1 + e)};
  };
  const auto ps_clean_tau = sm(1.0 / 1.2, 0.5 / 1.2);
  const double kd = kl_div(std::vector<double>{0.65, 0.35}, ps_clean_tau);
  const auto pc = sm(1.0, 0.5), pa = sm(0.2, 0.9);
  const double w = adaptive_weight(std::vector<double>{0.7, 0.3}, pc, pa, 0.5);
  const double reg = kl_div(pc, pa) * w;
  EXPECT_NEAR(srst_awr_risk(net, p, lb, u, adv, t, cfg), sup + 4.0 * kd + 20.0 * reg, 1e-12);
}

TEST(SrstAwrRisk, MatchesIndependentOracleOnRandomBatches) {
  Sampler rng(RngStream(8));
  for (int t = 0; t < 100; ++t) {
    RandomBatch b = random_batch(rng, static_cast<std::uint64_t>(t));
    AWRConfig cfg = random_awr(rng);
    b.teacher = random_teacher(rng, b.unlabeled.rows(), b.net.num_classes(), cfg.tau);
    const double got = srst_awr_risk(b.net, b.params, b.labeled, b.unlabeled, b.adv, b.teacher, cfg);
    const double want = ref_srst_awr(b.net, b.params, b.labeled, b.unlabeled, b.adv, b.teacher, cfg);
    EXPECT_NEAR(got, want, 1e-10 * std::max(1.0, std::abs(want))) << "trial " << t;
  }
}

TEST(SrstAwrRisk, UniformWeightingIsSrstTrades) {
  Sampler rng(RngStream(9));
  for (int t = 0; t < 100; ++t) {
    RandomBatch b = random_batch(rng, static_cast<std::uint64_t>(t));
    AWRConfig cfg = random_awr(rng);
    cfg.weighting = Weighting::uniform;
    const double got = srst_awr_risk(b.net, b.params, b.labeled, b.unlabeled, b.adv, b.teacher, cfg);
    const std::vector<double> ones(b.unlabeled.rows(), 1.0);
    AWRConfig adaptive = cfg;
    adaptive.weighting = Weighting::adaptive;
    const double want = ref_srst_awr(b.net, b.params, b.labeled, b.unlabeled, b.adv, b.teacher, adaptive, ones);
    EXPECT_NEAR(got, want, 1e-10 * std::max(1.0, std::abs(want)));
  }
}

TEST(SrstAwrRisk, NonnegativeFiniteAndMonotoneInLambdaGamma) {
  Sampler rng(RngStream(10));
  for (int t = 0; t < 100; ++t) {
    RandomBatch b = random_batch(rng, static_cast<std::uint64_t>(t));
    AWRConfig cfg = random_awr(rng);
    auto risk = [&](const AWRConfig& c) {
      return srst_awr_risk(b.net, b.params, b.labeled, b.unlabeled, b.adv, b.teacher, c);
    };
    const double base = risk(cfg);
    EXPECT_GE(base, 0.0);
    EXPECT_TRUE(std::isfinite(base));
    AWRConfig more_lambda = cfg, more_gamma = cfg;
    more_lambda.lambda += rng.uniform(0.0, 5.0);
    more_gamma.gamma += rng.uniform(0.0, 5.0);
    EXPECT_GE(risk(more_lambda), base);
    EXPECT_GE(risk(more_gamma), base);
  }
}

TEST(SrstAwrRisk, RejectsMisalignedBatches) {
  Sampler rng(RngStream(11));
  RandomBatch b = random_batch(rng, 1);
  const Tensor short_adv = random_inputs(rng, b.unlabeled.rows() + 1, b.net.input_width());
  EXPECT_THROW(srst_awr_risk(b.net, b.params, b.labeled, b.unlabeled, short_adv, b.teacher, AWRConfig{}),
               std::invalid_argument);
  TeacherOutputs wrong = random_teacher(rng, b.unlabeled.rows() + 1, b.net.num_classes(), 1.2);
  EXPECT_THROW(srst_awr_risk(b.net, b.params, b.labeled, b.unlabeled, b.adv, wrong, AWRConfig{}),
               std::invalid_argument);
}

// Gradient of the risk against the oracle. A detached weight is a constant to
// the finite-difference probe, so the probe freezes w at the base parameters.
TEST(SrstAwrRisk, GradientMatchesFiniteDifferences) {
  Sampler rng(RngStream(12));
  for (int t = 0; t < 100; ++t) {
    RandomBatch b = random_batch(rng, static_cast<std::uint64_t>(500 + t));
    AWRConfig cfg = random_awr(rng);
    cfg.detach_weight = (t % 2 == 0);
    const ParamSet g = grad_params(b.net, b.params, [&](const BoundNet& f) {
      return srst_awr_risk(f, b.labeled, b.unlabeled, b.adv, b.teacher, cfg);
    });
    std::optional<std::vector<double>> frozen;
    if (cfg.detach_weight) frozen = ref_weights(b.net, b.params, b.unlabeled, b.adv, b.teacher, cfg.beta);
    const ParamSet n = fd_params(b.params, [&](const ParamSet& q) {
      return ref_srst_awr(b.net, q, b.labeled, b.unlabeled, b.adv, b.teacher, cfg, frozen);
    });
    EXPECT_LT(relative_error(flatten(g), flatten(n)), 1e-5)
        << "trial " << t << " detach_weight " << cfg.detach_weight;
  }
}

TEST(SrstAwrRisk, DetachFlagsChangeGradientsNotValues) {
  Sampler rng(RngStream(13));
  RandomBatch b = random_batch(rng, 7);
  AWRConfig cfg;
  auto vg = [&](const AWRConfig& c) {
    return value_and_grad_params(b.net, b.params, [&](const BoundNet& f) {
      return srst_awr_risk(f, b.labeled, b.unlabeled, b.adv, b.teacher, c);
    });
  };
  AWRConfig through_w = cfg, detach_clean = cfg;
  through_w.detach_weight = false;
  detach_clean.detach_clean_in_kl = true;
  const ValueAndGrad base = vg(cfg), a = vg(through_w), c = vg(detach_clean);
  EXPECT_EQ(base.value, a.value);
  EXPECT_EQ(base.value, c.value);
  EXPECT_FALSE(base.grad == a.grad);
  EXPECT_FALSE(base.grad == c.grad);
}

TEST(TradesRisk, ExamplesAndOracle) {
  Sampler rng(RngStream(14));
  for (int t = 0; t < 50; ++t) {
    RandomBatch b = random_batch(rng, static_cast<std::uint64_t>(t));
    const double lambda = rng.uniform(0.0, 10.0);
    const Tensor z = forward_logits(b.net, b.params, b.labeled.x);
    double ce = 0.0;
    for (std::size_t i = 0; i < b.labeled.y.size(); ++i) ce += cross_entropy(z.row(i), b.labeled.y[i]);
    ce /= static_cast<double>(b.labeled.y.size());
    const Tensor adv = perturb(rng, b.labeled.x, 0.2);
    EXPECT_NEAR(trades_risk(b.net, b.params, b.labeled, adv, 0.0), ce, 1e-12);
    EXPECT_NEAR(trades_risk(b.net, b.params, b.labeled, b.labeled.x, lambda), ce, 1e-12);
    EXPECT_NEAR(trades_risk(b.net, b.params, b.labeled, adv, lambda),
                ref_trades(b.net, b.params, b.labeled, adv, lambda), 1e-10);
  }
}

TEST(TradesRisk, HandSingleExample) {
  const ScoreNet net = passthrough_net(2);
  const ParamSet p = passthrough_params(2);
  const LabeledBatch b{mat({{1.0, 0.0}}), {1}};
  const Tensor adv = mat({{0.5, 0.5}});
  const double ce = std::log1p(std::exp(1.0));
  const double p0 = 1.0 / (1.0 + std::exp(-1.0));
  const double kl = p0 * std::log(p0 / 0.5) + (1 - p0) * std::log((1 - p0) / 0.5);
  EXPECT_NEAR(trades_risk(net, p, b, adv, 3.0), ce + 3.0 * kl, 1e-12);
}

TEST(UatRisk, ExamplesAndOracle) {
  Sampler rng(RngStream(15));
  for (int t = 0; t < 50; ++t) {
    RandomBatch b = random_batch(rng, static_cast<std::uint64_t>(t));
    const std::size_t n = b.labeled.y.size();
    const double lambda = rng.uniform(0.0, 10.0);
    const Tensor z = forward_logits(b.net, b.params, b.labeled.x);
    double ce = 0.0;
    for (std::size_t i = 0; i < n; ++i) ce += cross_entropy(z.row(i), b.labeled.y[i]);
    ce /= static_cast<double>(n);
    Tensor ref = Tensor::zeros({n, b.net.num_classes()});
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = random_simplex_row(rng, b.net.num_classes());
      std::copy(r.begin(), r.end(), ref.row(i).begin());
    }
    EXPECT_NEAR(uat_risk(b.net, b.params, b.labeled, b.labeled.x, 0.0, ref), ce, 1e-12);

    const Tensor adv = perturb(rng, b.labeled.x, 0.2);
    const Tensor self_ref = softmax(forward_logits(b.net, b.params, adv));
    double ce_adv = 0.0;
    const Tensor za = forward_logits(b.net, b.params, adv);
    for (std::size_t i = 0; i < n; ++i) ce_adv += cross_entropy(za.row(i), b.labeled.y[i]);
    EXPECT_NEAR(uat_risk(b.net, b.params, b.labeled, adv, lambda, self_ref), ce_adv / static_cast<double>(n), 1e-10);
    EXPECT_NEAR(uat_risk(b.net, b.params, b.labeled, adv, lambda, ref),
                ref_uat(b.net, b.params, b.labeled, adv, lambda, ref), 1e-10);
  }
}

TEST(UatRisk, HandSingleExample) {
  const ScoreNet net = passthrough_net(2);
  const ParamSet p = passthrough_params(2);
  const LabeledBatch b{mat({{0.0, 0.0}}), {0}};
  const Tensor adv = mat({{1.0, 0.0}});
  const Tensor ref = mat({{0.25, 0.75}});
  const double pa0 = 1.0 / (1.0 + std::exp(-1.0));
  const double ce = -std::log(pa0);
  const double kl = 0.25 * std::log(0.25 / pa0) + 0.75 * std::log(0.75 / (1 - pa0));
  EXPECT_NEAR(uat_risk(net, p, b, adv, 2.0, ref), ce + 2.0 * kl, 1e-12);
}

TEST(BaselineRisks, GradientsMatchFiniteDifferences) {
  Sampler rng(RngStream(16));
  for (int t = 0; t < 100; ++t) {
    RandomBatch b = random_batch(rng, static_cast<std::uint64_t>(900 + t));
    const double lambda = rng.uniform(0.0, 8.0);
    const Tensor adv = perturb(rng, b.labeled.x, 0.2);
    const Tensor ref = softmax(forward_logits(b.net, random_params(rng, b.net, 77), b.labeled.x));
    const ParamSet gt = grad_params(b.net, b.params, [&](const BoundNet& f) { return trades_risk(f, b.labeled, adv, lambda); });
    const ParamSet nt = fd_params(b.params, [&](const ParamSet& q) { return ref_trades(b.net, q, b.labeled, adv, lambda); });
    EXPECT_LT(relative_error(flatten(gt), flatten(nt)), 1e-5) << "trades trial " << t;
    const ParamSet gu = grad_params(b.net, b.params, [&](const BoundNet& f) { return uat_risk(f, b.labeled, adv, lambda, ref); });
    const ParamSet nu = fd_params(b.params, [&](const ParamSet& q) { return ref_uat(b.net, q, b.labeled, adv, lambda, ref); });
    EXPECT_LT(relative_error(flatten(gu), flatten(nu)), 1e-5) << "uat trial " << t;
  }
}

TEST(OneHot, RowsAreIndicators) {
  const std::vector<int> y{2, 0};
  const Tensor h = one_hot(y, 3);
  EXPECT_EQ(h, mat({{0, 0, 1}, {1, 0, 0}}));
}

TEST(TeacherOutputs, ValidateRejectsInconsistentRows) {
  TeacherOutputs t{mat({{0.5, 0.5}}), mat({{0.8, 0.2}}), {0}};
  EXPECT_NO_THROW(t.validate(1, 2));
  EXPECT_THROW(t.validate(2, 2), std::invalid_argument);
  t.hard = {1};
  EXPECT_THROW(t.validate(1, 2), std::invalid_argument);
}

// The building blocks on their own, differentiated with respect to logits.
TEST(LossBlocks, GradientsMatchFiniteDifferences) {
  Sampler rng(RngStream(21));
  for (int t = 0; t < 100; ++t) {
    const std::size_t rows = 1 + rng.below(5), classes = 2 + rng.below(4);
    Tensor zp = Tensor::zeros({rows, classes}), zq = Tensor::zeros({rows, classes});
    for (double& v : zp.values()) v = rng.uniform(-4.0, 4.0);
    for (double& v : zq.values()) v = rng.uniform(-4.0, 4.0);
    const std::vector<int> y = random_labels(rng, rows, classes);
    const double alpha = rng.uniform(0.0, 0.5);

    Tape tape;
    const Var z = tape.leaf(zp);
    tape.backward(ad::mean(ad::ls_cross_entropy_rows(z, y, alpha)));
    const Tensor fd_ce = fd_input(zp, [&](const Tensor& x) {
      double s = 0.0;
      for (std::size_t i = 0; i < rows; ++i) s += ref_ls_ce(x.row(i), y[i], alpha);
      return s / static_cast<double>(rows);
    });
    EXPECT_LT(relative_error(tape.grad(z).values(), fd_ce.values()), 1e-6) << "ls-ce trial " << t;

    Tape kt;
    const Var a = kt.leaf(zp), b = kt.leaf(zq);
    const Var log_p = ad::log_softmax(a);
    kt.backward(ad::mean(ad::kl_rows(ad::exp(log_p), log_p, b)));
    auto kl_mean = [&](const Tensor& p_logits, const Tensor& q_logits) {
      double s = 0.0;
      for (std::size_t i = 0; i < rows; ++i) s += ref_kl(ref_probs(p_logits.row(i)), q_logits.row(i));
      return s / static_cast<double>(rows);
    };
    const Tensor fd_a = fd_input(zp, [&](const Tensor& x) { return kl_mean(x, zq); });
    const Tensor fd_b = fd_input(zq, [&](const Tensor& x) { return kl_mean(zp, x); });
    EXPECT_LT(relative_error(kt.grad(a).values(), fd_a.values()), 1e-6) << "kl p trial " << t;
    EXPECT_LT(relative_error(kt.grad(b).values(), fd_b.values()), 1e-6) << "kl q trial " << t;
  }
}
