#include <benchmark/benchmark.h>

#include "srst/attacks.hpp"
#include "srst/losses.hpp"
#include "srst/oracle.hpp"
#include "srst/teacher.hpp"

using namespace srst;

namespace {

struct Fixture {
  ScoreNet net{{2, 32, 32, 2}, Activation::relu};
  ParamSet params;
  Tensor x;
  std::vector<int> y;
  TeacherOutputs teacher;

  explicit Fixture(std::size_t rows) {
    params = init_params(net, RngStream(1));
    Sampler rng(RngStream(2));
    x = Tensor::zeros({rows, 2});
    for (double& v : x.values()) v = rng.uniform();
    y.resize(rows);
    for (int& v : y) v = static_cast<int>(rng.below(2));
    const Tensor z = forward_logits(net, init_params(net, RngStream(3)), x);
    const Tensor probs = softmax(z);
    teacher = {temp_softmax(z, 1.2), probs, predict(probs)};
  }
};

void BM_ForwardLogits(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(forward_logits(f.net, f.params, f.x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardLogits)->Arg(64)->Arg(256);

void BM_SrstAwrGradient(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)));
  const LabeledBatch labeled{f.x, f.y};
  const Tensor adv = project_linf(f.x, f.x, 0.1, {});
  const AWRConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(grad_params(f.net, f.params, [&](const BoundNet& b) {
      return srst_awr_risk(b, labeled, f.x, adv, f.teacher, cfg);
    }));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SrstAwrGradient)->Arg(64)->Arg(128);

void BM_Pgd(benchmark::State& state) {
  const Fixture f(128);
  const AttackConfig cfg = AttackConfig::pgd(0.1, static_cast<int>(state.range(0)));
  const AttackTarget target = AttackTarget::of_labels(f.y);
  for (auto _ : state) benchmark::DoNotOptimize(pgd(f.net, f.params, f.x, target, cfg, RngStream(4)));
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_Pgd)->Arg(10)->Arg(20);

void BM_RandomSearch(benchmark::State& state) {
  const Fixture f(128);
  for (auto _ : state) {
    benchmark::DoNotOptimize(random_search_attack(f.net, f.params, f.x, f.y, 0.1, static_cast<int>(state.range(0)),
                                                  RngStream(5)));
  }
}
BENCHMARK(BM_RandomSearch)->Arg(200);

void BM_ExactRisks(benchmark::State& state) {
  const auto inst = oracle::random_instance(7, static_cast<std::size_t>(state.range(0)), 4, 0.3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(oracle::exact_risks(inst));
    benchmark::DoNotOptimize(oracle::lemma_a1_check(inst));
  }
}
BENCHMARK(BM_ExactRisks)->Arg(12)->Arg(64);

void BM_OracleSweep(benchmark::State& state) {
  for (auto _ : state) {
    for (std::uint64_t s = 0; s < 1000; ++s) benchmark::DoNotOptimize(oracle::exact_risks(oracle::sweep_instance(s)));
  }
}
BENCHMARK(BM_OracleSweep)->Unit(benchmark::kMillisecond);

void BM_SupervisedTeacherEpoch(benchmark::State& state) {
  const Fixture f(256);
  OptimizerConfig opt;
  opt.epochs = 1;
  opt.batch_size = 64;
  const Dataset data{f.x, f.y, 2};
  for (auto _ : state) benchmark::DoNotOptimize(train_supervised_teacher(data, f.net, opt, 6));
}
BENCHMARK(BM_SupervisedTeacherEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
