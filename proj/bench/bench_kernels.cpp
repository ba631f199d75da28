// Serial references against the OpenMP kernels. Arg is the worker count.

#include <benchmark/benchmark.h>

#include <omp.h>

#include "batsrelay/channel.hpp"
#include "batsrelay/efficiency.hpp"
#include "batsrelay/idle_time.hpp"
#include "batsrelay/recoding.hpp"
#include "batsrelay/simulator.hpp"

namespace {

using namespace bats;

const ChannelSpec kSpec{8, 1.0, 0.2, 0.2, 0.8};

const RankEnvironment& env() {
  static const RankEnvironment e = build_environment(kSpec);
  return e;
}

SendCountDistribution tbar() {
  const auto s = solve_recoding(env(), 7.03);
  return send_count_distribution(env().innovative_rank(), s.t);
}

IdleOptions mc_options() {
  IdleOptions o;
  o.method = IdleMethod::monte_carlo;
  o.trials = 20000;
  o.seed = 1;
  return o;
}

void BM_IdleMonteCarloSerial(benchmark::State& state) {
  const auto d = tbar();
  for (auto _ : state) benchmark::DoNotOptimize(idle_time_monte_carlo_serial(d, kSpec, 16, 100000, 1));
}
BENCHMARK(BM_IdleMonteCarloSerial)->Unit(benchmark::kMillisecond);

void BM_IdleMonteCarlo(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(0)));
  const auto d = tbar();
  for (auto _ : state) benchmark::DoNotOptimize(idle_time_monte_carlo(d, kSpec, 16, 100000, 1));
}
BENCHMARK(BM_IdleMonteCarlo)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_IdleMarkov(benchmark::State& state) {
  const auto d = tbar();
  for (auto _ : state) benchmark::DoNotOptimize(idle_time_markov(d, kSpec, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_IdleMarkov)->Arg(16)->Arg(78)->Unit(benchmark::kMicrosecond);

void BM_SweepSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(sweep_serial(100, env(), 6.0, 9.0, 0.01, mc_options()));
}
BENCHMARK(BM_SweepSerial)->Unit(benchmark::kMillisecond);

void BM_Sweep(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sweep(100, env(), 6.0, 9.0, 0.01, mc_options()));
}
BENCHMARK(BM_Sweep)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_SimulationBatchSerial(benchmark::State& state) {
  const auto s = solve_recoding(env(), 7.03);
  for (auto _ : state) benchmark::DoNotOptimize(empirical_efficiency_batch_serial(env(), s, 512, 200, 1));
}
BENCHMARK(BM_SimulationBatchSerial)->Unit(benchmark::kMillisecond);

void BM_SimulationBatch(benchmark::State& state) {
  omp_set_num_threads(static_cast<int>(state.range(0)));
  const auto s = solve_recoding(env(), 7.03);
  for (auto _ : state) benchmark::DoNotOptimize(empirical_efficiency_batch(env(), s, 512, 200, 1));
}
BENCHMARK(BM_SimulationBatch)->Arg(1)->Arg(2)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Optimize(benchmark::State& state) {
  const auto e = build_environment(ChannelSpec{static_cast<int>(state.range(0)), 1.0, 0.2, 0.2, 0.8});
  for (auto _ : state) benchmark::DoNotOptimize(optimize(100, e, OptimizerOptions{}));
}
BENCHMARK(BM_Optimize)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
