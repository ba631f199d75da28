#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "batsrelay/channel.hpp"
#include "batsrelay/recoding.hpp"

namespace bats {

enum class IdleMethod { markov, monte_carlo };

/// How D is computed at each operating point.
struct IdleOptions {
  IdleMethod method = IdleMethod::markov;
  std::int64_t trials = 100000;
  std::uint64_t seed = 0;
};

/// Markov when omega is an integer, Monte Carlo otherwise.
IdleOptions default_idle_options(const ChannelSpec& spec);

/// Time efficiency at one t_avg.
struct EfficiencyPoint {
  double t_avg = 0.0;
  std::vector<double> t;
  double sink_rank = 0.0;  // E
  int batches = 1;         // B = ceil(F / E)
  double total_idle = 0.0; // D
  double idle_std_error = 0.0;
  double efficiency = 0.0; // min{E / (t_avg + D/B), E / (omega M)}

  double idle_per_batch() const { return total_idle / batches; }
};

/// t_avg range over which ceil(F/E) stays at one value of B.
struct Segment {
  int batches = 1;
  EfficiencyPoint left;
  EfficiencyPoint right;
};

struct OptimizationResult {
  EfficiencyPoint best;
  std::vector<Segment> segments;
  std::vector<int> skipped_batches;  // B values no allocation can produce
  double upper_bound = 0.0;
  std::pair<double, double> search_interval{0.0, 0.0};
};

struct OptimizerOptions {
  double grid_step = 0.01;
  double epsilon_edge = 1e-6;
  IdleOptions idle;
};

/// Smallest B with B * E >= F.
int batches_needed(std::int64_t F, double sink_rank);

/// E / (omega M): efficiency when the source is the bottleneck.
double efficiency_e1(double sink_rank, const ChannelSpec& spec);

/// E / (t_avg + D / B): efficiency when the relay is the bottleneck.
double efficiency_e2(double sink_rank, double t_avg, double total_idle, int batches);

/// Evaluate D and f for an allocation already produced by the greedy solver.
EfficiencyPoint evaluate_point(std::int64_t F, const RankEnvironment& env, const RecodingScheme& scheme,
                               const IdleOptions& idle);

/// End-points of the segment for B batches, by the embedded greedy walk:
/// left where E first reaches F/B, right epsilon (in t_avg mass) before E
/// reaches F/(B-1). Throws InfeasibleError if F/B is out of reach.
Segment segment_endpoints(std::int64_t F, const RankEnvironment& env, int batches,
                          const OptimizerOptions& options);

/// Every grid point t = lo + k*step <= hi, allocations built incrementally.
/// D is evaluated in parallel across points.
std::vector<EfficiencyPoint> sweep(std::int64_t F, const RankEnvironment& env, double lo, double hi, double step,
                                   const IdleOptions& idle);

/// Single-threaded reference for sweep.
std::vector<EfficiencyPoint> sweep_serial(std::int64_t F, const RankEnvironment& env, double lo, double hi,
                                          double step, const IdleOptions& idle);

/// Best point of sweep(); first one on ties.
EfficiencyPoint grid_search(std::int64_t F, const RankEnvironment& env, double lo, double hi, double step,
                            const IdleOptions& idle);

/// Segment scan, then a grid search over the two segments around the best
/// end-point.
OptimizationResult optimize(std::int64_t F, const RankEnvironment& env, const OptimizerOptions& options);

/// max over t_avg of E*(t_avg) / max{omega M, t_avg}: the efficiency limit as
/// D/B -> 0. Exact, from the breakpoints of the piecewise-linear E*.
double solve_upper_bound(const RankEnvironment& env);

}  // namespace bats
