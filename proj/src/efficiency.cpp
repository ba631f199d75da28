#include "batsrelay/efficiency.hpp"

#include <algorithm>
#include <bit>
#include <climits>
#include <cmath>
#include <exception>
#include <optional>
#include <string>

#include "batsrelay/errors.hpp"
#include "batsrelay/idle_time.hpp"
#include "batsrelay/rng.hpp"

namespace bats {

namespace {

// Keeps a scheme's rank at or above F/B when the target was hit exactly but
// F/B itself rounded down.
void lift_to_batches(RecodingScheme& scheme, std::int64_t F, int batches) {
  while (static_cast<double>(batches) * scheme.sink_rank_mean < static_cast<double>(F)) {
    scheme.sink_rank_mean = std::nextafter(scheme.sink_rank_mean, INFINITY);
  }
}

std::vector<RecodingScheme> grid_schemes(const RankEnvironment& env, double lo, double hi, double step) {
  if (!(lo >= 0.0) || !(hi >= lo)) throw DomainError("t_avg interval must satisfy 0 <= lo <= hi");
  if (hi > env.t_max()) throw DomainError("t_avg interval exceeds t_max");
  if (!(step > 0.0)) throw DomainError("grid step must be > 0");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<RecodingScheme> out;
  out.reserve(n);
  GreedyState state(env);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = lo + static_cast<double>(k) * step;
    if (t > state.t_avg()) state.advance(t - state.t_avg());
    RecodingScheme s = state.scheme();
    s.t_avg = t;
    out.push_back(std::move(s));
  }
  return out;
}

template <typename Body>
void parallel_for(std::size_t n, Body body) {
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      body(i);
    } catch (...) {
#pragma omp critical(bats_efficiency_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

IdleOptions default_idle_options(const ChannelSpec& spec) {
  IdleOptions o;
  o.method = spec.omega_is_integer() ? IdleMethod::markov : IdleMethod::monte_carlo;
  return o;
}

int batches_needed(std::int64_t F, double sink_rank) {
  if (F < 1) throw DomainError("F must be >= 1");
  if (!(sink_rank > 0.0)) throw InfeasibleError("expected sink rank is zero; no number of batches decodes");
  const double ratio = std::ceil(static_cast<double>(F) / sink_rank);
  if (ratio > static_cast<double>(INT_MAX) / 2) throw InfeasibleError("required number of batches overflows");
  auto b = static_cast<int>(ratio);
  while (b > 1 && static_cast<double>(b - 1) * sink_rank >= static_cast<double>(F)) --b;
  while (static_cast<double>(b) * sink_rank < static_cast<double>(F)) ++b;
  return std::max(b, 1);
}

double efficiency_e1(double sink_rank, const ChannelSpec& spec) {
  if (!(sink_rank >= 0.0)) throw DomainError("sink rank must be >= 0");
  return sink_rank / spec.source_batch_time();
}

double efficiency_e2(double sink_rank, double t_avg, double total_idle, int batches) {
  if (!(t_avg >= 0.0) || !(total_idle >= 0.0) || batches < 1) {
    throw DomainError("efficiency needs t_avg >= 0, D >= 0, B >= 1");
  }
  const double denom = t_avg + total_idle / batches;
  if (!(denom > 0.0)) throw DomainError("relay time per batch is zero");
  return sink_rank / denom;
}

EfficiencyPoint evaluate_point(std::int64_t F, const RankEnvironment& env, const RecodingScheme& scheme,
                               const IdleOptions& idle) {
  EfficiencyPoint p;
  p.t_avg = scheme.t_avg;
  p.t = scheme.t;
  p.sink_rank = scheme.sink_rank_mean;
  p.batches = batches_needed(F, p.sink_rank);
  const auto tbar = send_count_distribution(env.innovative_rank(), scheme.t);
  if (idle.method == IdleMethod::markov) {
    p.total_idle = idle_time_markov(tbar, env.spec(), p.batches).total_idle;
  } else {
    // Seed keyed on t_avg so a point gets the same D in every search.
    const auto key = std::bit_cast<std::uint64_t>(p.t_avg);
    const auto model = idle_time_monte_carlo(tbar, env.spec(), p.batches, idle.trials, derive_seed(idle.seed, key));
    p.total_idle = model.total_idle;
    p.idle_std_error = model.std_error;
  }
  p.efficiency = std::min(efficiency_e2(p.sink_rank, p.t_avg, p.total_idle, p.batches),
                          efficiency_e1(p.sink_rank, env.spec()));
  return p;
}

Segment segment_endpoints(std::int64_t F, const RankEnvironment& env, int batches,
                          const OptimizerOptions& options) {
  if (F < 1) throw DomainError("F must be >= 1");
  if (batches < 1) throw DomainError("B must be >= 1");
  const double left_target = static_cast<double>(F) / batches;
  const double base = env.overheard_rank();
  if (left_target > env.rank_ceiling()) {
    throw InfeasibleError("B = " + std::to_string(batches) + " needs E = " + std::to_string(left_target) +
                          " above the reachable maximum");
  }
  if (batches > 1 && static_cast<double>(F) / (batches - 1) <= base) {
    throw InfeasibleError("B = " + std::to_string(batches) + " is never required: overheard rank alone suffices");
  }

  GreedyState state(env);
  RecodingScheme left_scheme;
  if (base >= left_target) {
    left_scheme = state.scheme();
  } else {
    if (!state.advance_to_rank(left_target)) {
      throw InfeasibleError("B = " + std::to_string(batches) + " is out of reach of the rank table");
    }
    left_scheme = state.scheme();
    lift_to_batches(left_scheme, F, batches);
  }

  RecodingScheme right_scheme;
  if (batches == 1) {
    while (state.step()) {
    }
    right_scheme = state.scheme();
  } else {
    const double right_target = static_cast<double>(F) / (batches - 1);
    if (!state.advance_to_rank(right_target)) {
      right_scheme = state.scheme();  // saturates inside the segment
    } else {
      const double edge = state.t_avg();
      double eps = options.epsilon_edge;
      for (;;) {
        right_scheme = solve_recoding(env, std::max(edge - eps, left_scheme.t_avg));
        if (right_scheme.t_avg <= left_scheme.t_avg ||
            batches_needed(F, right_scheme.sink_rank_mean) == batches) {
          break;
        }
        eps *= 10.0;
      }
      if (right_scheme.t_avg <= left_scheme.t_avg) right_scheme = left_scheme;
    }
  }

  Segment seg;
  seg.batches = batches;
  seg.left = evaluate_point(F, env, left_scheme, options.idle);
  seg.right = evaluate_point(F, env, right_scheme, options.idle);
  return seg;
}

std::vector<EfficiencyPoint> sweep(std::int64_t F, const RankEnvironment& env, double lo, double hi, double step,
                                   const IdleOptions& idle) {
  const auto schemes = grid_schemes(env, lo, hi, step);
  std::vector<EfficiencyPoint> points(schemes.size());
  parallel_for(schemes.size(), [&](std::size_t i) { points[i] = evaluate_point(F, env, schemes[i], idle); });
  return points;
}

std::vector<EfficiencyPoint> sweep_serial(std::int64_t F, const RankEnvironment& env, double lo, double hi,
                                          double step, const IdleOptions& idle) {
  const auto schemes = grid_schemes(env, lo, hi, step);
  std::vector<EfficiencyPoint> points;
  points.reserve(schemes.size());
  for (const auto& s : schemes) points.push_back(evaluate_point(F, env, s, idle));
  return points;
}

EfficiencyPoint grid_search(std::int64_t F, const RankEnvironment& env, double lo, double hi, double step,
                            const IdleOptions& idle) {
  auto points = sweep(F, env, lo, hi, step, idle);
  std::size_t best = 0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (points[i].efficiency > points[best].efficiency) best = i;
  }
  return std::move(points[best]);
}

OptimizationResult optimize(std::int64_t F, const RankEnvironment& env, const OptimizerOptions& options) {
  if (F < 1) throw DomainError("F must be >= 1");
  if (!(options.grid_step > 0.0)) throw DomainError("grid step must be > 0");
  if (!(options.epsilon_edge > 0.0)) throw DomainError("epsilon must be > 0");

  const double base = env.overheard_rank();
  const int b_min = batches_needed(F, env.rank_ceiling());
  // Largest B worth a segment: the rank after one recoded packet per batch
  // on average. Below that the relay idles almost all the time.
  const double first_packet = solve_recoding(env, std::min(1.0, static_cast<double>(env.t_max()))).sink_rank_mean;
  const int b_max = batches_needed(F, first_packet);

  // Index 0 holds the largest B, i.e. the smallest t_avg.
  const auto count = static_cast<std::size_t>(b_max - b_min + 1);
  std::vector<std::optional<Segment>> slots(count);
  parallel_for(count, [&](std::size_t i) {
    const int b = b_max - static_cast<int>(i);
    try {
      slots[i] = segment_endpoints(F, env, b, options);
    } catch (const InfeasibleError&) {
      // unreachable B, skipped
    }
  });

  OptimizationResult result;
  for (std::size_t i = 0; i < count; ++i) {
    if (slots[i]) {
      result.segments.push_back(std::move(*slots[i]));
    } else {
      result.skipped_batches.push_back(b_max - static_cast<int>(i));
    }
  }
  if (result.segments.empty()) throw InfeasibleError("no feasible number of batches for F = " + std::to_string(F));

  std::size_t best_seg = 0;
  bool best_is_left = true;
  double best_f = -1.0;
  for (std::size_t i = 0; i < result.segments.size(); ++i) {
    const auto& s = result.segments[i];
    if (s.left.efficiency > best_f) {
      best_f = s.left.efficiency;
      best_seg = i;
      best_is_left = true;
    }
    if (s.right.efficiency > best_f) {
      best_f = s.right.efficiency;
      best_seg = i;
      best_is_left = false;
    }
  }

  // The optimum sits in one of the two segments touching the best end-point.
  const auto& segs = result.segments;
  double lo = 0.0;
  double hi = 0.0;
  if (best_is_left) {
    lo = best_seg > 0 ? segs[best_seg - 1].left.t_avg : segs[best_seg].left.t_avg;
    hi = segs[best_seg].right.t_avg;
  } else {
    lo = segs[best_seg].left.t_avg;
    hi = best_seg + 1 < segs.size() ? segs[best_seg + 1].right.t_avg : segs[best_seg].right.t_avg;
  }
  hi = std::min(hi, static_cast<double>(env.t_max()));
  result.search_interval = {lo, hi};

  // Snap the start onto the global step lattice (t_avg = k * step).
  const double step = options.grid_step;
  double start = std::floor(lo / step + 1e-9) * step;
  if (start < 0.0) start = 0.0;
  // E can be zero at t_avg = 0 when nothing is overheard.
  if (base <= 0.0 && start < step) start = step;
  if (start > hi) start = hi;
  result.best = grid_search(F, env, start, hi, step, options.idle);
  result.upper_bound = solve_upper_bound(env);
  return result;
}

double solve_upper_bound(const RankEnvironment& env) {
  const double k = env.spec().source_batch_time();
  GreedyState state(env);
  double prev_t = 0.0;
  double prev_e = state.sink_rank();
  double best = prev_e / k;
  bool crossed = false;
  while (state.step()) {
    const double t = state.t_avg();
    const double e = state.sink_rank();
    if (!crossed && t >= k) {
      // E* is linear between breakpoints; on [0, K] the ratio peaks at K.
      const double ek = prev_e + (k - prev_t) * (e - prev_e) / (t - prev_t);
      best = std::max(best, ek / k);
      crossed = true;
    }
    // On each linear piece beyond K, E/t is monotone: endpoints suffice.
    best = std::max(best, e / std::max(k, t));
    prev_t = t;
    prev_e = e;
  }
  if (!crossed) best = std::max(best, prev_e / k);  // saturated before reaching K
  return best;
}

}  // namespace bats
