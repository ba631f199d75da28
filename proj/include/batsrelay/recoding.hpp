#pragma once

#include <span>
#include <vector>

#include "batsrelay/channel.hpp"

namespace bats {

/// Recoded-packet counts per innovative rank. The fractional part of t_r is
/// the probability of sending one extra packet.
struct RecodingScheme {
  std::vector<double> t;
  double t_avg = 0.0;
  double sink_rank_mean = 0.0;  // E = R + sum_r h_r E(r, t_r)
};

/// Incremental greedy solver for the adaptive recoding problem
///
///   max R + sum_r h_r E(r, t_r)  s.t.  h . t = t_avg,  t >= 0.
///
/// Mass is handed to the rank with the largest available marginal gain, one
/// packet slot at a time (lowest rank on ties). Because every E(r, .) is
/// concave, stopping at any amount of mass leaves an optimal allocation, so
/// the same state can be advanced along a t_avg sweep.
class GreedyState {
 public:
  explicit GreedyState(const RankEnvironment& env);

  /// Allocate `mass` more units of t_avg.
  void advance(double mass);

  /// Allocate mass until the expected sink rank reaches `target` or the table
  /// saturates. Returns true when the target was reached. On success the
  /// stored rank equals `target` exactly.
  bool advance_to_rank(double target);

  /// Complete the current packet slot; returns false once saturated.
  bool step();

  double t_avg() const { return t_avg_; }
  double sink_rank() const { return sink_rank_; }
  /// max_r Delta(r, floor(t_r)) over ranks with h_r > 0.
  double best_gain() const;
  std::vector<double> allocation() const;
  RecodingScheme scheme() const;

 private:
  struct Choice {
    int rank = -1;
    double gain = 0.0;
  };
  Choice pick() const;
  double capacity(int r) const;
  void fill(int r, double mass, double gain);

  const RankEnvironment* env_;
  std::vector<int> whole_;
  std::vector<double> frac_;
  double t_avg_ = 0.0;
  double sink_rank_;
};

/// Optimal allocation for a given average; t_avg above t_max is clamped.
RecodingScheme solve_recoding(const RankEnvironment& env, double t_avg);

/// Exhaustive grid oracle: best t on {0, step, 2 step, ...}^(M+1) with
/// t_avg - step <= h . t <= t_avg. Test use only.
RecodingScheme brute_force_recoding(const RankEnvironment& env, double t_avg, double grid_step);

/// R + sum_r h_r E(r, t_r).
double sink_rank(const RankEnvironment& env, std::span<const double> t);

}  // namespace bats
