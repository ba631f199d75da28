#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "batsrelay/channel.hpp"

namespace bats {

/// Distribution of the number of recoded packets the relay sends for one
/// batch; entry i is the probability of exactly i packets.
struct SendCountDistribution {
  std::vector<double> probability;

  double mean() const;
  int max_count() const { return static_cast<int>(probability.size()) - 1; }
};

/// Expected total relay idling time over a B-batch transfer, including the
/// initial omega*M wait for the first batch.
struct IdleModel {
  ChannelSpec spec;
  SendCountDistribution tbar;
  int batches = 1;
  double total_idle = 0.0;  // D
  double std_error = 0.0;   // 0 for the exact chain

  double idle_per_batch() const { return total_idle / batches; }
};

/// Mixes floor(t_r) and floor(t_r)+1 by the fractional part, weighted by h.
SendCountDistribution send_count_distribution(std::span<const double> h, std::span<const double> t);

/// Slack update between consecutive batches: min(q, 0) + omega*M - sent.
double q_step(double q, int sent, const ChannelSpec& spec);

/// Monte Carlo estimate of D. Trials are split into fixed blocks with seeds
/// derived from (seed, block), so the result is the same for any thread count.
IdleModel idle_time_monte_carlo(const SendCountDistribution& tbar, const ChannelSpec& spec, int batches,
                                std::int64_t trials, std::uint64_t seed);

/// Single-threaded reference for idle_time_monte_carlo; bit-identical output.
IdleModel idle_time_monte_carlo_serial(const SendCountDistribution& tbar, const ChannelSpec& spec,
                                       int batches, std::int64_t trials, std::uint64_t seed);

/// Exact D from the slack Markov chain, summing B-1 transient steps.
/// Requires integer omega.
IdleModel idle_time_markov(const SendCountDistribution& tbar, const ChannelSpec& spec, int batches);

/// Law of the idle time max(Q_b, 0) after gap `gap` (1-based), as a vector
/// over 0..omega*M. Requires integer omega.
std::vector<double> gap_idle_distribution(const SendCountDistribution& tbar, const ChannelSpec& spec,
                                          int gap);

}  // namespace bats
