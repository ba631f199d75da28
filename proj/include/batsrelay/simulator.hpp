#pragma once

#include <cstdint>
#include <vector>

#include "batsrelay/channel.hpp"
#include "batsrelay/efficiency.hpp"
#include "batsrelay/recoding.hpp"
#include "batsrelay/rng.hpp"

namespace bats {

/// What happened to one batch. Bit i of a mask is source packet i.
struct BatchTrace {
  int batch_index = 0;
  std::uint64_t relay_received = 0;
  std::uint64_t sink_overheard = 0;
  int innovative_rank = 0;
  int recoded_sent = 0;
  int recoded_received = 0;
  int sink_rank = 0;
  double relay_start_time = 0.0;
  double relay_finish_time = 0.0;
  double idle_before = 0.0;
};

struct TransferReport {
  std::vector<BatchTrace> traces;
  double total_idle = 0.0;
  double finish_time_relay = 0.0;
  double finish_time_source = 0.0;
  double decoding_time = 0.0;  // max of the two finish times
  std::int64_t cumulative_sink_rank = 0;
  double empirical_efficiency = 0.0;
};

/// Batch-by-batch simulation of source -> relay -> sink with overhearing,
/// under the generic-rank (large field) model. M is limited to 64.
class RelaySimulator {
 public:
  RelaySimulator(const ChannelSpec& spec, const RecodingScheme& scheme, std::uint64_t seed);

  BatchTrace next_batch();

  /// Report over the batches so far; efficiency uses `delivered` packets.
  TransferReport report(double delivered) const;
  std::int64_t cumulative_sink_rank() const { return cumulative_; }
  int batches() const { return static_cast<int>(traces_.size()); }

 private:
  ChannelSpec spec_;
  std::vector<double> t_;
  Rng rng_;
  std::vector<BatchTrace> traces_;
  double relay_free_ = 0.0;
  double total_idle_ = 0.0;
  std::int64_t cumulative_ = 0;
};

/// Exactly B batches; efficiency is cumulative sink rank / decoding time.
TransferReport simulate_transfer(const ChannelSpec& spec, const RecodingScheme& scheme, int batches,
                                 std::uint64_t seed);

/// One run of a decode-until-done transfer: batches until cumulative sink
/// rank >= F. Throws NonTerminationError after `max_batches`.
TransferReport simulate_until_decoded(const ChannelSpec& spec, const RecodingScheme& scheme, std::int64_t F,
                                      int max_batches, std::uint64_t seed);

struct EfficiencySummary {
  int runs = 0;
  double mean = 0.0;
  double std_error = 0.0;
  double mean_batches = 0.0;
  double analytic = 0.0;  // f at the scheme's own E, B = ceil(F/E), exact D when possible
  EfficiencyPoint analytic_point;
  std::vector<TransferReport> reports;  // in run order; traces kept only on request
};

/// Independent decode-until-done runs seeded by (seed, run index), executed
/// in parallel. Output is identical for any worker count.
EfficiencySummary empirical_efficiency_batch(const RankEnvironment& env, const RecodingScheme& scheme,
                                             std::int64_t F, int runs, std::uint64_t seed,
                                             bool keep_traces = false);

/// Single-threaded reference for empirical_efficiency_batch.
EfficiencySummary empirical_efficiency_batch_serial(const RankEnvironment& env, const RecodingScheme& scheme,
                                                    std::int64_t F, int runs, std::uint64_t seed,
                                                    bool keep_traces = false);

}  // namespace bats
