#include "batsrelay/simulator.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <exception>
#include <string>

#include "batsrelay/errors.hpp"

namespace bats {

namespace {

constexpr int kMaxSimulatedBatchSize = 64;

std::uint64_t draw_mask(int m, double loss, Rng& rng) {
  std::uint64_t mask = 0;
  for (int i = 0; i < m; ++i) {
    if (!rng.bernoulli(loss)) mask |= std::uint64_t{1} << i;
  }
  return mask;
}

int guard_batches(std::int64_t F, const RecodingScheme& scheme) {
  if (!(scheme.sink_rank_mean > 0.0)) {
    throw NonTerminationError("scheme has zero expected sink rank; transfer never decodes");
  }
  return 10 * batches_needed(F, scheme.sink_rank_mean);
}

EfficiencySummary summarize(const RankEnvironment& env, const RecodingScheme& scheme, std::int64_t F,
                            std::vector<TransferReport> reports, bool keep_traces) {
  EfficiencySummary s;
  s.runs = static_cast<int>(reports.size());
  double sum = 0.0;
  double batches = 0.0;
  for (const auto& r : reports) {
    sum += r.empirical_efficiency;
    batches += static_cast<double>(r.traces.size());
  }
  s.mean = sum / s.runs;
  s.mean_batches = batches / s.runs;
  double ss = 0.0;
  for (const auto& r : reports) ss += (r.empirical_efficiency - s.mean) * (r.empirical_efficiency - s.mean);
  s.std_error = s.runs > 1 ? std::sqrt(ss / (s.runs - 1) / s.runs) : 0.0;

  IdleOptions idle = default_idle_options(env.spec());
  idle.seed = 0x5eed;
  s.analytic_point = evaluate_point(F, env, scheme, idle);
  s.analytic = s.analytic_point.efficiency;
  if (!keep_traces) {
    for (auto& r : reports) {
      r.traces.clear();
      r.traces.shrink_to_fit();
    }
  }
  s.reports = std::move(reports);
  return s;
}

}  // namespace

RelaySimulator::RelaySimulator(const ChannelSpec& spec, const RecodingScheme& scheme, std::uint64_t seed)
    : spec_(spec), t_(scheme.t), rng_(seed) {
  spec_.validate();
  if (spec_.batch_size > kMaxSimulatedBatchSize) {
    throw DomainError("simulator supports batch sizes up to 64");
  }
  if (t_.size() != static_cast<std::size_t>(spec_.batch_size) + 1) {
    throw DomainError("recoding scheme length must be M + 1");
  }
  for (double v : t_) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("recoding counts must be finite and >= 0");
  }
}

BatchTrace RelaySimulator::next_batch() {
  const int m = spec_.batch_size;
  BatchTrace tr;
  tr.batch_index = static_cast<int>(traces_.size());
  tr.relay_received = draw_mask(m, spec_.p_sr, rng_);
  tr.sink_overheard = draw_mask(m, spec_.p_sd, rng_);
  tr.innovative_rank = std::popcount(tr.relay_received & ~tr.sink_overheard);

  const double target = t_[static_cast<std::size_t>(tr.innovative_rank)];
  const double whole = std::floor(target);
  tr.recoded_sent = static_cast<int>(whole) + (rng_.bernoulli(target - whole) ? 1 : 0);
  for (int i = 0; i < tr.recoded_sent; ++i) {
    if (!rng_.bernoulli(spec_.p_rd)) ++tr.recoded_received;
  }
  tr.sink_rank = std::popcount(tr.sink_overheard) + std::min(tr.recoded_received, tr.innovative_rank);

  // Recoding starts once the source has finished this batch.
  const double source_done = (tr.batch_index + 1) * spec_.source_batch_time();
  tr.relay_start_time = std::max(relay_free_, source_done);
  tr.idle_before = tr.relay_start_time - relay_free_;
  tr.relay_finish_time = tr.relay_start_time + tr.recoded_sent;
  relay_free_ = tr.relay_finish_time;
  total_idle_ += tr.idle_before;
  cumulative_ += tr.sink_rank;
  traces_.push_back(tr);
  return tr;
}

TransferReport RelaySimulator::report(double delivered) const {
  TransferReport r;
  r.traces = traces_;
  r.total_idle = total_idle_;
  r.finish_time_relay = relay_free_;
  r.finish_time_source = batches() * spec_.source_batch_time();
  r.decoding_time = std::max(r.finish_time_relay, r.finish_time_source);
  r.cumulative_sink_rank = cumulative_;
  r.empirical_efficiency = r.decoding_time > 0.0 ? delivered / r.decoding_time : 0.0;
  return r;
}

TransferReport simulate_transfer(const ChannelSpec& spec, const RecodingScheme& scheme, int batches,
                                 std::uint64_t seed) {
  if (batches < 1) throw DomainError("number of batches must be >= 1");
  RelaySimulator sim(spec, scheme, seed);
  for (int b = 0; b < batches; ++b) sim.next_batch();
  return sim.report(static_cast<double>(sim.cumulative_sink_rank()));
}

TransferReport simulate_until_decoded(const ChannelSpec& spec, const RecodingScheme& scheme, std::int64_t F,
                                      int max_batches, std::uint64_t seed) {
  if (F < 1) throw DomainError("F must be >= 1");
  RelaySimulator sim(spec, scheme, seed);
  while (sim.cumulative_sink_rank() < F) {
    if (sim.batches() >= max_batches) {
      throw NonTerminationError("transfer did not decode within " + std::to_string(max_batches) + " batches");
    }
    sim.next_batch();
  }
  return sim.report(static_cast<double>(F));
}

EfficiencySummary empirical_efficiency_batch(const RankEnvironment& env, const RecodingScheme& scheme,
                                             std::int64_t F, int runs, std::uint64_t seed, bool keep_traces) {
  if (runs < 1) throw DomainError("runs must be >= 1");
  const int max_batches = guard_batches(F, scheme);
  std::vector<TransferReport> reports(static_cast<std::size_t>(runs));
  std::exception_ptr error;
#pragma omp parallel for schedule(dynamic)
  for (int run = 0; run < runs; ++run) {
    try {
      reports[static_cast<std::size_t>(run)] = simulate_until_decoded(
          env.spec(), scheme, F, max_batches, derive_seed(seed, static_cast<std::uint64_t>(run)));
    } catch (...) {
#pragma omp critical(bats_simulator_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return summarize(env, scheme, F, std::move(reports), keep_traces);
}

EfficiencySummary empirical_efficiency_batch_serial(const RankEnvironment& env, const RecodingScheme& scheme,
                                                    std::int64_t F, int runs, std::uint64_t seed,
                                                    bool keep_traces) {
  if (runs < 1) throw DomainError("runs must be >= 1");
  const int max_batches = guard_batches(F, scheme);
  std::vector<TransferReport> reports;
  reports.reserve(static_cast<std::size_t>(runs));
  for (int run = 0; run < runs; ++run) {
    reports.push_back(simulate_until_decoded(env.spec(), scheme, F, max_batches,
                                             derive_seed(seed, static_cast<std::uint64_t>(run))));
  }
  return summarize(env, scheme, F, std::move(reports), keep_traces);
}

}  // namespace bats
