#pragma once

#include <span>
#include <vector>

namespace bats {

/// Two-hop relay network with an overhearing source-to-sink link.
///
/// Relay transmissions take one time unit, source transmissions take
/// `omega` units. Loss rates are independent per packet.
struct ChannelSpec {
  int batch_size = 8;  // M
  double omega = 1.0;
  double p_sr = 0.2;  // source -> relay
  double p_rd = 0.2;  // relay -> sink
  double p_sd = 0.8;  // source -> sink (overhearing)

  /// Throws DomainError on a violated invariant.
  void validate() const;

  /// Time the source needs for one batch, omega * M.
  double source_batch_time() const { return omega * batch_size; }

  bool omega_is_integer() const;
};

/// Rank statistics of one channel, tabulated up to `t_max` recoded packets
/// per batch. Immutable once built.
class RankEnvironment {
 public:
  RankEnvironment(ChannelSpec spec, int t_max);

  const ChannelSpec& spec() const { return spec_; }
  int batch_size() const { return spec_.batch_size; }
  int t_max() const { return t_max_; }

  /// Innovative rank distribution, indexed by rank 0..M.
  std::span<const double> innovative_rank() const { return h_; }
  double h(int r) const { return h_[static_cast<std::size_t>(r)]; }

  /// Expected sink rank from overheard source packets alone.
  double overheard_rank() const { return overheard_; }

  /// E(r, k) for integer k. Flat beyond t_max.
  double table(int r, int k) const;

  /// Delta(r, k) = E(r, k+1) - E(r, k) up to round-off; nonincreasing in k
  /// exactly. Zero at and beyond t_max.
  double gain(int r, int k) const;

  /// R + sum_r h_r E(r, t_max): the largest sink rank the table can reach.
  double rank_ceiling() const { return ceiling_; }

 private:
  ChannelSpec spec_;
  int t_max_;
  std::vector<double> h_;
  double overheard_;
  std::vector<double> table_;  // (M+1) x (t_max+1), row per rank
  std::vector<double> gain_;   // same layout; exact closed form, not table differences
  double ceiling_;
};

/// h_r = C(M, r) q^r (1-q)^(M-r), q = (1 - p_sr) p_sd: a source packet adds
/// innovative rank iff the relay gets it and the sink does not.
std::vector<double> innovative_rank_distribution(const ChannelSpec& spec);

/// R = M (1 - p_sd).
double overheard_rank_mean(const ChannelSpec& spec);

/// 4M, grown until the largest marginal gain at the cap drops below 1e-12
/// (bounded by 64M).
int default_t_max(const ChannelSpec& spec);

RankEnvironment build_environment(const ChannelSpec& spec, int t_max);
RankEnvironment build_environment(const ChannelSpec& spec);

/// E(r, t) with linear interpolation between integer packet counts.
double expected_rank(const RankEnvironment& env, int r, double t);

/// Delta(r, t); requires t <= t_max - 1.
double marginal_gain(const RankEnvironment& env, int r, int t);

}  // namespace bats
