#include "batsrelay/idle_time.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "batsrelay/errors.hpp"
#include "batsrelay/rng.hpp"

namespace bats {

namespace {

constexpr std::int64_t kTrialsPerBlock = 4096;

struct Moments {
  double count = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    count += 1.0;
    const double d = x - mean;
    mean += d / count;
    m2 += d * (x - mean);
  }

  // Chan et al. pairwise merge.
  void merge(const Moments& o) {
    if (o.count == 0.0) return;
    const double n = count + o.count;
    const double d = o.mean - mean;
    mean += d * o.count / n;
    m2 += o.m2 + d * d * count * o.count / n;
    count = n;
  }
};

void check_distribution(const SendCountDistribution& tbar) {
  if (tbar.probability.empty()) throw DomainError("send-count distribution is empty");
  double total = 0.0;
  for (double p : tbar.probability) {
    if (!(p >= 0.0)) throw DomainError("send-count probabilities must be >= 0");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("send-count probabilities must sum to 1");
}

void check_run(const ChannelSpec& spec, int batches) {
  spec.validate();
  if (batches < 1) throw DomainError("number of batches must be >= 1");
}

std::vector<double> cumulative(const SendCountDistribution& tbar) {
  std::vector<double> cdf(tbar.probability.size());
  std::partial_sum(tbar.probability.begin(), tbar.probability.end(), cdf.begin());
  cdf.back() = 1.0;
  return cdf;
}

int sample(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(), static_cast<std::ptrdiff_t>(cdf.size()) - 1));
}

// Idle time (after the initial delay) accumulated by one trial.
double one_trial(const std::vector<double>& cdf, const ChannelSpec& spec, int batches, Rng& rng) {
  double q = spec.source_batch_time();
  double idle = 0.0;
  for (int b = 1; b < batches; ++b) {
    q = q_step(q, sample(cdf, rng), spec);
    idle += std::max(q, 0.0);
  }
  return idle;
}

Moments run_block(const std::vector<double>& cdf, const ChannelSpec& spec, int batches,
                  std::int64_t block, std::int64_t trials, std::uint64_t seed) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(block)));
  const std::int64_t first = block * kTrialsPerBlock;
  const std::int64_t last = std::min(trials, first + kTrialsPerBlock);
  Moments m;
  for (std::int64_t i = first; i < last; ++i) m.add(one_trial(cdf, spec, batches, rng));
  return m;
}

IdleModel finish(const SendCountDistribution& tbar, const ChannelSpec& spec, int batches,
                 const std::vector<Moments>& blocks) {
  Moments all;
  for (const Moments& m : blocks) all.merge(m);
  IdleModel model{spec, tbar, batches, spec.source_batch_time() + all.mean, 0.0};
  if (all.count > 1.0) model.std_error = std::sqrt(all.m2 / (all.count - 1.0) / all.count);
  return model;
}

void check_mc(const SendCountDistribution& tbar, const ChannelSpec& spec, int batches, std::int64_t trials) {
  check_distribution(tbar);
  check_run(spec, batches);
  if (trials < 1) throw DomainError("Monte Carlo needs at least one trial");
}

// Slack values are integers in [floor, K], stored at index K - q.
class SlackChain {
 public:
  SlackChain(const SendCountDistribution& tbar, int source_time, int batches)
      : tbar_(tbar.probability), k_(source_time) {
    // A slack below -K(B-2) cannot climb back above zero within the horizon
    // (each gap adds at most K), so such states are merged without changing
    // any idle contribution.
    const int reach = k_ - tbar.max_count() * std::max(batches - 1, 1);
    floor_ = std::min(0, std::max(reach, -k_ * std::max(batches - 2, 0)));
    dist_.assign(static_cast<std::size_t>(k_ - floor_) + 1, 0.0);
    next_.assign(dist_.size(), 0.0);
    dist_[0] = 1.0;  // start as if fully slack; same row as slack 0
    hi_ = lo_ = 0;
  }

  void step() {
    std::fill(next_.begin(), next_.end(), 0.0);
    // All slack >= 0 shares one successor row (base K).
    double slack_mass = 0.0;
    const std::size_t zero_idx = static_cast<std::size_t>(k_);
    for (std::size_t j = hi_; j <= lo_ && j <= zero_idx; ++j) slack_mass += dist_[j];
    std::size_t new_hi = next_.size();
    std::size_t new_lo = 0;
    auto spread = [&](int base, double mass) {
      if (mass == 0.0) return;
      for (std::size_t i = 0; i < tbar_.size(); ++i) {
        if (tbar_[i] == 0.0) continue;
        const int q = std::max(base - static_cast<int>(i), floor_);
        const auto idx = static_cast<std::size_t>(k_ - q);
        next_[idx] += mass * tbar_[i];
        new_hi = std::min(new_hi, idx);
        new_lo = std::max(new_lo, idx);
      }
    };
    spread(k_, slack_mass);
    for (std::size_t j = std::max(hi_, zero_idx + 1); j <= lo_; ++j) {
      const int q = k_ - static_cast<int>(j);
      spread(q + k_, dist_[j]);
    }
    dist_.swap(next_);
    hi_ = new_hi;
    lo_ = new_lo;
  }

  double expected_idle() const {
    double idle = 0.0;
    for (std::size_t j = hi_; j <= lo_ && j < static_cast<std::size_t>(k_); ++j) {
      idle += static_cast<double>(k_ - static_cast<int>(j)) * dist_[j];
    }
    return idle;
  }

  std::vector<double> idle_law() const {
    std::vector<double> law(static_cast<std::size_t>(k_) + 1, 0.0);
    for (std::size_t j = hi_; j <= lo_; ++j) {
      const int q = k_ - static_cast<int>(j);
      law[static_cast<std::size_t>(std::max(q, 0))] += dist_[j];
    }
    return law;
  }

 private:
  const std::vector<double>& tbar_;
  int k_;
  int floor_;
  std::vector<double> dist_;
  std::vector<double> next_;
  std::size_t hi_;  // smallest occupied index (largest slack)
  std::size_t lo_;  // largest occupied index
};

int integer_source_time(const ChannelSpec& spec) {
  if (!spec.omega_is_integer()) {
    throw UnsupportedOmegaError("exact idle-time chain needs integer omega; use Monte Carlo");
  }
  return static_cast<int>(spec.omega) * spec.batch_size;
}

}  // namespace

double SendCountDistribution::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < probability.size(); ++i) m += static_cast<double>(i) * probability[i];
  return m;
}

SendCountDistribution send_count_distribution(std::span<const double> h, std::span<const double> t) {
  if (h.size() != t.size() || h.empty()) throw DomainError("h and t must have the same nonzero length");
  int top = 0;
  for (std::size_t r = 0; r < t.size(); ++r) {
    if (!(t[r] >= 0.0) || !std::isfinite(t[r])) throw DomainError("allocation entries must be >= 0");
    if (!(h[r] >= 0.0)) throw DomainError("h entries must be >= 0");
    if (h[r] > 0.0) top = std::max(top, static_cast<int>(std::floor(t[r])) + 1);
  }
  if (std::abs(std::accumulate(h.begin(), h.end(), 0.0) - 1.0) > 1e-9) {
    throw DomainError("h must sum to 1");
  }
  SendCountDistribution out;
  out.probability.assign(static_cast<std::size_t>(top) + 1, 0.0);
  for (std::size_t r = 0; r < t.size(); ++r) {
    if (h[r] == 0.0) continue;
    const double whole = std::floor(t[r]);
    const double frac = t[r] - whole;
    const auto i = static_cast<std::size_t>(whole);
    out.probability[i] += h[r] * (1.0 - frac);
    if (frac > 0.0) out.probability[i + 1] += h[r] * frac;
  }
  while (out.probability.size() > 1 && out.probability.back() == 0.0) out.probability.pop_back();
  return out;
}

double q_step(double q, int sent, const ChannelSpec& spec) {
  if (sent < 0) throw DomainError("send count must be >= 0");
  return std::min(q, 0.0) + spec.source_batch_time() - sent;
}

IdleModel idle_time_monte_carlo(const SendCountDistribution& tbar, const ChannelSpec& spec, int batches,
                                std::int64_t trials, std::uint64_t seed) {
  check_mc(tbar, spec, batches, trials);
  const auto cdf = cumulative(tbar);
  const std::int64_t nblocks = (trials + kTrialsPerBlock - 1) / kTrialsPerBlock;
  std::vector<Moments> blocks(static_cast<std::size_t>(nblocks));
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t b = 0; b < nblocks; ++b) {
    blocks[static_cast<std::size_t>(b)] = run_block(cdf, spec, batches, b, trials, seed);
  }
  return finish(tbar, spec, batches, blocks);
}

IdleModel idle_time_monte_carlo_serial(const SendCountDistribution& tbar, const ChannelSpec& spec,
                                       int batches, std::int64_t trials, std::uint64_t seed) {
  check_mc(tbar, spec, batches, trials);
  const auto cdf = cumulative(tbar);
  const std::int64_t nblocks = (trials + kTrialsPerBlock - 1) / kTrialsPerBlock;
  std::vector<Moments> blocks;
  blocks.reserve(static_cast<std::size_t>(nblocks));
  for (std::int64_t b = 0; b < nblocks; ++b) blocks.push_back(run_block(cdf, spec, batches, b, trials, seed));
  return finish(tbar, spec, batches, blocks);
}

IdleModel idle_time_markov(const SendCountDistribution& tbar, const ChannelSpec& spec, int batches) {
  check_distribution(tbar);
  check_run(spec, batches);
  const int k = integer_source_time(spec);
  SlackChain chain(tbar, k, batches);
  double idle = 0.0;
  // No stationary shortcut: P is stochastic, sum_b P^b diverges.
  for (int b = 1; b < batches; ++b) {
    chain.step();
    idle += chain.expected_idle();
  }
  return {spec, tbar, batches, static_cast<double>(k) + idle, 0.0};
}

std::vector<double> gap_idle_distribution(const SendCountDistribution& tbar, const ChannelSpec& spec, int gap) {
  check_distribution(tbar);
  spec.validate();
  if (gap < 1) throw DomainError("gap index must be >= 1");
  const int k = integer_source_time(spec);
  SlackChain chain(tbar, k, gap + 1);
  for (int b = 1; b <= gap; ++b) chain.step();
  return chain.idle_law();
}

}  // namespace bats
