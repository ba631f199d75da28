#include "batsrelay/channel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "batsrelay/errors.hpp"

namespace bats {

namespace {

constexpr double kFlatGain = 1e-12;

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

void check_rank(const RankEnvironment& env, int r) {
  if (r < 0 || r > env.batch_size()) {
    throw DomainError("rank " + std::to_string(r) + " outside 0.." +
                      std::to_string(env.batch_size()));
  }
}

// P(Binomial(n, success) <= k) for k = 0..M-1, advanced one trial at a time.
// pmf holds P(X = i) for i = 0..M-1; mass at i >= M is not needed.
class TruncatedBinomial {
 public:
  TruncatedBinomial(int cap, double success)
      : pmf_(static_cast<std::size_t>(std::max(cap, 1)), 0.0), success_(success) {
    pmf_[0] = 1.0;
  }

  void add_trial() {
    const double fail = 1.0 - success_;
    for (std::size_t i = pmf_.size(); i-- > 1;) {
      pmf_[i] = pmf_[i] * fail + pmf_[i - 1] * success_;
    }
    pmf_[0] *= fail;
  }

  // P(X <= k) for k < cap.
  double cdf(int k) const {
    double acc = 0.0;
    for (int i = 0; i <= k; ++i) acc += pmf_[static_cast<std::size_t>(i)];
    return std::min(acc, 1.0);
  }

 private:
  std::vector<double> pmf_;
  double success_;
};

}  // namespace

void ChannelSpec::validate() const {
  if (batch_size < 1) throw DomainError("batch size must be >= 1");
  if (!(omega > 0.0) || !std::isfinite(omega)) throw DomainError("omega must be > 0");
  if (!is_probability(p_sr) || !is_probability(p_rd) || !is_probability(p_sd)) {
    throw DomainError("loss rates must lie in [0, 1]");
  }
}

bool ChannelSpec::omega_is_integer() const { return omega == std::floor(omega); }

std::vector<double> innovative_rank_distribution(const ChannelSpec& spec) {
  spec.validate();
  const int m = spec.batch_size;
  const double q = (1.0 - spec.p_sr) * spec.p_sd;
  // Pascal recurrence keeps every entry a product of probabilities.
  std::vector<double> h(static_cast<std::size_t>(m) + 1, 0.0);
  h[0] = 1.0;
  for (int n = 1; n <= m; ++n) {
    for (int r = n; r >= 1; --r) {
      h[static_cast<std::size_t>(r)] =
          h[static_cast<std::size_t>(r)] * (1.0 - q) + h[static_cast<std::size_t>(r - 1)] * q;
    }
    h[0] *= (1.0 - q);
  }
  return h;
}

double overheard_rank_mean(const ChannelSpec& spec) {
  spec.validate();
  return spec.batch_size * (1.0 - spec.p_sd);
}

int default_t_max(const ChannelSpec& spec) {
  spec.validate();
  const int m = spec.batch_size;
  const int floor_cap = 4 * m;
  const int hard_cap = 64 * m;
  const double success = 1.0 - spec.p_rd;
  if (success <= 0.0) return floor_cap;
  // Largest gain at t is the rank-M row: (1-p) P(Bin(t, 1-p) <= M-1).
  TruncatedBinomial binom(m, success);
  for (int t = 0; t < hard_cap; ++t) {
    if (t + 1 >= floor_cap && success * binom.cdf(m - 1) < kFlatGain) {
      return std::max(floor_cap, t + 1);
    }
    binom.add_trial();
  }
  return hard_cap;
}

RankEnvironment::RankEnvironment(ChannelSpec spec, int t_max) : spec_(spec), t_max_(t_max) {
  spec_.validate();
  if (t_max_ < 1) throw DomainError("t_max must be >= 1");
  h_ = innovative_rank_distribution(spec_);
  overheard_ = overheard_rank_mean(spec_);

  const int m = spec_.batch_size;
  const auto cols = static_cast<std::size_t>(t_max_) + 1;
  table_.assign((static_cast<std::size_t>(m) + 1) * cols, 0.0);
  gain_.assign((static_cast<std::size_t>(m) + 1) * cols, 0.0);

  // E(r, t+1) - E(r, t) = (1-p) P(Bin(t, 1-p) <= r-1): the extra packet
  // arrives and the sink still misses some of the r innovative dimensions.
  const double success = 1.0 - spec_.p_rd;
  TruncatedBinomial binom(m, success);
  std::vector<double> last_gain(static_cast<std::size_t>(m) + 1, 1.0);
  for (int t = 0; t < t_max_; ++t) {
    for (int r = 1; r <= m; ++r) {
      const auto ri = static_cast<std::size_t>(r);
      double g = success * binom.cdf(r - 1);
      g = std::clamp(g, 0.0, last_gain[ri]);  // absorbs round-off only
      last_gain[ri] = g;
      gain_[ri * cols + static_cast<std::size_t>(t)] = g;
      table_[ri * cols + static_cast<std::size_t>(t) + 1] = table_[ri * cols + static_cast<std::size_t>(t)] + g;
    }
    binom.add_trial();
  }
  for (int r = 1; r <= m; ++r) {
    // E(r, t) <= r holds mathematically; clip accumulated round-off.
    const auto ri = static_cast<std::size_t>(r);
    for (std::size_t k = 1; k < cols; ++k) {
      if (table_[ri * cols + k] > r) {
        table_[ri * cols + k] = r;
        gain_[ri * cols + k - 1] = std::max(0.0, r - table_[ri * cols + k - 1]);
      }
    }
  }

  ceiling_ = overheard_;
  for (int r = 0; r <= m; ++r) ceiling_ += h(r) * table(r, t_max_);
}

double RankEnvironment::table(int r, int k) const {
  const auto cols = static_cast<std::size_t>(t_max_) + 1;
  const int kk = std::clamp(k, 0, t_max_);
  return table_[static_cast<std::size_t>(r) * cols + static_cast<std::size_t>(kk)];
}

double RankEnvironment::gain(int r, int k) const {
  if (k < 0 || k >= t_max_) return 0.0;
  return gain_[static_cast<std::size_t>(r) * (static_cast<std::size_t>(t_max_) + 1) + static_cast<std::size_t>(k)];
}

RankEnvironment build_environment(const ChannelSpec& spec, int t_max) {
  return RankEnvironment(spec, t_max);
}

RankEnvironment build_environment(const ChannelSpec& spec) {
  return RankEnvironment(spec, default_t_max(spec));
}

double expected_rank(const RankEnvironment& env, int r, double t) {
  check_rank(env, r);
  if (!(t >= 0.0)) throw DomainError("recoded packet count must be >= 0");
  const double whole = std::floor(t);
  const double frac = t - whole;
  if (whole >= env.t_max()) return env.table(r, env.t_max());
  const int k = static_cast<int>(whole);
  if (frac == 0.0) return env.table(r, k);
  return (1.0 - frac) * env.table(r, k) + frac * env.table(r, k + 1);
}

double marginal_gain(const RankEnvironment& env, int r, int t) {
  check_rank(env, r);
  if (t < 0 || t > env.t_max() - 1) {
    throw DomainError("marginal gain index " + std::to_string(t) + " outside 0.." +
                      std::to_string(env.t_max() - 1));
  }
  return env.gain(r, t);
}

}  // namespace bats
