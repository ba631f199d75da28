#include "batsrelay/recoding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>

#include "batsrelay/errors.hpp"

namespace bats {

GreedyState::GreedyState(const RankEnvironment& env)
    : env_(&env),
      whole_(static_cast<std::size_t>(env.batch_size()) + 1, 0),
      frac_(static_cast<std::size_t>(env.batch_size()) + 1, 0.0),
      sink_rank_(env.overheard_rank()) {}

GreedyState::Choice GreedyState::pick() const {
  Choice best;
  for (int r = 0; r <= env_->batch_size(); ++r) {
    if (env_->h(r) <= 0.0) continue;
    const double g = env_->gain(r, whole_[static_cast<std::size_t>(r)]);
    if (best.rank < 0 || g > best.gain) best = {r, g};
  }
  return best;
}

double GreedyState::best_gain() const { return pick().gain; }

double GreedyState::capacity(int r) const {
  return env_->h(r) * (1.0 - frac_[static_cast<std::size_t>(r)]);
}

void GreedyState::fill(int r, double mass, double gain) {
  const auto ri = static_cast<std::size_t>(r);
  double f = frac_[ri] + mass / env_->h(r);
  const double carry = std::floor(f);
  whole_[ri] += static_cast<int>(carry);
  f -= carry;
  frac_[ri] = f;
  t_avg_ += mass;
  sink_rank_ += mass * gain;
}

void GreedyState::advance(double mass) {
  if (!(mass >= 0.0)) throw DomainError("cannot remove recoding mass");
  double remaining = mass;
  while (remaining > 0.0) {
    const Choice c = pick();
    if (c.rank < 0) throw DomainError("innovative rank distribution has no support");
    if (c.gain <= 0.0) {
      // Saturated: further packets add nothing, keep h . t = t_avg anyway.
      fill(c.rank, remaining, 0.0);
      return;
    }
    const double cap = capacity(c.rank);
    if (remaining < cap) {
      fill(c.rank, remaining, c.gain);
      return;
    }
    const auto ri = static_cast<std::size_t>(c.rank);
    whole_[ri] += 1;
    frac_[ri] = 0.0;
    t_avg_ += cap;
    sink_rank_ += cap * c.gain;
    remaining -= cap;
  }
}

bool GreedyState::advance_to_rank(double target) {
  while (sink_rank_ < target) {
    const Choice c = pick();
    if (c.rank < 0 || c.gain <= 0.0) return false;
    const double cap = capacity(c.rank);
    const double needed = (target - sink_rank_) / c.gain;
    if (needed < cap) {
      fill(c.rank, needed, c.gain);
      sink_rank_ = target;
      return true;
    }
    const auto ri = static_cast<std::size_t>(c.rank);
    whole_[ri] += 1;
    frac_[ri] = 0.0;
    t_avg_ += cap;
    sink_rank_ += cap * c.gain;
  }
  return true;
}

bool GreedyState::step() {
  const Choice c = pick();
  if (c.rank < 0 || c.gain <= 0.0) return false;
  const double cap = capacity(c.rank);
  const auto ri = static_cast<std::size_t>(c.rank);
  whole_[ri] += 1;
  frac_[ri] = 0.0;
  t_avg_ += cap;
  sink_rank_ += cap * c.gain;
  return true;
}

std::vector<double> GreedyState::allocation() const {
  std::vector<double> t(whole_.size());
  for (std::size_t r = 0; r < t.size(); ++r) t[r] = whole_[r] + frac_[r];
  return t;
}

RecodingScheme GreedyState::scheme() const { return {allocation(), t_avg_, sink_rank_}; }

RecodingScheme solve_recoding(const RankEnvironment& env, double t_avg) {
  if (!(t_avg >= 0.0)) throw DomainError("t_avg must be >= 0");
  if (t_avg > env.t_max()) {
    std::clog << "warning: t_avg " << t_avg << " clamped to t_max " << env.t_max() << '\n';
    t_avg = env.t_max();
  }
  GreedyState state(env);
  state.advance(t_avg);
  return state.scheme();
}

double sink_rank(const RankEnvironment& env, std::span<const double> t) {
  if (t.size() != static_cast<std::size_t>(env.batch_size()) + 1) {
    throw DomainError("allocation length must be M + 1");
  }
  double e = env.overheard_rank();
  for (int r = 0; r <= env.batch_size(); ++r) {
    const double tr = t[static_cast<std::size_t>(r)];
    if (!(tr >= 0.0)) throw DomainError("allocation entries must be >= 0");
    e += env.h(r) * expected_rank(env, r, tr);
  }
  return e;
}

namespace {

constexpr std::uint64_t kMaxGridWork = 100'000'000;

struct Node {
  double mass;
  double value;
  std::int64_t parent;
  std::int64_t steps;
};

// Pareto frontier (mass up, value strictly up) over grid allocations of
// `ranks`, one stage per rank for back-tracking.
std::vector<std::vector<Node>> pareto_stages(const RankEnvironment& env, const std::vector<int>& ranks,
                                             double limit, double grid_step, std::uint64_t& work) {
  std::vector<std::vector<Node>> stages;
  stages.push_back({Node{0.0, 0.0, -1, 0}});
  for (const int r : ranks) {
    const double hr = env.h(r);
    const double top = std::min(limit / hr, static_cast<double>(env.t_max()) + 1.0);
    const auto steps = static_cast<std::int64_t>(std::floor(top / grid_step + 1e-9));
    const auto& prev = stages.back();
    // Counted before allocating: the candidate list is the memory hog.
    for (const Node& n : prev) {
      const double room = std::floor((limit - n.mass) / (hr * grid_step) + 1e-9);
      work += static_cast<std::uint64_t>(std::clamp(room, 0.0, static_cast<double>(steps))) + 1;
    }
    if (work > kMaxGridWork) throw ResourceError("grid search exceeds 1e8 evaluations; use a coarser step");
    std::vector<double> values(static_cast<std::size_t>(steps) + 1);
    for (std::int64_t k = 0; k <= steps; ++k) {
      values[static_cast<std::size_t>(k)] = hr * expected_rank(env, r, static_cast<double>(k) * grid_step);
    }
    std::vector<Node> cand;
    for (std::size_t i = 0; i < prev.size(); ++i) {
      for (std::int64_t k = 0; k <= steps; ++k) {
        const double mass = prev[i].mass + hr * static_cast<double>(k) * grid_step;
        if (mass > limit) break;
        cand.push_back({mass, prev[i].value + values[static_cast<std::size_t>(k)], static_cast<std::int64_t>(i), k});
      }
    }
    std::sort(cand.begin(), cand.end(), [](const Node& a, const Node& b) {
      return a.mass < b.mass || (a.mass == b.mass && a.value > b.value);
    });
    std::vector<Node> frontier;
    for (const Node& n : cand) {
      if (frontier.empty() || n.value > frontier.back().value) frontier.push_back(n);
    }
    stages.push_back(std::move(frontier));
  }
  return stages;
}

void backtrack(const std::vector<std::vector<Node>>& stages, const std::vector<int>& ranks, std::size_t idx,
               double grid_step, std::vector<double>& t) {
  auto i = static_cast<std::int64_t>(idx);
  for (std::size_t s = ranks.size(); s >= 1; --s) {
    const Node& n = stages[s][static_cast<std::size_t>(i)];
    t[static_cast<std::size_t>(ranks[s - 1])] = static_cast<double>(n.steps) * grid_step;
    i = n.parent;
  }
}

}  // namespace

RecodingScheme brute_force_recoding(const RankEnvironment& env, double t_avg, double grid_step) {
  if (!(t_avg >= 0.0)) throw DomainError("t_avg must be >= 0");
  if (!(grid_step > 0.0)) throw DomainError("grid step must be > 0");

  const int m = env.batch_size();
  // Never spend more than the budget; the lower half of the band is what
  // makes an off-grid t_avg reachable.
  const double limit = t_avg * (1.0 + 1e-12) + 1e-12;
  // E(0, .) = 0, so t_0 = 0 loses nothing.
  std::vector<int> support;
  for (int r = 1; r <= m; ++r) {
    if (env.h(r) > 0.0) support.push_back(r);
  }

  std::vector<double> t(static_cast<std::size_t>(m) + 1, 0.0);
  double mass = 0.0;
  if (!support.empty()) {
    // Meet in the middle: frontiers for two halves of the ranks, then the
    // best affordable partner for every point of the first half.
    const auto mid = support.begin() + static_cast<std::ptrdiff_t>(support.size() / 2);
    const std::vector<int> lo_ranks(support.begin(), mid);
    const std::vector<int> hi_ranks(mid, support.end());
    std::uint64_t work = 0;
    const auto lo = pareto_stages(env, lo_ranks, limit, grid_step, work);
    const auto hi = pareto_stages(env, hi_ranks, limit, grid_step, work);
    const auto& a = lo.back();
    const auto& b = hi.back();
    double best = -1.0;
    std::size_t best_a = 0;
    std::size_t best_b = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double room = limit - a[i].mass;
      const auto it = std::upper_bound(b.begin(), b.end(), room, [](double x, const Node& n) { return x < n.mass; });
      if (it == b.begin()) continue;
      const auto j = static_cast<std::size_t>(it - b.begin()) - 1;
      if (a[i].value + b[j].value > best) {
        best = a[i].value + b[j].value;
        best_a = i;
        best_b = j;
      }
    }
    backtrack(lo, lo_ranks, best_a, grid_step, t);
    backtrack(hi, hi_ranks, best_b, grid_step, t);
    for (const int r : support) mass += env.h(r) * t[static_cast<std::size_t>(r)];
    // Every E(r, .) is nondecreasing, so topping up the most likely rank
    // reaches the feasible band without losing objective.
    const int heavy = *std::max_element(support.begin(), support.end(),
                                        [&](int x, int y) { return env.h(x) < env.h(y); });
    while (mass < t_avg - grid_step) {
      t[static_cast<std::size_t>(heavy)] += grid_step;
      mass += env.h(heavy) * grid_step;
    }
  }
  return {t, mass, sink_rank(env, t)};
}

}  // namespace bats
