#include <doctest.h>

#include <omp.h>

#include <bit>

#include <boost/math/distributions/chi_squared.hpp>

#include "batsrelay/channel.hpp"
#include "batsrelay/efficiency.hpp"
#include "batsrelay/errors.hpp"
#include "batsrelay/idle_time.hpp"
#include "batsrelay/recoding.hpp"
#include "batsrelay/simulator.hpp"

using namespace bats;

namespace {

const ChannelSpec kEval8{8, 1.0, 0.2, 0.2, 0.8};

RecodingScheme flat_scheme(int m, double t) {
  RecodingScheme s;
  s.t.assign(static_cast<std::size_t>(m) + 1, t);
  s.t_avg = t;
  return s;
}

RecodingScheme optimal_scheme(std::int64_t F, const RankEnvironment& env) {
  const auto best = optimize(F, env, OptimizerOptions{}).best;
  return RecodingScheme{best.t, best.t_avg, best.sink_rank};
}

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

Moments moments(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  const double mean = s / xs.size();
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (xs.size() - 1) / xs.size())};
}

}  // namespace

TEST_CASE("lossless relay that keeps pace") {
  const ChannelSpec spec{8, 1.0, 0.0, 0.0, 1.0};
  const int B = 12;
  const auto rep = simulate_transfer(spec, flat_scheme(8, 8.0), B, 3);
  for (const auto& tr : rep.traces) CHECK(tr.sink_rank == 8);
  CHECK(rep.decoding_time == 8.0 * (B + 1));
  CHECK(rep.total_idle == 8.0);
  CHECK(rep.cumulative_sink_rank == 8 * B);

  auto scheme = flat_scheme(8, 8.0);
  scheme.sink_rank_mean = 8.0;
  const auto s = empirical_efficiency_batch(build_environment(spec), scheme, 96, 20, 1);
  CHECK(s.std_error == 0.0);
  CHECK(s.mean == doctest::Approx(96.0 / (8.0 * 13)).epsilon(1e-15));
}

TEST_CASE("silent relay") {
  const auto rep = simulate_transfer(kEval8, flat_scheme(8, 0.0), 10, 9);
  std::int64_t heard = 0;
  for (const auto& tr : rep.traces) {
    CHECK(tr.recoded_sent == 0);
    heard += std::popcount(tr.sink_overheard);
  }
  CHECK(rep.cumulative_sink_rank == heard);
  CHECK(rep.decoding_time == 80.0);
}

TEST_CASE("per-batch invariants") {
  const auto env = build_environment(kEval8);
  const auto scheme = solve_recoding(env, 7.3);
  const auto rep = simulate_transfer(kEval8, scheme, 400, 17);
  double idle = 0.0;
  double prev_finish = 0.0;
  for (const auto& tr : rep.traces) {
    const int relay = std::popcount(tr.relay_received);
    const int heard = std::popcount(tr.sink_overheard);
    const int reachable = std::popcount(tr.relay_received | tr.sink_overheard);
    CHECK(tr.sink_rank <= 8);
    CHECK(tr.innovative_rank <= relay);
    CHECK(tr.innovative_rank == std::popcount(tr.relay_received & ~tr.sink_overheard));
    CHECK(tr.sink_rank <= reachable);
    CHECK((tr.sink_rank == reachable) == (tr.recoded_received >= tr.innovative_rank));
    CHECK(tr.sink_rank >= heard);
    CHECK(tr.recoded_received <= tr.recoded_sent);
    CHECK(tr.relay_start_time >= (tr.batch_index + 1) * 8.0);
    CHECK(tr.relay_start_time >= prev_finish);
    CHECK(tr.relay_finish_time == tr.relay_start_time + tr.recoded_sent);
    CHECK(tr.idle_before >= 0.0);
    const double whole = std::floor(scheme.t[tr.innovative_rank]);
    CHECK(tr.recoded_sent >= whole);
    CHECK(tr.recoded_sent <= whole + 1);
    idle += tr.idle_before;
    prev_finish = tr.relay_finish_time;
  }
  CHECK(rep.total_idle == doctest::Approx(idle).epsilon(1e-15));
  CHECK(rep.decoding_time == std::max(400 * 8.0, prev_finish));
}

TEST_CASE("sampled send counts average to t_avg") {
  const auto env = build_environment(kEval8);
  const auto scheme = solve_recoding(env, 6.77);
  std::vector<double> sent;
  RelaySimulator sim(kEval8, scheme, 5);
  for (int b = 0; b < 200000; ++b) sent.push_back(sim.next_batch().recoded_sent);
  const auto m = moments(sent);
  CHECK(std::abs(m.mean - 6.77) <= 3.0 * m.se);
}

TEST_CASE("simulated E and D against the analytic model") {
  // Optimal scheme for F = 512, M = 8; the analytic D is for B = 78 batches.
  const auto env = build_environment(kEval8);
  const auto scheme = optimal_scheme(512, env);
  const auto point = evaluate_point(512, env, scheme, default_idle_options(kEval8));
  REQUIRE(point.batches == 78);
  std::vector<double> rank_per_batch;
  std::vector<double> idle;
  for (int run = 0; run < 200; ++run) {
    const auto rep = simulate_transfer(kEval8, scheme, point.batches, derive_seed(404, run));
    rank_per_batch.push_back(static_cast<double>(rep.cumulative_sink_rank) / point.batches);
    idle.push_back(rep.total_idle);
  }
  const auto e = moments(rank_per_batch);
  const auto d = moments(idle);
  CHECK(std::abs(e.mean - point.sink_rank) <= 3.0 * e.se);
  CHECK(std::abs(d.mean - point.total_idle) <= 3.0 * d.se);
}

TEST_CASE("per-gap idle law matches the exact chain") {
  // Small scheme so most idle values have decent expected counts.
  const ChannelSpec spec{4, 1.0, 0.2, 0.3, 0.8};
  const auto env = build_environment(spec, 8);
  const auto scheme = solve_recoding(env, 3.4);
  const auto tbar = send_count_distribution(env.innovative_rank(), scheme.t);
  constexpr int kRuns = 20000;
  for (int gap : {1, 3, 9}) {
    const auto law = gap_idle_distribution(tbar, spec, gap);
    std::vector<double> observed(law.size(), 0.0);
    for (int run = 0; run < kRuns; ++run) {
      RelaySimulator sim(spec, scheme, derive_seed(1000 + gap, run));
      BatchTrace tr;
      for (int b = 0; b <= gap; ++b) tr = sim.next_batch();
      observed[static_cast<std::size_t>(tr.idle_before)] += 1.0;
    }
    // Pool cells with small expected counts into their neighbour.
    double chi2 = 0.0;
    int cells = 0;
    double pooled_obs = 0.0;
    double pooled_exp = 0.0;
    for (std::size_t k = 0; k < law.size(); ++k) {
      pooled_obs += observed[k];
      pooled_exp += law[k] * kRuns;
      if (pooled_exp >= 5.0 || k + 1 == law.size()) {
        if (pooled_exp > 0.0) {
          chi2 += (pooled_obs - pooled_exp) * (pooled_obs - pooled_exp) / pooled_exp;
          ++cells;
        }
        pooled_obs = pooled_exp = 0.0;
      }
    }
    REQUIRE(cells >= 2);
    const boost::math::chi_squared dist(cells - 1);
    CHECK(chi2 < boost::math::quantile(boost::math::complement(dist, 0.01)));
  }
}

TEST_CASE("decode-until-done runs") {
  const auto env = build_environment(kEval8);
  const auto scheme = optimal_scheme(100, env);
  const auto rep = simulate_until_decoded(kEval8, scheme, 100, 1000, 8);
  CHECK(rep.cumulative_sink_rank >= 100);
  CHECK(rep.cumulative_sink_rank - rep.traces.back().sink_rank < 100);
  CHECK(rep.empirical_efficiency == doctest::Approx(100.0 / rep.decoding_time).epsilon(1e-15));
}

TEST_CASE("more recoding than the optimum does not pay") {
  const auto env = build_environment(kEval8);
  const auto best = optimal_scheme(100, env);
  const auto heavy = solve_recoding(env, best.t_avg + 2.0);
  const auto a = empirical_efficiency_batch(env, best, 100, 400, 71);
  const auto b = empirical_efficiency_batch(env, heavy, 100, 400, 72);
  CHECK(b.mean <= a.mean + 2.0 * std::hypot(a.std_error, b.std_error));
}

TEST_CASE("parallel runs equal the serial reference") {
  const auto env = build_environment(kEval8);
  const auto scheme = optimal_scheme(256, env);
  const auto serial = empirical_efficiency_batch_serial(env, scheme, 256, 64, 12, true);
  const int saved = omp_get_max_threads();
  for (int threads : {1, 3}) {
    omp_set_num_threads(threads);
    const auto par = empirical_efficiency_batch(env, scheme, 256, 64, 12, true);
    CHECK(par.mean == serial.mean);
    CHECK(par.std_error == serial.std_error);
    REQUIRE(par.reports.size() == serial.reports.size());
    for (std::size_t i = 0; i < par.reports.size(); ++i) {
      CHECK(par.reports[i].decoding_time == serial.reports[i].decoding_time);
      CHECK(par.reports[i].traces.size() == serial.reports[i].traces.size());
    }
  }
  omp_set_num_threads(saved);
  CHECK(empirical_efficiency_batch(env, scheme, 256, 64, 13).mean != serial.mean);
}

TEST_CASE("transfers that cannot finish") {
  // Nothing overheard and a silent relay: E = 0.
  const ChannelSpec spec{8, 1.0, 0.2, 0.2, 1.0};
  const auto env = build_environment(spec);
  CHECK_THROWS_AS(empirical_efficiency_batch(env, flat_scheme(8, 0.0), 50, 4, 1), NonTerminationError);
  CHECK_THROWS_AS(simulate_until_decoded(spec, flat_scheme(8, 0.0), 50, 30, 1), NonTerminationError);
}

TEST_CASE("simulator input checks") {
  CHECK_THROWS_AS(RelaySimulator(ChannelSpec{65, 1.0, 0.2, 0.2, 0.8}, flat_scheme(65, 1.0), 1), DomainError);
  CHECK_THROWS_AS(RelaySimulator(kEval8, flat_scheme(4, 1.0), 1), DomainError);
  CHECK_THROWS_AS(RelaySimulator(kEval8, flat_scheme(8, -1.0), 1), DomainError);
  CHECK_THROWS_AS(simulate_transfer(kEval8, flat_scheme(8, 1.0), 0, 1), DomainError);
  const auto env = build_environment(kEval8);
  CHECK_THROWS_AS(empirical_efficiency_batch(env, flat_scheme(8, 1.0), 10, 0, 1), DomainError);
}
