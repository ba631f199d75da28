#include "app.hpp"

#include <omp.h>

#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using bats::RunConfig;

struct Flags {
  std::int64_t F = 0;
  int M = 0;
  double omega = 0.0;
  double p_sr = 0.0;
  double p_rd = 0.0;
  double p_sd = 0.0;
  int t_max = 0;
  double step = 0.0;
  double epsilon = 0.0;
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
  std::string d_method;
  std::string out;
  std::string config;
  int threads = 0;
};

struct Bound {
  CLI::Option* F;
  CLI::Option* M;
  CLI::Option* omega;
  CLI::Option* p_sr;
  CLI::Option* p_rd;
  CLI::Option* p_sd;
  CLI::Option* t_max;
  CLI::Option* step;
  CLI::Option* epsilon;
  CLI::Option* trials;
  CLI::Option* seed;
  CLI::Option* d_method;
  CLI::Option* out;
  CLI::Option* threads;
};

Bound add_common(CLI::App& app, Flags& f) {
  Bound b{};
  b.F = app.add_option("--F", f.F, "number of input packets (default 100)");
  b.M = app.add_option("--M", f.M, "batch size (default 8)");
  b.omega = app.add_option("--omega", f.omega, "source time units per packet (default 1)");
  b.p_sr = app.add_option("--p-sr", f.p_sr, "source to relay loss (default 0.2)");
  b.p_rd = app.add_option("--p-rd", f.p_rd, "relay to sink loss (default 0.2)");
  b.p_sd = app.add_option("--p-sd", f.p_sd, "source to sink loss (default 0.8)");
  b.t_max = app.add_option("--t-max", f.t_max, "largest recoded count per batch (default: automatic)");
  b.step = app.add_option("--step", f.step, "t_avg grid step (default 0.01)");
  b.epsilon = app.add_option("--epsilon", f.epsilon, "right end-point offset (default 1e-6)");
  b.trials = app.add_option("--trials", f.trials, "Monte Carlo trials for D (default 100000)");
  b.seed = app.add_option("--seed", f.seed, "RNG seed; required whenever randomness is used");
  b.d_method = app.add_option("--d-method", f.d_method, "idle-time method")
                   ->check(CLI::IsMember({"markov", "mc"}));
  b.out = app.add_option("--out", f.out, "CSV output path");
  app.add_option("--config", f.config, "key=value config file; flags take precedence")
      ->check(CLI::ExistingFile);
  b.threads = app.add_option("--threads", f.threads, "OpenMP worker count")->check(CLI::PositiveNumber);
  return b;
}

RunConfig resolve(const Flags& f, const Bound& b) {
  RunConfig c;
  if (!f.config.empty()) bats::load_config_file(c, f.config);
  if (b.F->count()) c.F = f.F;
  if (b.M->count()) c.M = f.M;
  if (b.omega->count()) c.omega = f.omega;
  if (b.p_sr->count()) c.p_sr = f.p_sr;
  if (b.p_rd->count()) c.p_rd = f.p_rd;
  if (b.p_sd->count()) c.p_sd = f.p_sd;
  if (b.t_max->count()) c.t_max = f.t_max;
  if (b.step->count()) c.grid_step = f.step;
  if (b.epsilon->count()) c.epsilon_edge = f.epsilon;
  if (b.trials->count()) c.trials = f.trials;
  if (b.seed->count()) c.seed = f.seed;
  if (b.d_method->count()) c.d_method = bats::parse_idle_method(f.d_method);
  if (b.out->count()) c.output_path = f.out;
  return c;
}

}  // namespace

namespace bats::cli {

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Recoding and idle-time analysis for BATS codes on a relay with overhearing"};
  app.require_subcommand(1);
  Flags flags;
  const Bound bound = add_common(app, flags);
  app.fallthrough();

  auto* opt = app.add_subcommand("optimize", "optimal t_avg, B, D/B and efficiency");
  auto* sw = app.add_subcommand("sweep", "efficiency curve over a t_avg grid (CSV)");
  cli::SweepArgs sweep_args;
  double tavg_min = 0.0;
  double tavg_max = 0.0;
  auto* tmin_opt = sw->add_option("--tavg-min", tavg_min, "first grid point (default: step)");
  auto* tmax_opt = sw->add_option("--tavg-max", tavg_max, "last grid point (default: min(2M, t_max))");

  auto* idle = app.add_subcommand("idle", "expected idle time D by both methods");
  cli::IdleArgs idle_args;
  int batches = 0;
  idle->add_option("--scheme-file", idle_args.scheme_file, "M+1 recoded counts (default: optimal scheme)")
      ->check(CLI::ExistingFile);
  auto* batches_opt = idle->add_option("--batches", batches, "B (default: ceil(F/E))");

  auto* ub = app.add_subcommand("upper-bound", "efficiency limit as D/B goes to 0");

  auto* sim = app.add_subcommand("simulate", "decode-until-done transfers against the analytic value");
  cli::SimulateArgs sim_args;
  sim->add_option("--runs", sim_args.runs, "number of transfers (default 200)");
  sim->add_option("--scheme-file", sim_args.scheme_file, "M+1 recoded counts (default: optimal scheme)")
      ->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return cli::kUsage;
  }

  if (bound.threads->count()) omp_set_num_threads(flags.threads);
  if (tmin_opt->count()) sweep_args.tavg_min = tavg_min;
  if (tmax_opt->count()) sweep_args.tavg_max = tavg_max;
  if (batches_opt->count()) idle_args.batches = batches;

  return cli::guarded(
      [&]() -> int {
        const RunConfig c = resolve(flags, bound);
        if (opt->parsed()) return cli::cmd_optimize(c, out, err);
        if (sw->parsed()) return cli::cmd_sweep(c, sweep_args, out, err);
        if (idle->parsed()) return cli::cmd_idle(c, idle_args, out, err);
        if (ub->parsed()) return cli::cmd_upper_bound(c, out, err);
        return cli::cmd_simulate(c, sim_args, out, err);
      },
      err);
}

}  // namespace bats::cli
