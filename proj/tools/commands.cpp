#include "commands.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <vector>

#include "batsrelay/efficiency.hpp"
#include "batsrelay/errors.hpp"
#include "batsrelay/idle_time.hpp"
#include "batsrelay/simulator.hpp"

namespace bats::cli {

namespace {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

void require_seed(const RunConfig& c, const char* command) {
  if (!c.seed) throw UsageError(std::string(command) + ": --seed is required for stochastic evaluation");
}

bool uses_monte_carlo(const RunConfig& c) { return c.idle_options().method == IdleMethod::monte_carlo; }

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open output file " + path);
  return f;
}

void warn_degenerate(const RankEnvironment& env, std::ostream& err) {
  if (env.h(0) >= 1.0) {
    err << "warning: innovative rank is always 0; the sink gets nothing from the relay"
           " and B depends on overhearing alone\n";
  }
}

struct Column {
  const char* title;
  int width;
};

void print_row(std::ostream& out, const std::vector<Column>& cols, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cols.size(); ++i) {
    out << std::right << std::setw(cols[i].width) << cells[i];
  }
  out << '\n';
}

RecodingScheme pick_scheme(const RunConfig& c, const std::string& scheme_file, const RankEnvironment& env,
                           std::optional<EfficiencyPoint>& optimum) {
  if (!scheme_file.empty()) return load_scheme_file(scheme_file, env);
  const auto result = optimize(c.F, env, c.optimizer_options());
  optimum = result.best;
  RecodingScheme s;
  s.t = result.best.t;
  s.t_avg = result.best.t_avg;
  s.sink_rank_mean = result.best.sink_rank;
  return s;
}

}  // namespace

std::string format_full(double value) {
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), ptr);
}

std::string format_fixed(double value, int decimals) {
  std::array<char, 128> buf{};
  const auto [ptr, ec] =
      std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::fixed, decimals);
  return std::string(buf.data(), ptr);
}

RecodingScheme load_scheme_file(const std::string& path, const RankEnvironment& env) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scheme file " + path);
  std::vector<double> t;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    std::string tok;
    while (fields >> tok) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
        throw ConfigError(path + ": not a number: '" + tok + "'");
      }
      t.push_back(v);
    }
  }
  if (t.size() != static_cast<std::size_t>(env.batch_size()) + 1) {
    throw ConfigError(path + ": expected " + std::to_string(env.batch_size() + 1) + " values, got " +
                      std::to_string(t.size()));
  }
  RecodingScheme s;
  s.t = t;
  for (int r = 0; r <= env.batch_size(); ++r) s.t_avg += env.h(r) * t[static_cast<std::size_t>(r)];
  s.sink_rank_mean = sink_rank(env, t);
  return s;
}

int guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

int cmd_optimize(const RunConfig& c, std::ostream& out, std::ostream& err) {
  c.validate();
  if (uses_monte_carlo(c)) require_seed(c, "optimize");
  const auto env = c.environment();
  warn_degenerate(env, err);
  const auto result = optimize(c.F, env, c.optimizer_options());
  const auto& b = result.best;

  const std::vector<Column> cols{{"F", 8},     {"M", 5},          {"B", 6},           {"D/B", 10},
                                 {"t_avg", 10}, {"time eff.", 11}, {"upper bound", 13}};
  std::vector<std::string> titles;
  for (const auto& col : cols) titles.emplace_back(col.title);
  print_row(out, cols, titles);
  print_row(out, cols,
            {std::to_string(c.F), std::to_string(c.M), std::to_string(b.batches), format_fixed(b.idle_per_batch(), 4),
             format_fixed(b.t_avg, 4), format_fixed(b.efficiency, 4), format_fixed(result.upper_bound, 4)});

  if (!c.output_path.empty()) {
    auto f = open_output(c.output_path);
    f << "F,M,B,D_over_B,tavg,eff,upper_bound\n";
    f << c.F << ',' << c.M << ',' << b.batches << ',' << format_full(b.idle_per_batch()) << ','
      << format_full(b.t_avg) << ',' << format_full(b.efficiency) << ',' << format_full(result.upper_bound)
      << '\n';
  }
  return kOk;
}

int cmd_sweep(const RunConfig& c, const SweepArgs& args, std::ostream& out, std::ostream& err) {
  c.validate();
  if (uses_monte_carlo(c)) require_seed(c, "sweep");
  const auto env = c.environment();
  warn_degenerate(env, err);
  const double lo = args.tavg_min.value_or(c.grid_step);
  const double hi = args.tavg_max.value_or(std::min(2.0 * c.M, static_cast<double>(env.t_max())));
  if (!(lo >= 0.0) || !(hi >= lo)) throw UsageError("sweep range must satisfy 0 <= min <= max");
  const auto points = sweep(c.F, env, lo, hi, c.grid_step, c.idle_options());

  std::ofstream file;
  if (!c.output_path.empty()) file = open_output(c.output_path);
  std::ostream& csv = c.output_path.empty() ? out : file;
  csv << "tavg,eff1,eff2,E,B,D_over_B\n";
  for (const auto& p : points) {
    const double relay_bound = efficiency_e2(p.sink_rank, p.t_avg, p.total_idle, p.batches);
    const double source_bound = efficiency_e1(p.sink_rank, env.spec());
    csv << format_full(p.t_avg) << ',' << format_full(relay_bound) << ',' << format_full(source_bound) << ','
        << format_full(p.sink_rank) << ',' << p.batches << ',' << format_full(p.idle_per_batch()) << '\n';
  }
  if (!c.output_path.empty()) out << "wrote " << points.size() << " rows to " << c.output_path << '\n';
  return kOk;
}

int cmd_idle(const RunConfig& c, const IdleArgs& args, std::ostream& out, std::ostream& err) {
  c.validate();
  require_seed(c, "idle");
  const auto env = c.environment();
  warn_degenerate(env, err);
  std::optional<EfficiencyPoint> optimum;
  const auto scheme = pick_scheme(c, args.scheme_file, env, optimum);
  int batches = 0;
  if (args.batches) {
    batches = *args.batches;
  } else if (optimum) {
    batches = optimum->batches;
  } else {
    batches = batches_needed(c.F, scheme.sink_rank_mean);
  }
  if (batches < 1) throw UsageError("--batches must be >= 1");
  const auto tbar = send_count_distribution(env.innovative_rank(), scheme.t);
  const auto spec = env.spec();

  const std::vector<Column> cols{{"method", 8}, {"B", 6}, {"D", 12}, {"D/B", 10}, {"stderr", 10}};
  std::vector<std::string> titles;
  for (const auto& col : cols) titles.emplace_back(col.title);
  out << "t_avg = " << format_fixed(scheme.t_avg, 4) << ", E = " << format_fixed(scheme.sink_rank_mean, 4) << '\n';
  print_row(out, cols, titles);
  auto row = [&](const char* name, const IdleModel& m) {
    print_row(out, cols,
              {name, std::to_string(batches), format_fixed(m.total_idle, 4), format_fixed(m.idle_per_batch(), 4),
               format_fixed(m.std_error, 4)});
  };
  if (spec.omega_is_integer()) row("markov", idle_time_markov(tbar, spec, batches));
  row("mc", idle_time_monte_carlo(tbar, spec, batches, c.trials, *c.seed));
  return kOk;
}

int cmd_upper_bound(const RunConfig& c, std::ostream& out, std::ostream& err) {
  c.validate();
  const auto env = c.environment();
  warn_degenerate(env, err);
  out << "M = " << c.M << ", upper bound = " << format_fixed(solve_upper_bound(env), 4) << '\n';
  return kOk;
}

int cmd_simulate(const RunConfig& c, const SimulateArgs& args, std::ostream& out, std::ostream& err) {
  c.validate();
  require_seed(c, "simulate");
  if (args.runs < 1) throw UsageError("--runs must be >= 1");
  const auto env = c.environment();
  warn_degenerate(env, err);
  std::optional<EfficiencyPoint> optimum;
  const auto scheme = pick_scheme(c, args.scheme_file, env, optimum);
  const bool traces = !c.output_path.empty();
  const auto summary = empirical_efficiency_batch(env, scheme, c.F, args.runs, *c.seed, traces);

  out << "runs                 " << summary.runs << '\n'
      << "t_avg                " << format_fixed(scheme.t_avg, 4) << '\n'
      << "mean batches         " << format_fixed(summary.mean_batches, 4) << '\n'
      << "empirical efficiency " << format_fixed(summary.mean, 4) << " +/- " << format_fixed(summary.std_error, 4)
      << '\n'
      << "analytic efficiency  " << format_fixed(summary.analytic, 4) << " (B = " << summary.analytic_point.batches
      << ", D/B = " << format_fixed(summary.analytic_point.idle_per_batch(), 4) << ")\n";

  if (traces) {
    auto f = open_output(c.output_path);
    f << "run,batch,innov_rank,sent,received,sink_rank,idle_before,relay_start,relay_finish\n";
    for (std::size_t run = 0; run < summary.reports.size(); ++run) {
      for (const auto& t : summary.reports[run].traces) {
        f << run << ',' << t.batch_index << ',' << t.innovative_rank << ',' << t.recoded_sent << ','
          << t.recoded_received << ',' << t.sink_rank << ',' << format_full(t.idle_before) << ','
          << format_full(t.relay_start_time) << ',' << format_full(t.relay_finish_time) << '\n';
      }
    }
  }
  return kOk;
}

}  // namespace bats::cli
