#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>

#include "batsrelay/config.hpp"
#include "batsrelay/recoding.hpp"

namespace bats::cli {

enum ExitCode : int { kOk = 0, kRuntime = 1, kUsage = 2 };

struct SweepArgs {
  std::optional<double> tavg_min;  // default: grid_step
  std::optional<double> tavg_max;  // default: min(2M, t_max)
};

struct IdleArgs {
  std::string scheme_file;  // empty: use the optimal scheme
  std::optional<int> batches;
};

struct SimulateArgs {
  int runs = 200;
  std::string scheme_file;
};

int cmd_optimize(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_sweep(const RunConfig& config, const SweepArgs& args, std::ostream& out, std::ostream& err);
int cmd_idle(const RunConfig& config, const IdleArgs& args, std::ostream& out, std::ostream& err);
int cmd_upper_bound(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_simulate(const RunConfig& config, const SimulateArgs& args, std::ostream& out, std::ostream& err);

/// Runs `body`, mapping exceptions onto exit codes (usage errors -> 2, the
/// rest -> 1) with a message on `err`.
int guarded(const std::function<int()>& body, std::ostream& err);

/// Shortest round-trip decimal form; locale independent.
std::string format_full(double value);
/// Fixed notation with `decimals` digits; locale independent.
std::string format_fixed(double value, int decimals);

/// Reads M+1 recoded-packet counts separated by whitespace or commas.
RecodingScheme load_scheme_file(const std::string& path, const RankEnvironment& env);

}  // namespace bats::cli
