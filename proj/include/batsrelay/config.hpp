#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "batsrelay/channel.hpp"
#include "batsrelay/efficiency.hpp"

namespace bats {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything a CLI run needs. Precedence: flags > config file > defaults.
struct RunConfig {
  std::int64_t F = 100;
  int M = 8;
  double omega = 1.0;
  double p_sr = 0.2;
  double p_rd = 0.2;
  double p_sd = 0.8;
  int t_max = 0;  // 0: default_t_max
  double grid_step = 0.01;
  double epsilon_edge = 1e-6;
  std::int64_t trials = 100000;
  std::optional<std::uint64_t> seed;
  std::optional<IdleMethod> d_method;  // unset: markov for integer omega
  std::string output_path;

  ChannelSpec channel() const;
  IdleOptions idle_options() const;
  OptimizerOptions optimizer_options() const;
  RankEnvironment environment() const;

  /// Throws ConfigError.
  void validate() const;
};

/// Apply one `key=value` setting; keys are RunConfig field names.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Flat key=value text; '#' starts a comment. Throws ConfigError.
void load_config(RunConfig& config, std::istream& in, std::string_view origin = "<config>");
void load_config_file(RunConfig& config, const std::string& path);

IdleMethod parse_idle_method(std::string_view text);
std::string_view to_string(IdleMethod method);

}  // namespace bats
