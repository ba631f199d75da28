#include "batsrelay/config.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <string>

#include "batsrelay/errors.hpp"

namespace bats {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view text) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) {
    throw ConfigError("invalid value '" + std::string(text) + "' for " + std::string(key));
  }
  return value;
}

}  // namespace

IdleMethod parse_idle_method(std::string_view text) {
  if (text == "markov") return IdleMethod::markov;
  if (text == "mc" || text == "monte_carlo") return IdleMethod::monte_carlo;
  throw ConfigError("d_method must be 'markov' or 'mc', got '" + std::string(text) + "'");
}

std::string_view to_string(IdleMethod method) {
  return method == IdleMethod::markov ? "markov" : "mc";
}

void apply_setting(RunConfig& c, std::string_view key, std::string_view value) {
  if (key == "F") {
    c.F = parse_number<std::int64_t>(key, value);
  } else if (key == "M") {
    c.M = parse_number<int>(key, value);
  } else if (key == "omega") {
    c.omega = parse_number<double>(key, value);
  } else if (key == "p_sr") {
    c.p_sr = parse_number<double>(key, value);
  } else if (key == "p_rd") {
    c.p_rd = parse_number<double>(key, value);
  } else if (key == "p_sd") {
    c.p_sd = parse_number<double>(key, value);
  } else if (key == "t_max") {
    c.t_max = parse_number<int>(key, value);
  } else if (key == "grid_step") {
    c.grid_step = parse_number<double>(key, value);
  } else if (key == "epsilon_edge") {
    c.epsilon_edge = parse_number<double>(key, value);
  } else if (key == "trials") {
    c.trials = parse_number<std::int64_t>(key, value);
  } else if (key == "seed") {
    c.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "d_method") {
    c.d_method = parse_idle_method(value);
  } else if (key == "output_path") {
    c.output_path = std::string(value);
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

void load_config(RunConfig& config, std::istream& in, std::string_view origin) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(number) + ": expected key=value");
    }
    try {
      apply_setting(config, trim(view.substr(0, eq)), trim(view.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(origin) + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

void load_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  load_config(config, in, path);
}

ChannelSpec RunConfig::channel() const { return ChannelSpec{M, omega, p_sr, p_rd, p_sd}; }

IdleOptions RunConfig::idle_options() const {
  IdleOptions o = default_idle_options(channel());
  if (d_method) o.method = *d_method;
  o.trials = trials;
  o.seed = seed.value_or(0);
  return o;
}

OptimizerOptions RunConfig::optimizer_options() const {
  OptimizerOptions o;
  o.grid_step = grid_step;
  o.epsilon_edge = epsilon_edge;
  o.idle = idle_options();
  return o;
}

RankEnvironment RunConfig::environment() const {
  const ChannelSpec spec = channel();
  return t_max > 0 ? build_environment(spec, t_max) : build_environment(spec);
}

void RunConfig::validate() const {
  try {
    channel().validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (F < 1) throw ConfigError("F must be >= 1");
  if (t_max < 0) throw ConfigError("t_max must be >= 0 (0 selects the default)");
  if (!(grid_step > 0.0)) throw ConfigError("grid_step must be > 0");
  if (!(epsilon_edge > 0.0)) throw ConfigError("epsilon_edge must be > 0");
  if (trials < 1) throw ConfigError("trials must be >= 1");
  if (d_method == IdleMethod::markov && !channel().omega_is_integer()) {
    throw ConfigError("d_method=markov needs an integer omega");
  }
}

}  // namespace bats
