#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "app.hpp"
#include "batsrelay/config.hpp"
#include "batsrelay/errors.hpp"
#include "commands.hpp"

using namespace bats;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "batsrelay");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  Outcome o;
  o.code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

fs::path scratch_dir() {
  const auto dir = fs::temp_directory_path() / ("batsrelay_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::string column(const std::string& line, int index) {
  std::istringstream in(line);
  std::string cell;
  for (int i = 0; i <= index; ++i) std::getline(in, cell, ',');
  return cell;
}

}  // namespace

TEST_CASE("config file parsing") {
  RunConfig c;
  std::istringstream in(
      "# evaluation setting\n"
      "F = 256\n"
      "M=16   # batch size\n"
      "\n"
      "p_sd = 0.7\n"
      "d_method = mc\n"
      "seed = 42\n");
  load_config(c, in);
  CHECK(c.F == 256);
  CHECK(c.M == 16);
  CHECK(c.p_sd == 0.7);
  CHECK(c.d_method == IdleMethod::monte_carlo);
  CHECK(c.seed == 42u);
  CHECK(c.p_sr == 0.2);

  RunConfig bad;
  std::istringstream unknown("batch_size = 8\n");
  CHECK_THROWS_AS(load_config(bad, unknown), ConfigError);
  std::istringstream junk("F = 10x\n");
  CHECK_THROWS_AS(load_config(bad, junk), ConfigError);
  std::istringstream no_eq("F 10\n");
  CHECK_THROWS_AS(load_config(bad, no_eq), ConfigError);
  CHECK_THROWS_AS(apply_setting(bad, "d_method", "exact"), ConfigError);
}

TEST_CASE("config validation") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  c.p_sd = 1.2;
  CHECK_THROWS(c.validate());
  c = RunConfig{};
  c.F = 0;
  CHECK_THROWS(c.validate());
  c = RunConfig{};
  c.grid_step = 0.0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("flags override the config file, which overrides defaults") {
  const auto dir = scratch_dir();
  const auto cfg = dir / "run.cfg";
  write_file(cfg, "M = 4\nF = 64\n");
  const auto from_file = run({"upper-bound", "--config", cfg.string()});
  CHECK(from_file.code == 0);
  CHECK(from_file.out.find("M = 4,") != std::string::npos);
  const auto flag_wins = run({"upper-bound", "--config", cfg.string(), "--M", "6"});
  CHECK(flag_wins.code == 0);
  CHECK(flag_wins.out.find("M = 6,") != std::string::npos);
  const auto defaults = run({"upper-bound"});
  CHECK(defaults.out.find("M = 8,") != std::string::npos);
  // Flags may also follow the subcommand.
  CHECK(run({"upper-bound", "--M", "5"}).out.find("M = 5,") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("exit codes") {
  CHECK(run({}).code == cli::kUsage);
  CHECK(run({"nonsense"}).code == cli::kUsage);
  CHECK(run({"optimize", "--p-sd", "1.5"}).code == cli::kUsage);
  CHECK(run({"optimize", "--d-method", "exact"}).code == cli::kUsage);
  CHECK(run({"simulate", "--runs", "3"}).code == cli::kUsage);
  CHECK(run({"idle"}).code == cli::kUsage);
  CHECK(run({"optimize", "--d-method", "mc"}).code == cli::kUsage);
  CHECK(run({"optimize", "--config", "/nonexistent/run.cfg"}).code == cli::kUsage);
  CHECK(run({"idle", "--omega", "1.5", "--d-method", "markov", "--seed", "1"}).code == cli::kUsage);
  CHECK(run({"--help"}).code == 0);

  const auto dir = scratch_dir();
  const auto cfg = dir / "bad.cfg";
  write_file(cfg, "colour = blue\n");
  const auto o = run({"optimize", "--config", cfg.string()});
  CHECK(o.code == cli::kUsage);
  CHECK(o.err.find("colour") != std::string::npos);

  // Unwritable output path is a runtime failure.
  CHECK(run({"sweep", "--out", (dir / "missing" / "x.csv").string()}).code == cli::kRuntime);
  fs::remove_all(dir);
}

TEST_CASE("optimize output and CSV") {
  const auto dir = scratch_dir();
  const auto csv = dir / "opt.csv";
  const auto o = run({"optimize", "--F", "100", "--out", csv.string()});
  REQUIRE(o.code == 0);
  CHECK(o.out.find("time eff.") != std::string::npos);
  const auto lines = csv_lines(read_file(csv));
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == "F,M,B,D_over_B,tavg,eff,upper_bound");
  CHECK(column(lines[1], 2) == "16");
  CHECK(std::stod(column(lines[1], 5)) <= std::stod(column(lines[1], 6)));
  fs::remove_all(dir);
}

TEST_CASE("sweep CSV; the source-side column does not depend on F") {
  const auto a = run({"sweep", "--F", "100", "--tavg-min", "1", "--tavg-max", "12"});
  const auto b = run({"sweep", "--F", "512", "--tavg-min", "1", "--tavg-max", "12"});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  const auto la = csv_lines(a.out);
  const auto lb = csv_lines(b.out);
  REQUIRE(la.size() == 1102);  // header + 1101 grid points
  REQUIRE(la.size() == lb.size());
  CHECK(la[0] == "tavg,eff1,eff2,E,B,D_over_B");
  for (std::size_t i = 1; i < la.size(); ++i) {
    CHECK(column(la[i], 2) == column(lb[i], 2));
    CHECK(std::stod(column(la[i], 1)) >= 0.0);
  }
  CHECK(run({"sweep", "--tavg-min", "5", "--tavg-max", "2"}).code == cli::kUsage);
}

TEST_CASE("repeated runs produce identical bytes") {
  const auto dir = scratch_dir();
  const auto t1 = dir / "t1.csv";
  const auto t2 = dir / "t2.csv";
  const auto s1 = run({"simulate", "--runs", "20", "--seed", "7", "--out", t1.string()});
  const auto s2 = run({"simulate", "--runs", "20", "--seed", "7", "--out", t2.string()});
  REQUIRE(s1.code == 0);
  CHECK(s1.out == s2.out);
  const auto trace = read_file(t1);
  CHECK(trace == read_file(t2));
  CHECK(csv_lines(trace).front() == "run,batch,innov_rank,sent,received,sink_rank,idle_before,relay_start,relay_finish");
  CHECK(run({"simulate", "--runs", "20", "--seed", "8"}).out != s1.out);

  const auto i1 = run({"idle", "--seed", "3", "--trials", "20000"});
  const auto i2 = run({"idle", "--seed", "3", "--trials", "20000"});
  REQUIRE(i1.code == 0);
  CHECK(i1.out == i2.out);

  const std::vector<std::string> mc_sweep{"sweep", "--d-method", "mc", "--trials", "2000", "--seed",
                                          "11", "--tavg-min", "6", "--tavg-max", "7"};
  const auto w1 = run(mc_sweep);
  const auto w2 = run(mc_sweep);
  REQUIRE(w1.code == 0);
  CHECK(w1.out == w2.out);
  fs::remove_all(dir);
}

TEST_CASE("scheme files") {
  const auto dir = scratch_dir();
  const auto path = dir / "scheme.txt";
  write_file(path, "0, 1, 2, 3, 4, 5, 6, 7, 8\n");
  const auto env = RunConfig{}.environment();
  const auto s = cli::load_scheme_file(path.string(), env);
  REQUIRE(s.t.size() == 9);
  CHECK(s.t[5] == 5.0);
  double mass = 0.0;
  for (int r = 0; r <= 8; ++r) mass += env.h(r) * r;
  CHECK(s.t_avg == doctest::Approx(mass).epsilon(1e-12));
  CHECK(s.sink_rank_mean == doctest::Approx(sink_rank(env, s.t)).epsilon(1e-12));

  const auto o = run({"idle", "--seed", "1", "--trials", "5000", "--scheme-file", path.string()});
  CHECK(o.code == 0);
  CHECK(o.out.find("markov") != std::string::npos);

  write_file(path, "1 2 3\n");
  CHECK_THROWS(cli::load_scheme_file(path.string(), env));
  CHECK(run({"idle", "--seed", "1", "--scheme-file", path.string()}).code == cli::kUsage);
  write_file(path, "0 1 2 3 x 5 6 7 8\n");
  CHECK_THROWS(cli::load_scheme_file(path.string(), env));
  fs::remove_all(dir);
}

TEST_CASE("number formatting") {
  CHECK(cli::format_full(0.1) == "0.1");
  CHECK(cli::format_full(7.03) == "7.03");
  CHECK(std::stod(cli::format_full(1.0 / 3.0)) == 1.0 / 3.0);
  CHECK(cli::format_fixed(0.76749, 4) == "0.7675");
  CHECK(cli::format_fixed(2.0, 2) == "2.00");
}
