#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dymon/csv.hpp"

// Path to the built executable, injected by the build.
#ifndef DYMON_CLI_PATH
#error "DYMON_CLI_PATH must be defined"
#endif

namespace {

int run_cli(const std::string& args) {
  const std::string cmd =
      std::string(DYMON_CLI_PATH) + " " + args + " > cli_stdout.txt 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char ch : text)
    if (ch == '\n') ++n;
  return n;
}

}  // namespace

TEST_CASE("missing arguments and unknown subcommands exit with code 2") {
  CHECK(run_cli("") == 2);
  write_file("cli_empty.cfg", "");
  CHECK(run_cli("frobnicate cli_empty.cfg") == 2);
}

TEST_CASE("missing config file exits with the I/O code") {
  CHECK(run_cli("simulate no_such_config.cfg") == 3);
}

TEST_CASE("simulate pendulum writes steps plus header rows") {
  write_file("cli_sim.cfg",
             "system = pendulum\n"
             "output = cli_pendulum.csv\n");
  REQUIRE(run_cli("simulate cli_sim.cfg") == 0);
  const std::string csv = read_file("cli_pendulum.csv");
  CHECK(count_lines(csv) == 1001);  // header + 1000 states
  const auto first = dymon::detail::csv_lines(csv).front();
  CHECK(first == "t,x0,x1");
}

TEST_CASE("simulate is byte-reproducible across runs") {
  write_file("cli_sim_a.cfg",
             "system = gmm_mcmc\nn = 2000\noutput = cli_gmm_a.csv\nseed = 9\n");
  write_file("cli_sim_b.cfg",
             "system = gmm_mcmc\nn = 2000\noutput = cli_gmm_b.csv\nseed = 9\n");
  REQUIRE(run_cli("simulate cli_sim_a.cfg") == 0);
  REQUIRE(run_cli("simulate cli_sim_b.cfg") == 0);
  CHECK(read_file("cli_gmm_a.csv") == read_file("cli_gmm_b.csv"));
}

TEST_CASE("simulate rejects an unknown system with exit code 2") {
  write_file("cli_bad_system.cfg",
             "system = lorenz\noutput = x.csv\n");
  CHECK(run_cli("simulate cli_bad_system.cfg") == 2);
}

TEST_CASE("unknown config keys are rejected with exit code 2") {
  write_file("cli_typo.cfg",
             "system = pendulum\noutput = x.csv\nstpes = 100\n");
  CHECK(run_cli("simulate cli_typo.cfg") == 2);
}

TEST_CASE("train rejects zero epochs with exit code 2") {
  write_file("cli_sim_short.cfg",
             "system = pendulum\nsteps = 50\noutput = cli_short.csv\n");
  REQUIRE(run_cli("simulate cli_sim_short.cfg") == 0);
  write_file("cli_bt_short.cfg",
             "input = cli_short.csv\noutput = cli_short_trans.csv\n");
  REQUIRE(run_cli("build-transitions cli_bt_short.cfg") == 0);
  write_file("cli_train_zero.cfg",
             "transitions = cli_short_trans.csv\n"
             "output_model = m.ckpt\nepochs = 0\nhidden = 4\n");
  CHECK(run_cli("train cli_train_zero.cfg") == 2);
}

TEST_CASE("end-to-end pipeline: simulate, build, train, generate, eval") {
  write_file("cli_e2e_sim.cfg",
             "system = pendulum\nsteps = 200\ntheta0 = 1.5\n"
             "output = cli_e2e.csv\n");
  REQUIRE(run_cli("simulate cli_e2e_sim.cfg") == 0);

  write_file("cli_e2e_bt.cfg",
             "input = cli_e2e.csv\norder = 2\n"
             "output = cli_e2e_trans.csv\n");
  REQUIRE(run_cli("build-transitions cli_e2e_bt.cfg") == 0);
  const auto ds = dymon::read_transitions_csv("cli_e2e_trans.csv");
  CHECK(ds.order == 2);
  CHECK(ds.groups.size() == 198);

  write_file("cli_e2e_train.cfg",
             "transitions = cli_e2e_trans.csv\n"
             "output_model = cli_e2e.ckpt\n"
             "output_loss = cli_e2e_loss.csv\n"
             "epochs = 5\nhidden = 8\nnoise_dim = 0\nm_generated = 2\n"
             "max_groups = 40\nseed = 1\n");
  REQUIRE(run_cli("train cli_e2e_train.cfg") == 0);
  const std::string loss = read_file("cli_e2e_loss.csv");
  CHECK(count_lines(loss) == 6);  // header + 5 epochs
  CHECK(dymon::detail::csv_lines(loss).front() == "epoch,mean_mmd2,seconds");

  write_file("cli_e2e_gen.cfg",
             "model = cli_e2e.ckpt\nsteps = 30\n"
             "init_from = cli_e2e.csv\ninit_index = 0\n"
             "output = cli_e2e_gen.csv\nseed = 2\n");
  REQUIRE(run_cli("generate cli_e2e_gen.cfg") == 0);
  const auto gen = dymon::read_trajectory_csv("cli_e2e_gen.csv");
  CHECK(gen.states.rows() == 32);  // order 2 + 30 generated
  CHECK(gen.states.cols() == 2);
  CHECK(gen.states.all_finite());

  // generation is reproducible byte for byte
  write_file("cli_e2e_gen2.cfg",
             "model = cli_e2e.ckpt\nsteps = 30\n"
             "init_from = cli_e2e.csv\ninit_index = 0\n"
             "output = cli_e2e_gen2.csv\nseed = 2\n");
  REQUIRE(run_cli("generate cli_e2e_gen2.cfg") == 0);
  CHECK(read_file("cli_e2e_gen2.csv") == read_file("cli_e2e_gen.csv"));

  write_file("cli_e2e_mse.cfg",
             "metric = mse\na = cli_e2e_gen.csv\nb = cli_e2e_gen2.csv\n"
             "output = cli_e2e_mse.csv\n");
  REQUIRE(run_cli("eval cli_e2e_mse.cfg") == 0);
  const auto mse_lines =
      dymon::detail::csv_lines(read_file("cli_e2e_mse.csv"));
  REQUIRE(mse_lines.size() == 2);
  CHECK(mse_lines[0] == "metric,value");
  CHECK(mse_lines[1] == "mse,0");

  write_file("cli_e2e_jac.cfg",
             "model = cli_e2e.ckpt\ninput = cli_e2e.csv\n"
             "indices = 1,5\noutput = cli_e2e_jac.csv\n");
  REQUIRE(run_cli("jacobian cli_e2e_jac.cfg") == 0);
  const auto jac_lines =
      dymon::detail::csv_lines(read_file("cli_e2e_jac.csv"));
  REQUIRE(jac_lines.size() == 5);  // header + 2 points x 2 rows
  CHECK(jac_lines[0] == "point,row,c0,c1");

  // finite-difference cross-check through the CLI path
  write_file("cli_e2e_jac_fd.cfg",
             "model = cli_e2e.ckpt\ninput = cli_e2e.csv\n"
             "indices = 1,5\noutput = cli_e2e_jac_fd.csv\n");
  REQUIRE(run_cli("jacobian cli_e2e_jac_fd.cfg --method fd") == 0);
  const auto fd_lines =
      dymon::detail::csv_lines(read_file("cli_e2e_jac_fd.csv"));
  REQUIRE(fd_lines.size() == jac_lines.size());
  for (std::size_t li = 1; li < jac_lines.size(); ++li) {
    const auto a = dymon::detail::split_csv_line(jac_lines[li]);
    const auto b = dymon::detail::split_csv_line(fd_lines[li]);
    for (std::size_t k = 2; k < a.size(); ++k) {
      const double va = std::stod(a[k]);
      const double vb = std::stod(b[k]);
      CHECK(std::fabs(va - vb) < 1e-4 * std::max(1.0, std::fabs(va)));
    }
  }
}

TEST_CASE("eval emd and the assert-below gate") {
  dymon::Rng rng(7);
  dymon::Trajectory a, b;
  a.states = dymon::Matrix(200, 1);
  b.states = dymon::Matrix(200, 1);
  for (std::size_t i = 0; i < 200; ++i) {
    a.states(i, 0) = rng.normal();
    b.states(i, 0) = rng.normal() + 3.0;  // shifted by 3
  }
  dymon::write_trajectory_csv(a, "cli_emd_a.csv");
  dymon::write_trajectory_csv(b, "cli_emd_b.csv");
  write_file("cli_emd.cfg",
             "metric = emd\na = cli_emd_a.csv\nb = cli_emd_b.csv\n"
             "output = cli_emd_out.csv\n");
  REQUIRE(run_cli("eval cli_emd.cfg") == 0);
  const auto lines = dymon::detail::csv_lines(read_file("cli_emd_out.csv"));
  REQUIRE(lines.size() == 2);
  const double v = std::stod(dymon::detail::split_csv_line(lines[1])[1]);
  CHECK(std::fabs(v - 3.0) < 0.5);
  // gate passes above, fails below
  CHECK(run_cli("eval cli_emd.cfg --assert-below 10.0") == 0);
  CHECK(run_cli("eval cli_emd.cfg --assert-below 0.5") == 5);
}

TEST_CASE("eval cycle reports the graph structure of a circle") {
  dymon::Trajectory circle;
  circle.states = dymon::Matrix(48, 2);
  for (std::size_t i = 0; i < 48; ++i) {
    const double th = 2.0 * 3.14159265358979323846 * i / 48;
    circle.states(i, 0) = std::cos(th);
    circle.states(i, 1) = std::sin(th);
  }
  dymon::write_trajectory_csv(circle, "cli_circle.csv");
  write_file("cli_cycle.cfg",
             "metric = cycle\na = cli_circle.csv\n"
             "output = cli_cycle_out.csv\n");
  REQUIRE(run_cli("eval cli_cycle.cfg") == 0);
  const std::string out = read_file("cli_cycle_out.csv");
  CHECK(out.find("is_single_cycle,1\n") != std::string::npos);
  CHECK(out.find("degree2,48\n") != std::string::npos);
}

TEST_CASE("generate rejects a malformed init vector") {
  write_file("cli_gen_bad.cfg",
             "model = cli_e2e.ckpt\nsteps = 5\ninit = 1.0\n"
             "output = x.csv\n");
  // cli_e2e.ckpt has order 2 and dim 2; a single value cannot initialize it
  CHECK(run_cli("generate cli_gen_bad.cfg") == 2);
}

TEST_CASE("corrupt checkpoints are rejected with exit code 2") {
  write_file("cli_corrupt.ckpt", "dymon-checkpoint v1\narch 7\n");
  write_file("cli_gen_corrupt.cfg",
             "model = cli_corrupt.ckpt\nsteps = 5\ninit = 0\noutput = x.csv\n");
  CHECK(run_cli("generate cli_gen_corrupt.cfg") == 2);
}

TEST_CASE("invalid DYMON_THREADS is rejected") {
  write_file("cli_threads.cfg", "system = pendulum\noutput = t.csv\n");
  const std::string cmd = std::string("DYMON_THREADS=zero ") +
                          DYMON_CLI_PATH +
                          " simulate cli_threads.cfg > /dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 2);
  const std::string ok = std::string("DYMON_THREADS=1 ") + DYMON_CLI_PATH +
                         " simulate cli_threads.cfg > /dev/null 2>&1";
  CHECK(WEXITSTATUS(std::system(ok.c_str())) == 0);
}
