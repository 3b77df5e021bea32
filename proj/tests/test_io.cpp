#include "doctest.h"

#include "lpvmpc/io.hpp"

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

using namespace lpvmpc;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "lpvmpc_test_io";
  fs::create_directories(dir);
  return dir / name;
}

const std::string kModel = std::string(LPVMPC_DATA_DIR) + "/disc_model.json";

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "lpvmpc");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("doubles survive the CSV format") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-1e3, 1e3);
  for (int i = 0; i < 1000; ++i) {
    const double v = d(rng) * std::pow(10.0, i % 7 - 3);
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
  CHECK(format_double(0.1) == "0.10000000000000001");
}

TEST_CASE("dataset round trip") {
  MultisineConfig m;
  m.samples = 500;
  m.components = 80;
  m.seed = 3;
  SimSettings s;
  s.seed = 4;
  const Dataset d = simulate(UnbalancedDisc{}, multisine(m), s);
  const fs::path csv = scratch("data.csv");
  write_dataset(d, csv, sidecar_path(csv), s.snr_db);
  CHECK(sidecar_path(csv).filename() == "data.json");

  const Dataset r = read_dataset(csv, sidecar_path(csv));
  CHECK(r.u == d.u);
  CHECK(r.y == d.y);
  CHECK(r.Ts == d.Ts);
  CHECK(r.seed == d.seed);
  CHECK(r.noise_std == d.noise_std);
  CHECK(r.est_end == d.est_end);
  CHECK(r.val_end == d.val_end);

  std::ifstream meta(sidecar_path(csv));
  const json j = json::parse(meta);
  CHECK(j.at("snr_db").get<double>() == 30.0);
  CHECK(j.at("snr_db_measured").get<double>() == doctest::Approx(30.0).epsilon(0.05));

  // without the sidecar the default split applies
  const Dataset bare = read_dataset(csv);
  CHECK(bare.est_end == 300);
  CHECK(bare.val_end == 400);
}

TEST_CASE("multi-channel datasets use numbered columns") {
  Dataset d;
  d.u = Matrix::Random(2, 20);
  d.y = Matrix::Random(3, 20);
  d.set_default_split();
  const fs::path csv = scratch("multi.csv");
  write_dataset(d, csv, sidecar_path(csv));
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "k,u1,u2,y1,y2,y3");
  const Dataset r = read_dataset(csv, sidecar_path(csv));
  CHECK(r.u == d.u);
  CHECK(r.y == d.y);
}

TEST_CASE("malformed CSV files are schema errors") {
  const fs::path bad = scratch("bad.csv");
  write_text(bad, "k,u,y\n0,1.0,abc\n");
  CHECK_THROWS_AS(read_dataset(bad), SchemaError);
  write_text(bad, "k,u,y\n0,1.0\n");
  CHECK_THROWS_AS(read_dataset(bad), SchemaError);
  write_text(bad, "k,u,z\n0,1.0,2.0\n");
  CHECK_THROWS_AS(read_dataset(bad), SchemaError);
  CHECK_THROWS_AS(read_dataset(scratch("missing.csv")), ConfigError);
}

TEST_CASE("trajectory CSV columns and round trip") {
  TrajectoryLog log;
  for (Index k = 0; k < 3; ++k) {
    LogRow row;
    row.k = k;
    row.r = Vector::Constant(1, 0.5);
    row.y = Vector::Constant(1, 0.1 * static_cast<double>(k));
    row.u = Vector::Constant(1, -1.0 / 3.0);
    row.x_hat = (Vector(2) << 1.0 / 7.0, -2.5).finished();
    row.record.iterations = static_cast<int>(k) + 1;
    row.record.residuals = {1.0, 0.05};
    row.record.t_convert_ms = 2.0;
    row.record.t_qp_ms = 0.5;
    row.record.t_total_ms = 3.0;
    log.rows.push_back(row);
  }
  const fs::path csv = scratch("traj.csv");
  write_trajectory(log, csv);
  const CsvTable t = read_csv(csv);
  CHECK(t.header == std::vector<std::string>{"k", "r", "y", "u", "xhat1", "xhat2", "inner_iters", "conv_residual",
                                             "t_convert_ms", "t_qp_ms", "t_total_ms"});
  REQUIRE(t.rows() == 3);
  CHECK(t.column("u")[1] == -1.0 / 3.0);
  CHECK(t.column("xhat1")[2] == 1.0 / 7.0);
  CHECK(t.column("y")[2] == 0.2);
  CHECK(t.column("inner_iters") == std::vector<double>{1, 2, 3});
  CHECK(t.column("conv_residual")[0] == 0.05);
  CHECK_THROWS_AS(t.column("nope"), SchemaError);
}

TEST_CASE("bench summary statistics and JSON round trip") {
  TrajectoryLog log;
  const std::vector<int> iters{1, 1, 2, 1, 3, 1, 2};
  for (std::size_t k = 0; k < iters.size(); ++k) {
    LogRow row;
    row.record.iterations = iters[k];
    row.record.converged = k != 4;
    row.record.t_total_ms = 1.0 + static_cast<double>(k);
    row.record.t_convert_ms = 0.5 * static_cast<double>(k);
    row.record.t_qp_ms = 0.25;
    log.rows.push_back(row);
  }
  const BenchSummary s = summarize(log);
  CHECK(s.steps == 7);
  CHECK(s.iteration_histogram.at(1) == 4);
  CHECK(s.iteration_histogram.at(2) == 2);
  CHECK(s.iteration_histogram.at(3) == 1);
  CHECK(s.mode_iterations == 1);
  CHECK(s.median_iterations == 1.0);
  CHECK(s.max_iterations == 3);
  CHECK(s.unconverged_steps == 1);
  CHECK(s.total.max == 7.0);
  CHECK(s.total.mean == doctest::Approx(4.0));
  CHECK(s.total.std == doctest::Approx(std::sqrt(28.0 / 6.0)));
  CHECK(s.solve.std == 0.0);
  for (const auto* t : {&s.total, &s.convert, &s.solve}) {
    CHECK(t->max >= t->mean);
    CHECK(t->mean >= 0.0);
  }

  const BenchSummary r = summary_from_json(json::parse(summary_to_json(s).dump()));
  CHECK(r.iteration_histogram == s.iteration_histogram);
  CHECK(r.total.std == s.total.std);
  CHECK(r.median_iterations == s.median_iterations);
  CHECK(r.mode_iterations == s.mode_iterations);
  CHECK_THROWS_AS(summary_from_json(json{{"steps", 1}}), SchemaError);
}

TEST_CASE("config defaults round trip and unknown keys are rejected") {
  const RunConfig defaults;
  const json j = config_to_json(defaults);
  const RunConfig back = config_from_json(j);
  CHECK(config_to_json(back) == j);

  json unknown = j;
  unknown["controller"]["horizonn"] = 3;
  CHECK_THROWS_AS(config_from_json(unknown), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"extra", json::object()}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"trainer", {{"epochs", "many"}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"controller", {{"mode", "secant"}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(json{{"trainer", {{"truncation", 1}}}}), ConfigError);

  const RunConfig hard = config_from_json(json{{"controller", {{"slack_penalty", nullptr}}}});
  CHECK(!hard.slack_penalty);
  CHECK_THROWS_AS(RunConfig{}.controller(3, 1, 1), ConfigError);
  const ControllerConfig cc = RunConfig{}.controller(2, 1, 1);
  CHECK(cc.weights.Q.front()(0, 0) == 1e3);
  CHECK(cc.box.u_max(0) == 4.0);
}

TEST_CASE("checked-in disc config loads") {
  const RunConfig c = load_config(fs::path(LPVMPC_DATA_DIR).parent_path() / "configs" / "disc.json");
  CHECK(c.scenario.steps() == 450);
  CHECK(c.trainer.epochs == 50);
  CHECK(c.excitation.samples == 20000);
}

TEST_CASE("bench_compare on identical modes gives zero difference") {
  const AnnSsModel model = load_model(kModel);
  Scenario sc;
  sc.levels = {0.3, -0.2};
  sc.hold = 15;
  const RunConfig cfg;
  const ControllerConfig cc = cfg.controller(model.nx(), model.nu(), model.ny());
  const BenchComparison same =
      bench_compare(model, cfg.disc, cfg.sim.Ts, sc, cc, ConversionMode::Ftc, ConversionMode::Ftc);
  CHECK(same.max_output_difference == 0.0);
  CHECK(same.max_input_difference == 0.0);
  CHECK(same.reference_amplitude == 0.3);
  CHECK(same.first.steps == 30);
  for (const auto* t : {&same.first.total, &same.first.convert, &same.first.solve}) {
    CHECK(t->max >= t->mean);
    CHECK(t->mean >= 0.0);
  }
}

TEST_CASE("command line: help, bad flags and exit codes") {
  CHECK(cli({"--help"}) == kExitOk);
  CHECK(cli({"mpc-run", "--help"}) == kExitOk);
  CHECK(cli({}) == kExitConfig);
  CHECK(cli({"mpc-run", "--no-such-flag"}) == kExitConfig);
  CHECK(cli({"fly"}) == kExitConfig);
  CHECK(cli({"mpc-run", "-m", scratch("absent.json").string()}) == kExitConfig);
  CHECK(cli({"mpc-run", "-m", kModel, "--mode", "secant"}) == kExitConfig);

  const fs::path bad_cfg = scratch("bad_cfg.json");
  write_text(bad_cfg, R"({"controller": {"horizon": 10, "colour": "red"}})");
  CHECK(cli({"mpc-run", "-c", bad_cfg.string(), "-m", kModel}) == kExitConfig);

  // a disc with an absurd motor gain blows up the integrator
  const fs::path blow = scratch("blow.json");
  write_text(blow, R"({"plant": {"Km": 1e300, "samples": 200, "components": 10}})");
  CHECK(cli({"simulate-plant", "-c", blow.string(), "-o", scratch("blow.csv").string()}) == kExitNumerical);

  // hard output bounds far inside the noise level leave the QP without a feasible point
  const fs::path tight = scratch("tight.json");
  write_text(tight, R"({"controller": {"slack_penalty": null, "u_abs": 1e-9, "y_abs": 1e-9}})");
  CHECK(cli({"mpc-run", "-c", tight.string(), "-m", kModel, "--steps", "5", "--out-dir",
             scratch("tight").string()}) == kExitQp);
}

TEST_CASE("command line binary prints usage") {
  const std::string cmd = std::string("\"") + LPVMPC_CLI_PATH + "\" --help > " + scratch("help.txt").string();
  CHECK(std::system(cmd.c_str()) == 0);
  std::ifstream in(scratch("help.txt"));
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str().find("mpc-run") != std::string::npos);
  CHECK(ss.str().find("bench") != std::string::npos);
}

TEST_CASE("pipeline stages through the command line") {
  const fs::path dir = scratch("pipeline");
  const std::string data = (dir / "d.csv").string();
  REQUIRE(cli({"simulate-plant", "-o", data, "--samples", "1500", "--components", "250", "--seed", "5"}) == kExitOk);
  const Dataset d = read_dataset(data, sidecar_path(data));
  CHECK(d.size() == 1500);
  CHECK(d.seed == 5);

  const std::string model = (dir / "m.json").string();
  REQUIRE(cli({"train", "-d", data, "-o", model, "--epochs", "1", "--nodes", "8", "--truncation", "10"}) == kExitOk);
  CHECK(fs::exists(dir / "m_report.json"));
  const AnnSsModel m = load_model(model);
  CHECK(m.nx() == 2);

  CHECK(cli({"convert", "-m", model, "--point", "0.1,-0.2,0.5"}) == kExitOk);
  CHECK(cli({"convert", "-m", model, "--point", "0.1,-0.2"}) == kExitConfig);
  CHECK(cli({"target", "-m", kModel, "-r", "0.3"}) == kExitOk);
  REQUIRE(cli({"mpc-run", "-m", kModel, "--steps", "20", "--out-dir", (dir / "run").string()}) == kExitOk);
  CHECK(read_csv(dir / "run" / "trajectory.csv").rows() == 20);
  std::ifstream sj(dir / "run" / "summary.json");
  CHECK(summary_from_json(json::parse(sj)).steps == 20);
}

TEST_CASE("bench on the checked-in model: single inner iteration dominates") {
  const fs::path dir = scratch("bench");
  REQUIRE(cli({"bench", "-m", kModel, "--out-dir", dir.string()}) == kExitOk);
  std::ifstream in(dir / "bench_summary.json");
  const json j = json::parse(in);
  const BenchSummary ftc = summary_from_json(j.at("ftc"));
  const BenchSummary jac = summary_from_json(j.at("jacobian"));
  CHECK(ftc.steps == 450);
  CHECK(ftc.mode_iterations == 1);
  CHECK(jac.mode_iterations == 1);
  CHECK(j.at("comparison").at("max_output_difference").get<double>() >= 0.0);
  CHECK(read_csv(dir / "bench_ftc.csv").rows() == 450);
  CHECK(read_csv(dir / "bench_jacobian.csv").rows() == 450);
}
