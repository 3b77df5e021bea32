#include "lpvmpc/io.hpp"
#include "lpvmpc/lpv.hpp"
#include "lpvmpc/model.hpp"
#include "lpvmpc/mpc.hpp"
#include "lpvmpc/target.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

namespace lpvmpc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vector to_vector(const std::vector<double>& v) {
  return v.empty() ? Vector() : Vector(Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size())));
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

// Flags write straight into the config JSON, so a flag and its config key
// always go through the same parser and validation.
class Overrides {
 public:
  template <typename T>
  CLI::Option* add(CLI::App* app, const std::string& flag, const std::string& section, const std::string& key,
                   const std::string& help) {
    return app->add_option_function<T>(
        flag, [this, section, key](const T& v) { patch_[section][key] = v; },
        help + " (" + section + "." + key + ")");
  }

  void set(const std::string& section, const std::string& key, json value) { patch_[section][key] = std::move(value); }

  json apply(json base) const {
    for (auto s = patch_.begin(); s != patch_.end(); ++s)
      for (auto k = s.value().begin(); k != s.value().end(); ++k) base[s.key()][k.key()] = k.value();
    return base;
  }

 private:
  json patch_ = json::object();
};

struct Common {
  std::string config_path;
  Overrides overrides;

  RunConfig load() const {
    json base = json::object();
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ConfigError("cannot read " + config_path);
      try {
        base = json::parse(in);
      } catch (const json::parse_error& e) {
        throw SchemaError(config_path + ": " + e.what());
      }
    }
    return config_from_json(overrides.apply(base));
  }
};

AnnSsModel load_model_checked(const std::string& path) {
  if (!fs::exists(path)) throw ConfigError("model file not found: " + path);
  return load_model(path);
}

int cmd_simulate_plant(const RunConfig& cfg) {
  const Matrix u = multisine(cfg.excitation);
  const Dataset data = simulate(cfg.disc, u, cfg.sim);
  const fs::path csv = cfg.data_path;
  write_dataset(data, csv, sidecar_path(csv), cfg.sim.snr_db);
  std::cout << "wrote " << data.size() << " samples to " << csv.string() << " (est_end " << data.est_end
            << ", val_end " << data.val_end << ", noise_std " << format_double(data.noise_std) << ")\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, const std::string& report_path) {
  const fs::path csv = cfg.data_path;
  if (!fs::exists(csv)) throw ConfigError("dataset not found: " + csv.string());
  const Dataset data = read_dataset(csv, sidecar_path(csv));
  TrainResult result = train(data, cfg.trainer);
  save_model(result.model, cfg.model_path);
  fs::path report = report_path;
  if (report.empty()) {
    report = cfg.model_path;
    report.replace_filename(report.stem().string() + "_report.json");
  }
  json r = report_to_json(result.report);
  r["config"] = config_to_json(cfg)["trainer"];
  write_json(report, r);
  std::cout << "best epoch " << result.report.best_epoch << ", validation NRMS "
            << format_double(result.report.best_val_nrms) << ", test NRMS " << format_double(result.report.test_nrms)
            << "\nmodel: " << cfg.model_path << "\nreport: " << report.string() << '\n';
  return kExitOk;
}

std::vector<SchedulingPoint> read_points(const AnnSsModel& model, const std::vector<double>& point,
                                         const std::string& points_csv) {
  const Index nx = model.nx(), nu = model.nu();
  std::vector<SchedulingPoint> points;
  if (!point.empty()) {
    if (static_cast<Index>(point.size()) != nx + nu)
      throw ArgumentError("--point needs nx + nu = " + std::to_string(nx + nu) + " values");
    const Vector p = to_vector(point);
    points.push_back({p.head(nx), p.tail(nu)});
  }
  if (!points_csv.empty()) {
    const CsvTable t = read_csv(points_csv);
    if (static_cast<Index>(t.header.size()) != nx + nu)
      throw SchemaError(points_csv + ": expected " + std::to_string(nx + nu) + " columns (x then u)");
    for (Index r = 0; r < t.rows(); ++r) {
      Vector p(nx + nu);
      for (Index c = 0; c < nx + nu; ++c) p(c) = t.columns[static_cast<std::size_t>(c)][static_cast<std::size_t>(r)];
      points.push_back({p.head(nx), p.tail(nu)});
    }
  }
  if (points.empty()) throw ArgumentError("convert needs --point or --points");
  return points;
}

int cmd_convert(const RunConfig& cfg, const std::vector<double>& point, const std::string& points_csv) {
  const AnnSsModel model = load_model_checked(cfg.model_path);
  const auto points = read_points(model, point, points_csv);
  ConversionConfig conv;
  conv.dlambda = cfg.dlambda;
  conv.mode = cfg.mode;
  conv.workers = cfg.workers;
  const auto lpv = convert_schedule(model, points, conv);
  json out = json::array();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto err = reconstruction_error(model, lpv[i], points[i].x, points[i].u);
    out.push_back({{"x", vector_json(points[i].x)},
                   {"u", vector_json(points[i].u)},
                   {"A", matrix_json(lpv[i].A)},
                   {"B", matrix_json(lpv[i].B)},
                   {"C", matrix_json(lpv[i].C)},
                   {"v", vector_json(lpv[i].v)},
                   {"w", vector_json(lpv[i].w)},
                   {"residual", {{"state", err.state}, {"output", err.output}}}});
  }
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

int cmd_target(const RunConfig& cfg, const std::vector<double>& r) {
  const AnnSsModel model = load_model_checked(cfg.model_path);
  const ControllerConfig cc = cfg.controller(model.nx(), model.nu(), model.ny());
  TargetProblem tp;
  tp.r = to_vector(r);
  if (tp.r.size() != model.ny()) throw ArgumentError("--r needs " + std::to_string(model.ny()) + " values");
  tp.box = cc.box;
  tp.conversion = cc.conversion;
  tp.qp = cc.qp;
  const TargetResult res = solve_target(model, tp, Vector::Zero(model.nx()), Vector::Zero(model.nu()));
  const json out = {{"r", vector_json(tp.r)},
                    {"x_ref", vector_json(res.x_ref)},
                    {"u_ref", vector_json(res.u_ref)},
                    {"converged", res.converged},
                    {"reachable", res.reachable},
                    {"iterations", res.iterations},
                    {"state_residual", res.state_residual},
                    {"output_residual", res.output_residual}};
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

fs::path in_dir(const RunConfig& cfg, const std::string& explicit_path, const std::string& name) {
  return explicit_path.empty() ? fs::path(cfg.out_dir) / name : fs::path(explicit_path);
}

int cmd_mpc_run(const RunConfig& cfg, const std::string& traj_path, const std::string& summary_path) {
  const AnnSsModel model = load_model_checked(cfg.model_path);
  const ControllerConfig cc = cfg.controller(model.nx(), model.nu(), model.ny());
  const auto t0 = std::chrono::steady_clock::now();
  const TrajectoryLog log = run_scenario(model, cfg.disc, cfg.sim.Ts, cfg.scenario, cc, cfg.steps);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const fs::path csv = in_dir(cfg, traj_path, "trajectory.csv");
  const fs::path summary = in_dir(cfg, summary_path, "summary.json");
  write_trajectory(log, csv);
  json s = summary_to_json(summarize(log));
  s["mode"] = to_string(cc.conversion.mode);
  s["wall_s"] = wall;
  write_json(summary, s);
  std::cout << s.dump(2) << '\n';
  return kExitOk;
}

int cmd_bench(const RunConfig& cfg) {
  const AnnSsModel model = load_model_checked(cfg.model_path);
  const ControllerConfig cc = cfg.controller(model.nx(), model.nu(), model.ny());
  const BenchComparison cmp = bench_compare(model, cfg.disc, cfg.sim.Ts, cfg.scenario, cc, ConversionMode::Ftc,
                                            ConversionMode::Jacobian, cfg.steps);
  const fs::path dir = cfg.out_dir;
  write_trajectory(cmp.first_log, dir / "bench_ftc.csv");
  write_trajectory(cmp.second_log, dir / "bench_jacobian.csv");
  const json out = {{"ftc", summary_to_json(cmp.first)},
                    {"jacobian", summary_to_json(cmp.second)},
                    {"comparison",
                     {{"max_output_difference", cmp.max_output_difference},
                      {"max_input_difference", cmp.max_input_difference},
                      {"reference_amplitude", cmp.reference_amplitude}}}};
  write_json(dir / "bench_summary.json", out);
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Neural state-space models to LPV form and iterative-QP MPC"};
  app.name("lpvmpc");
  app.require_subcommand(1);

  auto config_option = [](CLI::App* sub, Common& c) {
    sub->add_option("-c,--config", c.config_path, "JSON config with plant, trainer, controller and run sections")
        ->check(CLI::ExistingFile);
  };
  auto controller_flags = [](CLI::App* sub, Common& c) {
    c.overrides.add<std::string>(sub, "--mode", "controller", "mode", "ftc or jacobian");
    c.overrides.add<double>(sub, "--dlambda", "controller", "dlambda", "quadrature step");
    c.overrides.add<unsigned>(sub, "--workers", "controller", "workers", "conversion workers");
    c.overrides.add<Index>(sub, "--horizon", "controller", "horizon", "prediction horizon");
  };

  Common sim_c, train_c, conv_c, target_c, mpc_c, bench_c;
  std::string report_path, points_csv, traj_path, summary_path;
  std::vector<double> point, r;
  bool noiseless = false;

  auto* sim = app.add_subcommand("simulate-plant", "Simulate the disc under a multisine and write a dataset");
  config_option(sim, sim_c);
  sim_c.overrides.add<std::string>(sim, "-o,--out", "run", "data", "dataset CSV");
  sim_c.overrides.add<std::uint64_t>(sim, "--seed", "plant", "seed", "excitation and noise seed");
  sim_c.overrides.add<Index>(sim, "--samples", "plant", "samples", "number of samples");
  sim_c.overrides.add<Index>(sim, "--components", "plant", "components", "multisine components");
  sim_c.overrides.add<double>(sim, "--snr-db", "plant", "snr_db", "output SNR in dB");
  sim->add_flag("--noiseless", noiseless, "no measurement noise");

  auto* trn = app.add_subcommand("train", "Train an encoder-based state-space model on a dataset");
  config_option(trn, train_c);
  train_c.overrides.add<std::string>(trn, "-d,--data", "run", "data", "dataset CSV");
  train_c.overrides.add<std::string>(trn, "-o,--out", "run", "model", "model JSON to write");
  trn->add_option("--report", report_path, "report JSON (default: next to the model)");
  train_c.overrides.add<int>(trn, "--epochs", "trainer", "epochs", "training epochs");
  train_c.overrides.add<std::uint64_t>(trn, "--seed", "trainer", "seed", "initialization and shuffling seed");
  train_c.overrides.add<unsigned>(trn, "--workers", "trainer", "workers", "gradient workers");
  train_c.overrides.add<Index>(trn, "--nodes", "trainer", "nodes", "hidden layer width");
  train_c.overrides.add<Index>(trn, "--truncation", "trainer", "truncation", "rollout length T");
  train_c.overrides.add<double>(trn, "--lr", "trainer", "learning_rate", "Adam step size");

  auto* conv = app.add_subcommand("convert", "Print the LPV matrices of a model at scheduling points");
  config_option(conv, conv_c);
  conv_c.overrides.add<std::string>(conv, "-m,--model", "run", "model", "model JSON");
  conv->add_option("--point", point, "x then u, comma separated")->delimiter(',');
  conv->add_option("--points", points_csv, "CSV of points, columns x then u")->check(CLI::ExistingFile);
  controller_flags(conv, conv_c);

  auto* tgt = app.add_subcommand("target", "Steady-state target for an output setpoint");
  config_option(tgt, target_c);
  target_c.overrides.add<std::string>(tgt, "-m,--model", "run", "model", "model JSON");
  tgt->add_option("-r,--r", r, "output setpoint, comma separated")->delimiter(',')->required();
  controller_flags(tgt, target_c);

  auto* mpc = app.add_subcommand("mpc-run", "Closed-loop run of the disc scenario");
  config_option(mpc, mpc_c);
  mpc_c.overrides.add<std::string>(mpc, "-m,--model", "run", "model", "model JSON");
  mpc_c.overrides.add<std::string>(mpc, "--out-dir", "run", "out_dir", "output directory");
  mpc_c.overrides.add<Index>(mpc, "--steps", "run", "steps", "control steps (-1: whole scenario)");
  mpc_c.overrides.add<std::uint64_t>(mpc, "--seed", "run", "seed", "measurement noise seed");
  mpc_c.overrides.add<double>(mpc, "--noise-std", "run", "noise_std", "measurement noise std");
  mpc->add_option("--trajectory", traj_path, "trajectory CSV (default: out-dir/trajectory.csv)");
  mpc->add_option("--summary", summary_path, "summary JSON (default: out-dir/summary.json)");
  controller_flags(mpc, mpc_c);

  auto* bench = app.add_subcommand("bench", "Paired ftc and jacobian runs of the disc scenario");
  config_option(bench, bench_c);
  bench_c.overrides.add<std::string>(bench, "-m,--model", "run", "model", "model JSON");
  bench_c.overrides.add<std::string>(bench, "--out-dir", "run", "out_dir", "output directory");
  bench_c.overrides.add<Index>(bench, "--steps", "run", "steps", "control steps (-1: whole scenario)");
  bench_c.overrides.add<std::uint64_t>(bench, "--seed", "run", "seed", "measurement noise seed");
  bench_c.overrides.add<double>(bench, "--dlambda", "controller", "dlambda", "quadrature step");
  bench_c.overrides.add<unsigned>(bench, "--workers", "controller", "workers", "conversion workers");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (sim->parsed()) {
      if (noiseless) sim_c.overrides.set("plant", "snr_db", nullptr);
      return cmd_simulate_plant(sim_c.load());
    }
    if (trn->parsed()) return cmd_train(train_c.load(), report_path);
    if (conv->parsed()) return cmd_convert(conv_c.load(), point, points_csv);
    if (tgt->parsed()) return cmd_target(target_c.load(), r);
    if (mpc->parsed()) return cmd_mpc_run(mpc_c.load(), traj_path, summary_path);
    if (bench->parsed()) return cmd_bench(bench_c.load());
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const ArgumentError& e) {
    std::cerr << "argument error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const QpFailure& e) {
    std::cerr << "QP failure: " << e.what() << '\n';
    return kExitQp;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitConfig;
}

}  // namespace lpvmpc
