#include "lpvmpc/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace lpvmpc {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kDatasetSchemaVersion = 1;

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) {
    while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
    while (!field.empty() && field.front() == ' ') field.erase(field.begin());
    fields.push_back(field);
  }
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

double parse_double(const std::string& text, const fs::path& file, Index line) {
  const char* begin = text.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (text.empty() || end != begin + text.size())
    throw SchemaError(file.string() + ":" + std::to_string(line) + ": not a number: '" + text + "'");
  return v;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

// Names for a channel group: "u" when there is one channel, "u1".."un" otherwise.
std::vector<std::string> channel_names(const std::string& base, Index count) {
  std::vector<std::string> names;
  if (count == 1) return {base};
  for (Index i = 0; i < count; ++i) names.push_back(base + std::to_string(i + 1));
  return names;
}

bool is_channel(const std::string& name, const std::string& base) {
  if (name == base) return true;
  if (name.size() <= base.size() || name.compare(0, base.size(), base) != 0) return false;
  return std::all_of(name.begin() + static_cast<std::ptrdiff_t>(base.size()), name.end(),
                     [](char c) { return c >= '0' && c <= '9'; });
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

// Reads keys out of one config object and rejects any it did not consume.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("'" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    used_.insert(key);
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw ConfigError(name_ + "." + key + ": wrong type");
    }
  }

  void get_optional(const std::string& key, std::optional<double>& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    used_.insert(key);
    if (it->is_null()) {
      out.reset();
    } else if (it->is_number()) {
      out = it->get<double>();
    } else {
      throw ConfigError(name_ + "." + key + ": expected a number or null");
    }
  }

  const json* sub(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!used_.count(it.key())) throw ConfigError("unknown config key '" + name_ + "." + it.key() + "'");
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> used_;
};

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json stats_json(const TimingStats& t) { return {{"max", t.max}, {"mean", t.mean}, {"std", t.std}}; }

TimingStats stats_from(const json& j) {
  TimingStats t;
  t.max = j.at("max").get<double>();
  t.mean = j.at("mean").get<double>();
  t.std = j.at("std").get<double>();
  return t;
}

}  // namespace

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

fs::path sidecar_path(const fs::path& csv) {
  fs::path p = csv;
  p.replace_extension(".json");
  return p;
}

void write_dataset(const Dataset& data, const fs::path& csv, const fs::path& meta, std::optional<double> snr_db) {
  data.validate();
  std::ofstream out = open_out(csv);
  out << "k";
  for (const auto& n : channel_names("u", data.nu())) out << ',' << n;
  for (const auto& n : channel_names("y", data.ny())) out << ',' << n;
  out << '\n';
  for (Index k = 0; k < data.size(); ++k) {
    out << k;
    for (Index i = 0; i < data.nu(); ++i) out << ',' << format_double(data.u(i, k));
    for (Index i = 0; i < data.ny(); ++i) out << ',' << format_double(data.y(i, k));
    out << '\n';
  }
  if (!out) throw ConfigError("failed writing " + csv.string());

  json m = {{"schema_version", kDatasetSchemaVersion},
            {"samples", data.size()},
            {"Ts", data.Ts},
            {"seed", data.seed},
            {"snr_db", optional_json(snr_db)},
            {"noise_std", data.noise_std},
            {"est_end", data.est_end},
            {"val_end", data.val_end}};
  if (data.y_clean.size() == data.y.size() && data.noise_std > 0.0)
    m["snr_db_measured"] = measured_snr_db(data.y_clean, data.y);
  open_out(meta) << m.dump(2) << '\n';
}

Dataset read_dataset(const fs::path& csv, const fs::path& meta) {
  const CsvTable t = read_csv(csv);
  Dataset d;
  std::vector<const std::vector<double>*> u_cols, y_cols;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (is_channel(t.header[c], "u")) u_cols.push_back(&t.columns[c]);
    else if (is_channel(t.header[c], "y")) y_cols.push_back(&t.columns[c]);
    else if (t.header[c] != "k") throw SchemaError(csv.string() + ": unexpected column '" + t.header[c] + "'");
  }
  if (u_cols.empty() || y_cols.empty()) throw SchemaError(csv.string() + ": needs u and y columns");
  const Index N = t.rows();
  d.u.resize(static_cast<Index>(u_cols.size()), N);
  d.y.resize(static_cast<Index>(y_cols.size()), N);
  for (Index k = 0; k < N; ++k) {
    for (std::size_t i = 0; i < u_cols.size(); ++i) d.u(static_cast<Index>(i), k) = (*u_cols[i])[k];
    for (std::size_t i = 0; i < y_cols.size(); ++i) d.y(static_cast<Index>(i), k) = (*y_cols[i])[k];
  }
  d.set_default_split();

  if (!meta.empty() && fs::exists(meta)) {
    const json m = read_json(meta);
    try {
      if (m.at("schema_version").get<int>() != kDatasetSchemaVersion)
        throw SchemaError(meta.string() + ": unsupported schema_version");
      if (m.at("samples").get<Index>() != N) throw SchemaError(meta.string() + ": sample count does not match the CSV");
      d.Ts = m.at("Ts").get<double>();
      d.seed = m.at("seed").get<std::uint64_t>();
      d.noise_std = m.at("noise_std").get<double>();
      d.est_end = m.at("est_end").get<Index>();
      d.val_end = m.at("val_end").get<Index>();
    } catch (const json::exception& e) {
      throw SchemaError(meta.string() + ": " + e.what());
    }
  }
  try {
    d.validate();
  } catch (const ArgumentError& e) {
    throw SchemaError(csv.string() + ": " + e.what());
  }
  return d;
}

void write_trajectory(const TrajectoryLog& log, const fs::path& csv) {
  std::ofstream out = open_out(csv);
  if (log.rows.empty()) {
    out << "k\n";
    return;
  }
  const LogRow& first = log.rows.front();
  const Index ny = first.y.size(), nu = first.u.size(), nx = first.x_hat.size();
  out << "k";
  for (const auto& n : channel_names("r", ny)) out << ',' << n;
  for (const auto& n : channel_names("y", ny)) out << ',' << n;
  for (const auto& n : channel_names("u", nu)) out << ',' << n;
  for (Index i = 0; i < nx; ++i) out << ",xhat" << i + 1;
  out << ",inner_iters,conv_residual,t_convert_ms,t_qp_ms,t_total_ms\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const LogRow& row : log.rows) {
    out << row.k;
    for (Index i = 0; i < ny; ++i) out << ',' << format_double(row.r.size() == ny ? row.r(i) : nan);
    for (Index i = 0; i < ny; ++i) out << ',' << format_double(row.y(i));
    for (Index i = 0; i < nu; ++i) out << ',' << format_double(row.u(i));
    for (Index i = 0; i < nx; ++i) out << ',' << format_double(row.x_hat(i));
    const auto& rec = row.record;
    out << ',' << rec.iterations << ',' << format_double(rec.residuals.empty() ? nan : rec.residuals.back()) << ','
        << format_double(rec.t_convert_ms) << ',' << format_double(rec.t_qp_ms) << ','
        << format_double(rec.t_total_ms) << '\n';
  }
  if (!out) throw ConfigError("failed writing " + csv.string());
}

const std::vector<double>& CsvTable::column(const std::string& name) const {
  for (std::size_t c = 0; c < header.size(); ++c)
    if (header[c] == name) return columns[c];
  throw SchemaError("no column '" + name + "'");
}

CsvTable read_csv(const fs::path& csv) {
  std::ifstream in(csv);
  if (!in) throw ConfigError("cannot read " + csv.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw SchemaError(csv.string() + ": empty file");
  t.header = split_csv_line(line);
  t.columns.assign(t.header.size(), {});
  Index line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != t.header.size())
      throw SchemaError(csv.string() + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(t.header.size()) + " fields");
    for (std::size_t c = 0; c < fields.size(); ++c) t.columns[c].push_back(parse_double(fields[c], csv, line_no));
  }
  return t;
}

TimingStats timing_stats(const std::vector<double>& samples) {
  TimingStats t;
  if (samples.empty()) return t;
  const double n = static_cast<double>(samples.size());
  t.max = *std::max_element(samples.begin(), samples.end());
  t.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  if (samples.size() > 1) {
    double ss = 0.0;
    for (double s : samples) ss += (s - t.mean) * (s - t.mean);
    t.std = std::sqrt(ss / (n - 1.0));
  }
  return t;
}

BenchSummary summarize(const TrajectoryLog& log) {
  BenchSummary s;
  s.steps = log.size();
  std::vector<double> total, convert, solve;
  std::vector<int> iters;
  for (const LogRow& row : log.rows) {
    const auto& rec = row.record;
    total.push_back(rec.t_total_ms);
    convert.push_back(rec.t_convert_ms);
    solve.push_back(rec.t_qp_ms);
    iters.push_back(rec.iterations);
    ++s.iteration_histogram[rec.iterations];
    if (!rec.converged) ++s.unconverged_steps;
    s.max_slack = std::max(s.max_slack, rec.max_slack);
  }
  s.total = timing_stats(total);
  s.convert = timing_stats(convert);
  s.solve = timing_stats(solve);
  if (!iters.empty()) {
    std::sort(iters.begin(), iters.end());
    const std::size_t n = iters.size();
    s.median_iterations = n % 2 ? iters[n / 2] : 0.5 * (iters[n / 2 - 1] + iters[n / 2]);
    s.max_iterations = iters.back();
    Index best = -1;
    for (const auto& [count, steps] : s.iteration_histogram)
      if (steps > best) {
        best = steps;
        s.mode_iterations = count;
      }
  }
  return s;
}

json summary_to_json(const BenchSummary& s) {
  json hist = json::object();
  for (const auto& [count, steps] : s.iteration_histogram) hist[std::to_string(count)] = steps;
  return {{"steps", s.steps},
          {"total_ms", stats_json(s.total)},
          {"convert_ms", stats_json(s.convert)},
          {"qp_ms", stats_json(s.solve)},
          {"iterations",
           {{"histogram", hist},
            {"median", s.median_iterations},
            {"mode", s.mode_iterations},
            {"max", s.max_iterations}}},
          {"unconverged_steps", s.unconverged_steps},
          {"max_slack", s.max_slack}};
}

BenchSummary summary_from_json(const json& j) {
  BenchSummary s;
  try {
    s.steps = j.at("steps").get<Index>();
    s.total = stats_from(j.at("total_ms"));
    s.convert = stats_from(j.at("convert_ms"));
    s.solve = stats_from(j.at("qp_ms"));
    const json& it = j.at("iterations");
    for (auto h = it.at("histogram").begin(); h != it.at("histogram").end(); ++h)
      s.iteration_histogram[std::stoi(h.key())] = h.value().get<Index>();
    s.median_iterations = it.at("median").get<double>();
    s.mode_iterations = it.at("mode").get<int>();
    s.max_iterations = it.at("max").get<int>();
    s.unconverged_steps = j.at("unconverged_steps").get<Index>();
    s.max_slack = j.at("max_slack").get<double>();
  } catch (const std::exception& e) {
    throw SchemaError(std::string("bench summary: ") + e.what());
  }
  return s;
}

double Scenario::amplitude() const {
  double a = 0.0;
  for (double l : levels) a = std::max(a, std::abs(l));
  return a;
}

ReferenceSignal Scenario::reference() const { return ReferenceSignal::piecewise(levels, hold); }

void Scenario::validate() const {
  if (levels.empty()) throw ConfigError("scenario needs at least one level");
  if (hold < 1) throw ConfigError("scenario hold must be at least 1");
  if (!(noise_std >= 0.0)) throw ConfigError("scenario noise_std must be nonnegative");
  for (double l : levels)
    if (!std::isfinite(l)) throw ConfigError("scenario levels must be finite");
}

TrajectoryLog run_scenario(const AnnSsModel& model, const UnbalancedDisc& disc, double Ts, const Scenario& scenario,
                           const ControllerConfig& cfg, Index steps) {
  scenario.validate();
  DiscretePlant plant = DiscretePlant::disc(disc, Ts, scenario.noise_std, scenario.seed);
  return closed_loop(plant, model, cfg, scenario.reference(), steps < 0 ? scenario.steps() : steps);
}

BenchComparison bench_compare(const AnnSsModel& model, const UnbalancedDisc& disc, double Ts, const Scenario& scenario,
                              const ControllerConfig& base, ConversionMode first, ConversionMode second, Index steps) {
  BenchComparison out;
  ControllerConfig cfg = base;
  cfg.conversion.mode = first;
  out.first_log = run_scenario(model, disc, Ts, scenario, cfg, steps);
  cfg.conversion.mode = second;
  out.second_log = run_scenario(model, disc, Ts, scenario, cfg, steps);
  out.first = summarize(out.first_log);
  out.second = summarize(out.second_log);
  out.reference_amplitude = scenario.amplitude();
  const Index n = std::min(out.first_log.size(), out.second_log.size());
  for (Index k = 0; k < n; ++k) {
    const LogRow& a = out.first_log.rows[k];
    const LogRow& b = out.second_log.rows[k];
    out.max_output_difference = std::max(out.max_output_difference, (a.y_clean - b.y_clean).lpNorm<Eigen::Infinity>());
    out.max_input_difference = std::max(out.max_input_difference, (a.u - b.u).lpNorm<Eigen::Infinity>());
  }
  return out;
}

ControllerConfig RunConfig::controller(Index nx, Index nu, Index ny) const {
  if (static_cast<Index>(q_diag.size()) != nx)
    throw ConfigError("controller.Q needs " + std::to_string(nx) + " entries");
  if (static_cast<Index>(r_diag.size()) != nu)
    throw ConfigError("controller.R needs " + std::to_string(nu) + " entries");
  ControllerConfig cfg;
  cfg.horizon = horizon;
  const Vector q = Eigen::Map<const Vector>(q_diag.data(), nx);
  const Vector r = Eigen::Map<const Vector>(r_diag.data(), nu);
  if (!(q.array() >= 0.0).all() || !(r.array() > 0.0).all())
    throw ConfigError("controller.Q must be nonnegative and controller.R positive");
  if (horizon >= 1) cfg.weights = HorizonWeights::uniform(q.asDiagonal(), r.asDiagonal(), horizon);
  if (!(u_abs > 0.0) || !(y_abs > 0.0)) throw ConfigError("controller bounds must be positive");
  cfg.box = BoxConstraints::symmetric(u_abs, y_abs, nu, ny);
  cfg.conv_tol = conv_tol;
  cfg.max_inner_iter = max_inner_iter;
  cfg.conversion.dlambda = dlambda;
  cfg.conversion.mode = mode;
  cfg.conversion.workers = workers;
  cfg.slack_penalty = slack_penalty;
  cfg.qp = qp;
  if (!(dlambda > 0.0 && dlambda <= 1.0)) throw ConfigError("controller.dlambda must be in (0, 1]");
  cfg.validate(nx, nu, ny);
  return cfg;
}

RunConfig config_from_json(const json& j) {
  RunConfig c;
  Section top(j, "config");

  if (const json* p = top.sub("plant")) {
    Section s(*p, "plant");
    s.get("M", c.disc.M);
    s.get("g", c.disc.g);
    s.get("l", c.disc.l);
    s.get("J", c.disc.J);
    s.get("tau", c.disc.tau);
    s.get("Km", c.disc.Km);
    s.get("Ts", c.sim.Ts);
    s.get_optional("snr_db", c.sim.snr_db);
    s.get("seed", c.sim.seed);
    s.get("samples", c.excitation.samples);
    s.get("components", c.excitation.components);
    s.get("f_min", c.excitation.f_min);
    s.get("f_max", c.excitation.f_max);
    s.get("clip", c.excitation.clip);
    s.get("rms_fraction", c.excitation.rms_fraction);
    s.finish();
  }
  c.excitation.Ts = c.sim.Ts;
  c.excitation.seed = c.sim.seed;

  if (const json* p = top.sub("trainer")) {
    Section s(*p, "trainer");
    auto& t = c.trainer;
    s.get("hidden_layers", t.hidden_layers);
    s.get("nodes", t.nodes);
    s.get("nx", t.nx);
    s.get("na", t.na);
    s.get("nb", t.nb);
    std::string act = to_string(t.activation);
    s.get("activation", act);
    try {
      t.activation = activation_from_string(act);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("trainer.activation: ") + e.what());
    }
    s.get("epochs", t.epochs);
    s.get("batch_size", t.batch_size);
    s.get("truncation", t.truncation);
    s.get("learning_rate", t.learning_rate);
    s.get("beta1", t.beta1);
    s.get("beta2", t.beta2);
    s.get("adam_eps", t.adam_eps);
    s.get("seed", t.seed);
    s.get("workers", t.workers);
    s.get("standardize_states", t.standardize_states);
    s.finish();
  }

  if (const json* p = top.sub("controller")) {
    Section s(*p, "controller");
    s.get("horizon", c.horizon);
    s.get("Q", c.q_diag);
    s.get("R", c.r_diag);
    s.get("u_abs", c.u_abs);
    s.get("y_abs", c.y_abs);
    s.get("conv_tol", c.conv_tol);
    s.get("max_inner_iter", c.max_inner_iter);
    s.get("dlambda", c.dlambda);
    std::string mode = to_string(c.mode);
    s.get("mode", mode);
    try {
      c.mode = conversion_mode_from_string(mode);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("controller.mode: ") + e.what());
    }
    s.get_optional("slack_penalty", c.slack_penalty);
    s.get("workers", c.workers);
    if (const json* q = s.sub("qp")) {
      Section qs(*q, "controller.qp");
      qs.get("rho", c.qp.rho);
      qs.get("sigma", c.qp.sigma);
      qs.get("alpha", c.qp.alpha);
      qs.get("eps_abs", c.qp.eps_abs);
      qs.get("eps_rel", c.qp.eps_rel);
      qs.get("max_iter", c.qp.max_iter);
      qs.get("scaling", c.qp.scaling);
      qs.get("adaptive_rho", c.qp.adaptive_rho);
      qs.get("polish", c.qp.polish);
      qs.finish();
    }
    s.finish();
  }

  if (const json* p = top.sub("run")) {
    Section s(*p, "run");
    s.get("levels", c.scenario.levels);
    s.get("hold", c.scenario.hold);
    s.get("noise_std", c.scenario.noise_std);
    s.get("seed", c.scenario.seed);
    s.get("steps", c.steps);
    s.get("model", c.model_path);
    s.get("data", c.data_path);
    s.get("out_dir", c.out_dir);
    s.finish();
  }
  top.finish();

  try {
    c.disc.validate();
    c.trainer.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  if (!(c.sim.Ts > 0.0)) throw ConfigError("plant.Ts must be positive");
  c.scenario.validate();
  return c;
}

RunConfig load_config(const fs::path& path) { return config_from_json(read_json(path)); }

json config_to_json(const RunConfig& c) {
  const auto& t = c.trainer;
  return {
      {"plant",
       {{"M", c.disc.M},
        {"g", c.disc.g},
        {"l", c.disc.l},
        {"J", c.disc.J},
        {"tau", c.disc.tau},
        {"Km", c.disc.Km},
        {"Ts", c.sim.Ts},
        {"snr_db", optional_json(c.sim.snr_db)},
        {"seed", c.sim.seed},
        {"samples", c.excitation.samples},
        {"components", c.excitation.components},
        {"f_min", c.excitation.f_min},
        {"f_max", c.excitation.f_max},
        {"clip", c.excitation.clip},
        {"rms_fraction", c.excitation.rms_fraction}}},
      {"trainer",
       {{"hidden_layers", t.hidden_layers},
        {"nodes", t.nodes},
        {"nx", t.nx},
        {"na", t.na},
        {"nb", t.nb},
        {"activation", to_string(t.activation)},
        {"epochs", t.epochs},
        {"batch_size", t.batch_size},
        {"truncation", t.truncation},
        {"learning_rate", t.learning_rate},
        {"beta1", t.beta1},
        {"beta2", t.beta2},
        {"adam_eps", t.adam_eps},
        {"seed", t.seed},
        {"workers", t.workers},
        {"standardize_states", t.standardize_states}}},
      {"controller",
       {{"horizon", c.horizon},
        {"Q", c.q_diag},
        {"R", c.r_diag},
        {"u_abs", c.u_abs},
        {"y_abs", c.y_abs},
        {"conv_tol", c.conv_tol},
        {"max_inner_iter", c.max_inner_iter},
        {"dlambda", c.dlambda},
        {"mode", to_string(c.mode)},
        {"slack_penalty", optional_json(c.slack_penalty)},
        {"workers", c.workers},
        {"qp",
         {{"rho", c.qp.rho},
          {"sigma", c.qp.sigma},
          {"alpha", c.qp.alpha},
          {"eps_abs", c.qp.eps_abs},
          {"eps_rel", c.qp.eps_rel},
          {"max_iter", c.qp.max_iter},
          {"scaling", c.qp.scaling},
          {"adaptive_rho", c.qp.adaptive_rho},
          {"polish", c.qp.polish}}}}},
      {"run",
       {{"levels", c.scenario.levels},
        {"hold", c.scenario.hold},
        {"noise_std", c.scenario.noise_std},
        {"seed", c.scenario.seed},
        {"steps", c.steps},
        {"model", c.model_path},
        {"data", c.data_path},
        {"out_dir", c.out_dir}}}};
}

json report_to_json(const TrainReport& r) {
  return {{"train_loss", r.train_loss}, {"val_loss", r.val_loss},         {"val_nrms", r.val_nrms},
          {"best_epoch", r.best_epoch}, {"best_val_nrms", r.best_val_nrms}, {"test_nrms", r.test_nrms}};
}

}  // namespace lpvmpc
