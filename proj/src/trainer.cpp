#include "lpvmpc/trainer.hpp"

#include "lpvmpc/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace lpvmpc {

void TrainConfig::validate() const {
  if (hidden_layers < 0 || nodes < 1 || nx < 1 || na < 0 || nb < 0) throw ConfigError("invalid network shape");
  if (std::max(na, nb) < 1) throw ConfigError("encoder needs at least one lag");
  if (epochs < 0) throw ConfigError("epochs must be nonnegative");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  if (truncation < 2) throw ConfigError("truncation length must be at least 2");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
}

std::pair<Index, Index> valid_start_range(Index begin, Index end, Index T, Index n) {
  const Index first = begin + n;
  const Index last = end - T - 1;
  if (last < first) throw ArgumentError("truncation length too large for the data segment");
  return {first, last};
}

Window sample_window(const Dataset& data, Index start, Index T, Index n) {
  require(start >= n && start + T <= data.size(), "window outside the record");
  Window w;
  w.start = start;
  w.past.inputs = data.u.middleCols(start - n, n);
  w.past.outputs = data.y.middleCols(start - n, n + 1);
  w.future_u = data.u.middleCols(start, T);
  w.future_y = data.y.middleCols(start, T);
  return w;
}

std::vector<std::vector<Window>> make_batches(const Dataset& data, Index T, Index na, Index nb, Index batch,
                                              std::uint64_t seed) {
  const Index n = std::max(na, nb);
  const auto [first, last] = valid_start_range(0, data.est_end, T, n);
  std::vector<Index> starts(static_cast<std::size_t>(last - first + 1));
  std::iota(starts.begin(), starts.end(), first);
  if (batch > static_cast<Index>(starts.size())) throw ArgumentError("batch size exceeds the available windows");
  std::mt19937_64 rng(seed);
  std::shuffle(starts.begin(), starts.end(), rng);

  std::vector<std::vector<Window>> batches;
  const std::size_t full = starts.size() / static_cast<std::size_t>(batch);
  for (std::size_t b = 0; b < full; ++b) {
    std::vector<Window> group;
    group.reserve(static_cast<std::size_t>(batch));
    for (Index i = 0; i < batch; ++i)
      group.push_back(sample_window(data, starts[b * static_cast<std::size_t>(batch) + static_cast<std::size_t>(i)], T, n));
    batches.push_back(std::move(group));
  }
  return batches;
}

namespace {

struct NetRefs {
  const Mlp* f;
  const Mlp* h;
  const Mlp* e;
};

NetRefs nets_of(const AnnSsModel& model) {
  if (!model.encoder_net()) throw ConfigError("training needs a model with an encoder");
  return {&model.f_net(), &model.h_net(), &*model.encoder_net()};
}

constexpr Index kChunk = 64;

// Sum of squared normalized errors over one chunk of windows; gradients of
// that sum (times `scale`) are accumulated into grad.
double chunk_loss(const AnnSsModel& model, std::span<const Window> windows, double scale, std::span<double> grad) {
  const NetRefs nets = nets_of(model);
  const IoNorm& norm = model.io_norm();
  const Index B = static_cast<Index>(windows.size());
  const Index T = windows.front().future_u.cols();
  const Index nx = model.nx(), nu = model.nu();

  Matrix E(model.dims().encoder_width(), B);
  for (Index b = 0; b < B; ++b) E.col(b) = model.encoder_input(windows[static_cast<std::size_t>(b)].past);
  std::vector<Matrix> un(static_cast<std::size_t>(T), Matrix(nu, B)), yn(static_cast<std::size_t>(T), Matrix(model.ny(), B));
  for (Index b = 0; b < B; ++b) {
    const Window& w = windows[static_cast<std::size_t>(b)];
    for (Index t = 0; t < T; ++t) {
      un[static_cast<std::size_t>(t)].col(b) = norm.normalize_u(w.future_u.col(t));
      yn[static_cast<std::size_t>(t)].col(b) = norm.normalize_y(w.future_y.col(t));
    }
  }

  const bool want_grad = !grad.empty();
  MlpCache enc_cache;
  std::vector<MlpCache> f_cache(static_cast<std::size_t>(T)), h_cache(static_cast<std::size_t>(T));
  std::vector<Matrix> resid(static_cast<std::size_t>(T));

  Matrix x = want_grad ? nets.e->forward_batch(E, enc_cache) : nets.e->forward_batch(E);
  Matrix z(nx + nu, B);
  double loss = 0.0;
  for (Index t = 0; t < T; ++t) {
    const auto ti = static_cast<std::size_t>(t);
    resid[ti] = (want_grad ? nets.h->forward_batch(x, h_cache[ti]) : nets.h->forward_batch(x)) - yn[ti];
    loss += resid[ti].squaredNorm();
    if (t + 1 < T) {
      z.topRows(nx) = x;
      z.bottomRows(nu) = un[ti];
      x = want_grad ? nets.f->forward_batch(z, f_cache[ti]) : nets.f->forward_batch(z);
    }
  }
  if (!want_grad) return loss;

  const Index nf = nets.f->parameter_count(), nh = nets.h->parameter_count();
  std::span<double> gf = grad.subspan(0, static_cast<std::size_t>(nf));
  std::span<double> gh = grad.subspan(static_cast<std::size_t>(nf), static_cast<std::size_t>(nh));
  std::span<double> ge = grad.subspan(static_cast<std::size_t>(nf + nh));

  Matrix gx_future = Matrix::Zero(nx, B);
  for (Index t = T; t-- > 0;) {
    const auto ti = static_cast<std::size_t>(t);
    Matrix gx = gx_future + nets.h->backward_batch(h_cache[ti], (2.0 * scale) * resid[ti], gh);
    if (t > 0) {
      gx_future = nets.f->backward_batch(f_cache[ti - 1], gx, gf).topRows(nx);
    } else {
      nets.e->backward_batch(enc_cache, gx, ge);
    }
  }
  return loss;
}

}  // namespace

Vector model_parameters(const AnnSsModel& model) {
  const NetRefs nets = nets_of(model);
  const Vector f = nets.f->parameters(), h = nets.h->parameters(), e = nets.e->parameters();
  Vector out(f.size() + h.size() + e.size());
  out << f, h, e;
  return out;
}

void set_model_parameters(AnnSsModel& model, std::span<const double> values) {
  const NetRefs nets = nets_of(model);
  const auto nf = static_cast<std::size_t>(nets.f->parameter_count());
  const auto nh = static_cast<std::size_t>(nets.h->parameter_count());
  const auto ne = static_cast<std::size_t>(nets.e->parameter_count());
  require(values.size() == nf + nh + ne, "parameter vector has wrong size");
  Mlp f = *nets.f, h = *nets.h, e = *nets.e;
  f.set_parameters(values.subspan(0, nf));
  h.set_parameters(values.subspan(nf, nh));
  e.set_parameters(values.subspan(nf + nh, ne));
  model = AnnSsModel(std::move(f), std::move(h), std::move(e), model.dims(), model.io_norm());
}

double truncated_loss(const AnnSsModel& model, std::span<const Window> batch, std::span<double> grad,
                      unsigned workers) {
  if (batch.empty()) throw ArgumentError("empty batch");
  const Index T = batch.front().future_u.cols();
  for (const Window& w : batch)
    if (w.future_u.cols() != T || w.future_y.cols() != T) throw ArgumentError("windows in a batch differ in length");
  const double scale = 1.0 / static_cast<double>(T * static_cast<Index>(batch.size()) * model.ny());

  const std::size_t chunks = (batch.size() + kChunk - 1) / kChunk;
  const std::size_t P = grad.size();
  std::vector<double> losses(chunks, 0.0);
  std::vector<std::vector<double>> grads(grad.empty() ? 0 : chunks);
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t begin = c * kChunk;
    const std::size_t len = std::min<std::size_t>(kChunk, batch.size() - begin);
    std::span<double> g;
    if (!grad.empty()) {
      grads[c].assign(P, 0.0);
      g = grads[c];
    }
    losses[c] = chunk_loss(model, batch.subspan(begin, len), scale, g);
  });

  double loss = 0.0;
  for (double l : losses) loss += l;
  if (!grad.empty()) {
    std::fill(grad.begin(), grad.end(), 0.0);
    for (const auto& g : grads)
      for (std::size_t i = 0; i < P; ++i) grad[i] += g[i];
  }
  return loss * scale;
}

double nrms(const Matrix& y_true, const Matrix& y_pred) {
  require(y_true.rows() == y_pred.rows() && y_true.cols() == y_pred.cols(), "nrms: sizes differ");
  require(y_true.size() > 0, "nrms: empty signal");
  const double n = static_cast<double>(y_true.size());
  const double mean = y_true.sum() / n;
  const double var = (y_true.array() - mean).square().sum() / n;
  if (!(var > 0.0)) throw ArgumentError("nrms: reference signal has zero variance");
  return std::sqrt((y_true - y_pred).squaredNorm() / n / var);
}

Matrix simulate_model(const AnnSsModel& model, const Dataset& data, Index begin, Index end) {
  const Index n = model.dims().window();
  require(begin >= n && begin <= end && end <= data.size(), "simulation range outside the record");
  IoWindow window{data.u.middleCols(begin - n, n), data.y.middleCols(begin - n, n + 1)};
  Vector x = model.encode_state(window);
  Matrix y(model.ny(), end - begin);
  for (Index k = begin; k < end; ++k) {
    y.col(k - begin) = model.h_eval(x);
    x = model.f_eval(x, data.u.col(k));
  }
  return y;
}

Matrix simulate_states(const AnnSsModel& model, const Dataset& data, Index begin, Index end) {
  const Index n = model.dims().window();
  require(begin >= n && begin <= end && end <= data.size(), "simulation range outside the record");
  IoWindow window{data.u.middleCols(begin - n, n), data.y.middleCols(begin - n, n + 1)};
  Vector x = model.encode_state(window);
  Matrix xs(model.nx(), end - begin);
  for (Index k = begin; k < end; ++k) {
    xs.col(k - begin) = x;
    x = model.f_eval(x, data.u.col(k));
  }
  return xs;
}

AnnSsModel rescale_states(const AnnSsModel& model, const Vector& scale) {
  const Index nx = model.nx();
  require(scale.size() == nx && (scale.array() > 0.0).all() && scale.allFinite(),
          "state scale must be positive with one entry per state");
  const Vector inv = scale.cwiseInverse();
  // x' enters through the first nx input columns, leaves through the output rows
  auto scale_in = [&](std::vector<Layer> layers) {
    layers.front().weights.leftCols(nx) = layers.front().weights.leftCols(nx) * inv.asDiagonal();
    return layers;
  };
  auto scale_out = [&](std::vector<Layer> layers) {
    layers.back().weights = scale.asDiagonal() * layers.back().weights;
    layers.back().bias = scale.asDiagonal() * layers.back().bias;
    return layers;
  };
  Mlp f(scale_out(scale_in(model.f_net().layers())));
  Mlp h(scale_in(model.h_net().layers()));
  std::optional<Mlp> e;
  if (model.encoder_net()) e = Mlp(scale_out(model.encoder_net()->layers()));
  return AnnSsModel(std::move(f), std::move(h), std::move(e), model.dims(), model.io_norm());
}

Vector state_scale(const AnnSsModel& model, const Dataset& data) {
  const Matrix xs = simulate_states(model, data, model.dims().window(), data.est_end);
  if (!xs.allFinite()) throw NumericalError("free-run states are not finite");
  const Vector mean = xs.rowwise().mean();
  Vector sd = ((xs.colwise() - mean).array().square().rowwise().sum() / static_cast<double>(xs.cols())).sqrt();
  // a collapsed state component keeps its scale
  for (Index i = 0; i < sd.size(); ++i)
    if (!(sd(i) > 1e-12)) sd(i) = 1.0;
  return sd.cwiseInverse();
}

double simulation_nrms(const AnnSsModel& model, const Dataset& data, Index begin, Index end) {
  const Index start = begin + model.dims().window();
  const Matrix pred = simulate_model(model, data, start, end);
  if (!pred.allFinite()) return std::numeric_limits<double>::infinity();
  return nrms(data.y.middleCols(start, end - start), pred);
}

IoNorm estimation_norm(const Dataset& data) {
  require(data.est_end >= 2, "estimation split too short");
  IoNorm norm;
  auto stats = [&](const Matrix& m, Vector& mean, Vector& scale) {
    const Matrix seg = m.leftCols(data.est_end);
    mean = seg.rowwise().mean();
    scale = ((seg.colwise() - mean).array().square().rowwise().mean()).sqrt().matrix();
    for (Index i = 0; i < scale.size(); ++i)
      if (!(scale(i) > 0.0)) scale(i) = 1.0;
  };
  stats(data.u, norm.u_mean, norm.u_scale);
  stats(data.y, norm.y_mean, norm.y_scale);
  return norm;
}

AnnSsModel initial_model(const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  const Index nu = data.nu(), ny = data.ny();
  const ModelDims dims{cfg.nx, nu, ny, cfg.na, cfg.nb};
  auto widths = [&](Index in, Index out) {
    std::vector<Index> w{in};
    for (Index l = 0; l < cfg.hidden_layers; ++l) w.push_back(cfg.nodes);
    w.push_back(out);
    return w;
  };
  std::mt19937_64 rng(cfg.seed);
  Mlp f = Mlp::random(widths(cfg.nx + nu, cfg.nx), cfg.activation, rng);
  Mlp h = Mlp::random(widths(cfg.nx, ny), cfg.activation, rng);
  Mlp e = Mlp::random(widths(dims.encoder_width(), cfg.nx), cfg.activation, rng);
  return AnnSsModel(std::move(f), std::move(h), std::move(e), dims, estimation_norm(data));
}

namespace {

// Non-overlapping windows of the validation split.
std::vector<Window> validation_windows(const Dataset& data, Index T, Index n) {
  std::vector<Window> out;
  if (data.val_end - data.est_end < n + T + 1) return out;
  const auto [first, last] = valid_start_range(data.est_end, data.val_end, T, n);
  for (Index k = first; k <= last; k += T) out.push_back(sample_window(data, k, T, n));
  return out;
}

}  // namespace

TrainResult train(const Dataset& data, const TrainConfig& cfg) {
  data.validate();
  cfg.validate();
  const Index n = std::max(cfg.na, cfg.nb);
  if (data.val_end - data.est_end <= n || data.size() - data.val_end <= n)
    throw ArgumentError("validation and test splits must be longer than the encoder window");

  AnnSsModel model = initial_model(data, cfg);
  Vector theta = model_parameters(model);
  const auto P = static_cast<std::size_t>(theta.size());
  std::vector<double> grad(P), m(P, 0.0), v(P, 0.0);
  const std::vector<Window> val_windows = validation_windows(data, cfg.truncation, n);

  TrainReport report;
  Vector best = theta;
  report.best_val_nrms = simulation_nrms(model, data, data.est_end, data.val_end);
  long step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto batches = make_batches(data, cfg.truncation, cfg.na, cfg.nb, cfg.batch_size,
                                      cfg.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(epoch));
    double epoch_loss = 0.0;
    for (const auto& batch : batches) {
      const double loss = truncated_loss(model, batch, grad, cfg.workers);
      if (!std::isfinite(loss)) throw NumericalError("training diverged (non-finite loss) in epoch " + std::to_string(epoch));
      epoch_loss += loss;
      ++step;
      const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < P; ++i) {
        m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
        v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        theta(static_cast<Index>(i)) -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.adam_eps);
      }
      set_model_parameters(model, std::span<const double>(theta.data(), P));
    }
    report.train_loss.push_back(epoch_loss / static_cast<double>(batches.size()));
    report.val_loss.push_back(val_windows.empty() ? std::numeric_limits<double>::quiet_NaN()
                                                  : truncated_loss(model, val_windows, {}, cfg.workers));
    const double val = simulation_nrms(model, data, data.est_end, data.val_end);
    report.val_nrms.push_back(val);
    if (val < report.best_val_nrms) {
      report.best_val_nrms = val;
      report.best_epoch = epoch;
      best = theta;
    }
  }

  set_model_parameters(model, std::span<const double>(best.data(), P));
  if (cfg.standardize_states) model = rescale_states(model, state_scale(model, data));
  report.test_nrms = simulation_nrms(model, data, data.val_end, data.size());
  return TrainResult{std::move(model), std::move(report)};
}

}  // namespace lpvmpc
