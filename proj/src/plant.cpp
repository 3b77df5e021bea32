#include "lpvmpc/plant.hpp"

#include <cmath>
#include <numbers>

namespace lpvmpc {

void UnbalancedDisc::validate() const {
  if (!(M > 0 && g > 0 && l > 0 && J > 0 && tau > 0 && Km > 0))
    throw ArgumentError("disc parameters must be strictly positive");
}

// Gravity pulls the disc back towards theta = 0 (bottom position).
Vector UnbalancedDisc::derivative(const Vector& x, const Vector& u) const {
  Vector dx(2);
  dx(0) = x(1);
  dx(1) = -(M * g * l / J) * std::sin(x(0)) - x(1) / tau + (Km / tau) * u(0);
  return dx;
}

Ode UnbalancedDisc::ode() const {
  validate();
  return [d = *this](const Vector& x, const Vector& u) { return d.derivative(x, u); };
}

double UnbalancedDisc::steady_input(double theta) const { return M * g * l * tau / (J * Km) * std::sin(theta); }

Vector rk4_step(const Ode& ode, const Vector& x, const Vector& u, double Ts) {
  if (!(Ts > 0.0)) throw ArgumentError("sampling time must be positive");
  const Vector k1 = ode(x, u);
  if (!k1.allFinite()) throw NumericalError("non-finite derivative");
  const Vector k2 = ode(x + 0.5 * Ts * k1, u);
  const Vector k3 = ode(x + 0.5 * Ts * k2, u);
  const Vector k4 = ode(x + Ts * k3, u);
  const Vector next = x + (Ts / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite()) throw NumericalError("non-finite derivative");
  return next;
}

DiscretePlant::DiscretePlant(Transition transition, Output output, Vector x0, Index nu, double noise_std,
                             std::uint64_t seed)
    : transition_(std::move(transition)),
      output_(std::move(output)),
      x_(std::move(x0)),
      nu_(nu),
      noise_std_(noise_std),
      rng_(seed) {
  require(noise_std >= 0.0, "noise standard deviation must be nonnegative");
  ny_ = output_(x_).size();
}

DiscretePlant DiscretePlant::disc(const UnbalancedDisc& disc, double Ts, double noise_std, std::uint64_t seed,
                                  Vector x0) {
  const Ode ode = disc.ode();
  return DiscretePlant([ode, Ts](const Vector& x, const Vector& u) { return rk4_step(ode, x, u, Ts); },
                       [](const Vector& x) { return Vector::Constant(1, x(0)); }, std::move(x0), 1, noise_std, seed);
}

DiscretePlant DiscretePlant::lti(const Matrix& A, const Matrix& B, const Matrix& C, Vector x0, double noise_std,
                                 std::uint64_t seed) {
  return DiscretePlant([A, B](const Vector& x, const Vector& u) -> Vector { return A * x + B * u; },
                       [C](const Vector& x) -> Vector { return C * x; }, std::move(x0), B.cols(), noise_std, seed);
}

Vector DiscretePlant::measure() {
  Vector y = output_(x_);
  if (noise_std_ > 0.0)
    for (Index i = 0; i < y.size(); ++i) y(i) += noise_std_ * noise_(rng_);
  return y;
}

void DiscretePlant::advance(const Vector& u) {
  if (u.size() != nu_) throw ArgumentError("plant input has wrong dimension");
  Vector next = transition_(x_, u);
  if (!next.allFinite()) throw NumericalError("plant state is not finite");
  x_ = std::move(next);
}

void Dataset::set_default_split() {
  est_end = size() * 6 / 10;
  val_end = size() * 8 / 10;
}

void Dataset::validate() const {
  if (u.cols() != y.cols()) throw ArgumentError("dataset input and output lengths differ");
  if (!(0 <= est_end && est_end <= val_end && val_end <= size())) throw ArgumentError("dataset splits do not partition the record");
  if (!u.allFinite() || !y.allFinite()) throw ArgumentError("dataset contains non-finite samples");
}

namespace {

double row_std(const Matrix& m) {
  const double n = static_cast<double>(m.size());
  const double mean = m.sum() / n;
  return std::sqrt((m.array() - mean).square().sum() / n);
}

}  // namespace

Dataset simulate(const DiscretePlant::Transition& transition, const DiscretePlant::Output& output, const Vector& x0,
                 const Matrix& inputs, const SimSettings& settings) {
  if (!inputs.allFinite()) throw ArgumentError("simulation inputs must be finite");
  if (!(settings.Ts > 0.0)) throw ArgumentError("sampling time must be positive");
  const Index N = inputs.cols();
  Vector x = x0;
  const Index ny = output(x).size();
  Dataset d;
  d.u = inputs;
  d.y_clean.resize(ny, N);
  d.Ts = settings.Ts;
  d.seed = settings.seed;
  for (Index k = 0; k < N; ++k) {
    d.y_clean.col(k) = output(x);
    x = transition(x, inputs.col(k));
    if (!x.allFinite()) throw NumericalError("simulation blew up at sample " + std::to_string(k));
  }
  d.y = d.y_clean;
  if (settings.snr_db && N > 0) {
    const double sd = row_std(d.y_clean);
    d.noise_std = sd / std::pow(10.0, *settings.snr_db / 20.0);
    std::mt19937_64 rng(settings.seed);
    std::normal_distribution<double> e(0.0, d.noise_std);
    if (d.noise_std > 0.0)
      for (Index k = 0; k < N; ++k)
        for (Index c = 0; c < ny; ++c) d.y(c, k) += e(rng);
  }
  if (!d.y.allFinite()) throw NumericalError("simulated output is not finite");
  d.set_default_split();
  return d;
}

Dataset simulate(const UnbalancedDisc& disc, const Matrix& inputs, const SimSettings& settings, const Vector& x0) {
  if (inputs.rows() != 1) throw ArgumentError("the disc has a single input");
  const Ode ode = disc.ode();
  const double Ts = settings.Ts;
  return simulate([&](const Vector& x, const Vector& u) { return rk4_step(ode, x, u, Ts); },
                  [](const Vector& x) { return Vector::Constant(1, x(0)); }, x0, inputs, settings);
}

double measured_snr_db(const Matrix& y_clean, const Matrix& y) {
  require(y_clean.rows() == y.rows() && y_clean.cols() == y.cols(), "signal sizes differ");
  return 20.0 * std::log10(row_std(y_clean) / row_std(y - y_clean));
}

std::vector<double> multisine_frequencies(const MultisineConfig& cfg) {
  const double nyquist = 0.5 / cfg.Ts;
  if (cfg.components < 1) throw ArgumentError("multisine needs at least one component");
  if (!(cfg.f_min >= 0.0 && cfg.f_max > cfg.f_min && cfg.f_max <= nyquist * (1 + 1e-12)))
    throw ArgumentError("multisine frequency range must be a nonempty interval within [0, 1/(2 Ts)]");
  std::vector<double> f(static_cast<std::size_t>(cfg.components));
  const double bin = (cfg.f_max - cfg.f_min) / static_cast<double>(cfg.components);
  for (Index i = 0; i < cfg.components; ++i) f[static_cast<std::size_t>(i)] = cfg.f_min + (i + 0.5) * bin;
  return f;
}

Matrix multisine(const MultisineConfig& cfg, const std::vector<double>& frequencies, const std::vector<double>& phases) {
  require(frequencies.size() == phases.size() && !frequencies.empty(), "frequencies and phases must match");
  require(cfg.samples >= 1 && cfg.clip > 0.0 && cfg.rms_fraction > 0.0, "invalid multisine settings");
  Matrix u = Matrix::Zero(1, cfg.samples);
  // Per-component rotation recurrence; re-anchored periodically to bound drift.
  constexpr Index kAnchor = 512;
  for (std::size_t c = 0; c < frequencies.size(); ++c) {
    const double w = 2.0 * std::numbers::pi * frequencies[c] * cfg.Ts;
    const double cw = std::cos(w), sw = std::sin(w);
    double re = 0.0, im = 0.0;
    for (Index k = 0; k < cfg.samples; ++k) {
      if (k % kAnchor == 0) {
        re = std::cos(w * static_cast<double>(k) + phases[c]);
        im = std::sin(w * static_cast<double>(k) + phases[c]);
      }
      u(0, k) += re;
      const double next_re = re * cw - im * sw;
      im = re * sw + im * cw;
      re = next_re;
    }
  }
  const double rms = std::sqrt(u.squaredNorm() / static_cast<double>(cfg.samples));
  if (rms > 0.0) u *= cfg.rms_fraction * cfg.clip / rms;
  return u.cwiseMax(-cfg.clip).cwiseMin(cfg.clip);
}

Matrix multisine(const MultisineConfig& cfg) {
  const std::vector<double> f = multisine_frequencies(cfg);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::vector<double> phases(f.size());
  for (double& p : phases) p = phase(rng);
  return multisine(cfg, f, phases);
}

}  // namespace lpvmpc
