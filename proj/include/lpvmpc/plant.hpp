#pragma once

#include "lpvmpc/common.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <vector>

namespace lpvmpc {

/// Continuous-time right-hand side x' = ode(x, u).
using Ode = std::function<Vector(const Vector& x, const Vector& u)>;

/// Unbalanced disc with state (theta, omega): theta is the angle from the
/// bottom position, v the motor voltage.
struct UnbalancedDisc {
  double M = 0.076;    // kg
  double g = 9.8;      // m/s^2
  double l = 0.041;    // m
  double J = 2.4e-4;   // kg m^2
  double tau = 0.40;   // s
  double Km = 11.0;    // 1/(V s)

  void validate() const;
  Vector derivative(const Vector& x, const Vector& u) const;
  Ode ode() const;
  /// Input that holds the disc at rest at angle theta.
  double steady_input(double theta) const;
};

/// Classical RK4 over [0, Ts] with u held constant.
Vector rk4_step(const Ode& ode, const Vector& x, const Vector& u, double Ts);

/// Sampled plant: state advanced by RK4 under ZOH, output y = output(x) + e.
class DiscretePlant {
 public:
  using Transition = std::function<Vector(const Vector& x, const Vector& u)>;
  using Output = std::function<Vector(const Vector& x)>;

  DiscretePlant(Transition transition, Output output, Vector x0, Index nu, double noise_std = 0.0,
                std::uint64_t seed = 0);

  static DiscretePlant disc(const UnbalancedDisc& disc, double Ts, double noise_std = 0.0, std::uint64_t seed = 0,
                            Vector x0 = Vector::Zero(2));
  static DiscretePlant lti(const Matrix& A, const Matrix& B, const Matrix& C, Vector x0, double noise_std = 0.0,
                           std::uint64_t seed = 0);

  Index nu() const { return nu_; }
  Index ny() const { return ny_; }
  const Vector& state() const { return x_; }
  Vector clean_output() const { return output_(x_); }
  /// Noisy measurement of the current state; draws from the plant's RNG.
  Vector measure();
  /// Applies u over one sample. Throws NumericalError if the state blows up.
  void advance(const Vector& u);

 private:
  Transition transition_;
  Output output_;
  Vector x_;
  Index nu_ = 0;
  Index ny_ = 0;
  double noise_std_ = 0.0;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_{0.0, 1.0};
};

struct SimSettings {
  double Ts = 0.1;
  std::optional<double> snr_db = 30.0;  // unset: noiseless
  std::uint64_t seed = 0;
};

/// Sample indices [0, est_end) estimation, [est_end, val_end) validation,
/// [val_end, size) test.
struct Dataset {
  Matrix u;        // nu x N
  Matrix y;        // ny x N, measured
  Matrix y_clean;  // ny x N, noiseless (empty when loaded from file)
  double Ts = 0.1;
  double noise_std = 0.0;
  std::uint64_t seed = 0;
  Index est_end = 0;
  Index val_end = 0;

  Index size() const { return u.cols(); }
  Index nu() const { return u.rows(); }
  Index ny() const { return y.rows(); }
  /// 60/20/20 split.
  void set_default_split();
  void validate() const;
};

/// Simulates the disc from rest under ZOH inputs; output is theta plus
/// white noise with variance chosen to hit settings.snr_db.
Dataset simulate(const UnbalancedDisc& disc, const Matrix& inputs, const SimSettings& settings,
                 const Vector& x0 = Vector::Zero(2));

/// Generic variant over any sampled plant model.
Dataset simulate(const DiscretePlant::Transition& transition, const DiscretePlant::Output& output, const Vector& x0,
                 const Matrix& inputs, const SimSettings& settings);

/// 20 log10(std(clean) / std(measured - clean)).
double measured_snr_db(const Matrix& y_clean, const Matrix& y);

struct MultisineConfig {
  Index samples = 20000;
  Index components = 3333;
  double f_min = 0.0;  // Hz
  double f_max = 5.0;  // Hz
  double clip = 3.0;
  double rms_fraction = 1.0 / 3.0;  // target RMS as a fraction of the clip level
  double Ts = 0.1;
  std::uint64_t seed = 0;
};

/// Frequencies at the midpoints of `components` equal bins covering [f_min, f_max].
std::vector<double> multisine_frequencies(const MultisineConfig& cfg);

/// Sum of cosines with uniform random phases, rescaled to the target RMS and
/// clipped to +-clip. Returns a 1 x samples row.
Matrix multisine(const MultisineConfig& cfg);
Matrix multisine(const MultisineConfig& cfg, const std::vector<double>& frequencies, const std::vector<double>& phases);

}  // namespace lpvmpc
