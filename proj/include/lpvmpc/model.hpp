#pragma once

#include "lpvmpc/common.hpp"
#include "lpvmpc/mlp.hpp"

#include "json.hpp"

#include <filesystem>
#include <optional>

namespace lpvmpc {

inline constexpr int kModelSchemaVersion = 1;

struct ModelDims {
  Index nx = 0;
  Index nu = 0;
  Index ny = 0;
  Index na = 0;  // output lags seen by the encoder
  Index nb = 0;  // input lags seen by the encoder

  /// Window length n = max(na, nb).
  Index window() const { return std::max(na, nb); }
  Index encoder_width() const { return na * ny + nb * nu + ny; }
};

/// Per-channel standardization u_n = (u - u_mean) / u_scale, likewise for y.
struct IoNorm {
  Vector u_mean, u_scale, y_mean, y_scale;

  static IoNorm identity(Index nu, Index ny);
  Vector normalize_u(const Vector& u) const;
  Vector normalize_y(const Vector& y) const;
  Vector denormalize_y(const Vector& y) const;
};

/// Past inputs u_{k-n}..u_{k-1} (columns, oldest first) and past-and-current
/// outputs y_{k-n}..y_k, with n = max(na, nb).
struct IoWindow {
  Matrix inputs;   // nu x n
  Matrix outputs;  // ny x (n + 1)
};

/// Identified state-space model x+ = f(x, u), y = h(x) with an optional
/// subspace encoder x = psi(window). The nets act on standardized inputs and
/// outputs; the *_eval methods take and return physical units.
class AnnSsModel {
 public:
  AnnSsModel(Mlp f_net, Mlp h_net, std::optional<Mlp> encoder_net, ModelDims dims,
             std::optional<IoNorm> io_norm = std::nullopt);

  const ModelDims& dims() const { return dims_; }
  Index nx() const { return dims_.nx; }
  Index nu() const { return dims_.nu; }
  Index ny() const { return dims_.ny; }
  const Mlp& f_net() const { return f_net_; }
  const Mlp& h_net() const { return h_net_; }
  const std::optional<Mlp>& encoder_net() const { return encoder_net_; }
  const IoNorm& io_norm() const { return io_norm_; }

  Vector f_eval(const Vector& x, const Vector& u) const;
  Vector h_eval(const Vector& x) const;

  /// d f / d col(x, u), nx x (nx + nu), in physical input units.
  Matrix f_jacobian(const Vector& x, const Vector& u) const;
  /// d h / d x, ny x nx, in physical output units.
  Matrix h_jacobian(const Vector& x) const;

  /// Flattened, standardized encoder input: the last nb inputs followed by
  /// the last na + 1 outputs, oldest first.
  Vector encoder_input(const IoWindow& window) const;
  Vector encode_state(const IoWindow& window) const;

 private:
  void check_x(const Vector& x) const;
  void check_u(const Vector& u) const;

  Mlp f_net_;
  Mlp h_net_;
  std::optional<Mlp> encoder_net_;
  ModelDims dims_;
  IoNorm io_norm_;
};

/// Deadbeat linear encoder: reconstructs x_k exactly from n past inputs and
/// n + 1 outputs of a noiseless LTI system. Requires observability over the window.
Mlp lti_encoder(const Matrix& A, const Matrix& B, const Matrix& C, Index n);

/// Wraps an LTI system x+ = A x + B u, y = C x as single linear layers.
/// With na == nb >= 1 the model also gets the lti_encoder for that window.
AnnSsModel make_lti_model(const Matrix& A, const Matrix& B, const Matrix& C, Index na = 0, Index nb = 0);

nlohmann::json mlp_to_json(const Mlp& net);
Mlp mlp_from_json(const nlohmann::json& j);
nlohmann::json model_to_json(const AnnSsModel& model);
AnnSsModel model_from_json(const nlohmann::json& j);

void save_model(const AnnSsModel& model, const std::filesystem::path& path);
AnnSsModel load_model(const std::filesystem::path& path);

}  // namespace lpvmpc
