#pragma once

#include "lpvmpc/common.hpp"

#include <optional>
#include <string>

namespace lpvmpc {

/// min 0.5 x' P x + q' x  s.t.  l <= A x <= u.  Rows with l == u are equalities.
struct QpProblem {
  Matrix P;
  Vector q;
  Matrix A;
  Vector l;
  Vector u;

  Index variables() const { return q.size(); }
  Index constraints() const { return l.size(); }
};

enum class QpStatus { Solved, MaxIterations, PrimalInfeasible };
std::string to_string(QpStatus status);

struct QpSettings {
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  int max_iter = 4000;
  double equality_rho_scale = 1e3;
  bool scaling = true;
  int scaling_iter = 10;
  bool adaptive_rho = true;
  int adaptive_rho_interval = 25;
  double adaptive_rho_tolerance = 5.0;
  double eps_primal_inf = 1e-5;
  bool polish = true;
  double polish_delta = 1e-7;
  int polish_refine_iter = 5;
};

struct WarmStart {
  Vector x;
  Vector y;
};

struct QpSolution {
  Vector x;  // primal
  Vector y;  // constraint multipliers (< 0 at active lower, > 0 at active upper bounds)
  QpStatus status = QpStatus::MaxIterations;
  int iterations = 0;
  int rho_updates = 0;
  bool polished = false;
  double primal_residual = 0.0;  // ||A x - proj(A x)||_inf
  double dual_residual = 0.0;    // ||P x + q + A' y||_inf
  double objective = 0.0;
};

struct KktResiduals {
  double primal = 0.0;
  double dual = 0.0;
  double primal_tolerance = 0.0;
  double dual_tolerance = 0.0;

  bool satisfied() const { return primal <= primal_tolerance && dual <= dual_tolerance; }
};

/// Residuals of (x, y) against the KKT conditions with tolerances
/// eps_abs + eps_rel * scale.
KktResiduals kkt_residuals(const QpProblem& problem, const Vector& x, const Vector& y, double eps_abs,
                           double eps_rel);

/// Dense ADMM (operator splitting) with Ruiz equilibration, adaptive penalty
/// and active-set polishing. Deterministic for given inputs and settings.
QpSolution qp_solve(const QpProblem& problem, const QpSettings& settings = {},
                    const std::optional<WarmStart>& warm = std::nullopt);

/// Drops the first block of `values`, shifts the rest forward and repeats
/// the last block. The length must be a multiple of `block`.
Vector shift_blocks(const Vector& values, Index block);

/// Receding-horizon warm start: primal blocks shifted by var_block, duals by row_block.
WarmStart qp_warm_start_shift(const QpSolution& previous, Index var_block, Index row_block);

}  // namespace lpvmpc
