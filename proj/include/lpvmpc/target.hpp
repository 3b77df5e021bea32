#pragma once

#include "lpvmpc/common.hpp"
#include "lpvmpc/lpv.hpp"
#include "lpvmpc/predict.hpp"
#include "lpvmpc/qp.hpp"

namespace lpvmpc {

struct TargetProblem {
  Vector r;  // output setpoint
  Matrix Q;  // ny x ny, output error weight; empty means identity
  Matrix R;  // nu x nu, input weight; empty means 1e-3 * identity
  BoxConstraints box;
  double tol = 1e-6;
  int max_iter = 20;
  ConversionConfig conversion;
  QpSettings qp;

  void validate(Index nu, Index ny) const;
};

struct TargetResult {
  Vector x_ref;
  Vector u_ref;
  bool converged = false;
  bool reachable = true;  // false if r could not be met under the constraints
  int iterations = 0;
  double state_residual = 0.0;   // ||f(x_ref, u_ref) - x_ref||_inf
  double output_residual = 0.0;  // ||h(x_ref) - r||_inf
};

/// Steady-state pair for the setpoint r. Each pass converts the model at
/// p_ref = (x_ref, u_ref) and solves the selector QP; the loop stops when
/// the pair moves less than tol (infinity norm).
TargetResult solve_target(const AnnSsModel& model, const TargetProblem& tp, const Vector& x_guess,
                          const Vector& u_guess);

}  // namespace lpvmpc
