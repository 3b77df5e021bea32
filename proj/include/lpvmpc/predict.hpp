#pragma once

#include "lpvmpc/common.hpp"
#include "lpvmpc/lpv.hpp"

#include <optional>
#include <span>
#include <vector>

namespace lpvmpc {

/// Stage weights Q_i (state) and R_i (input) for i = 1..Np.
struct HorizonWeights {
  std::vector<Matrix> Q;
  std::vector<Matrix> R;

  static HorizonWeights uniform(const Matrix& Q, const Matrix& R, Index horizon);
  Index horizon() const { return static_cast<Index>(Q.size()); }
  /// Symmetry and positive semi-definiteness of every block.
  void validate(Index nx, Index nu) const;
  Matrix omega() const;  // blockdiag(Q_i)
  Matrix psi() const;    // blockdiag(R_i)
};

/// Element-wise bounds; +-infinity disables a side.
struct BoxConstraints {
  Vector u_min, u_max, y_min, y_max;

  static BoxConstraints unbounded(Index nu, Index ny);
  static BoxConstraints symmetric(double u_abs, double y_abs, Index nu = 1, Index ny = 1);
  void validate(Index nu, Index ny) const;
};

/// Stacked predictions along a fixed schedule:
///   X = Phi x0 + Gamma U + offset_response,  Y = Lambda X + H
/// with X = col(x_1..x_Np), U = col(u_0..u_{Np-1}), Y = col(y_1..y_Np).
struct PredictionModel {
  Index horizon = 0;
  Index nx = 0, nu = 0, ny = 0;
  Vector x0;
  Matrix Phi;              // Np*nx x nx
  Matrix Gamma;            // Np*nx x Np*nu, block lower triangular
  Vector offset_response;  // Np*nx, response to the offsets v_0..v_{Np-1}
  Matrix Lambda;           // Np*ny x Np*nx, blockdiag(C_1..C_Np)
  Vector H;                // Np*ny, col(w_1..w_Np)

  /// Phi x0 + offset_response.
  Vector free_response() const;
  Vector predicted_states(const Vector& U) const;
  Vector predicted_outputs(const Vector& U) const;
};

/// points[0..Np]: point i supplies A, B, v for the step i -> i+1 and C, w
/// for output y_i (point 0's C is unused, point Np's A, B, v are unused).
PredictionModel build_prediction(std::span<const LpvPoint> points, const Vector& x0);

/// Condensed cost: sum_i l_i == 0.5 U' G U + F' U + constant.
struct CostTerms {
  Matrix G;
  Vector F;
  double constant = 0.0;
};

CostTerms build_cost(const PredictionModel& pm, const Vector& x_ref, const Vector& u_ref, const HorizonWeights& w);

/// One-sided rows L z <= rhs over z = col(U, s). Per step i (0..Np-1) the
/// rows are -u_i, u_i, -y_{i+1}, y_{i+1}, skipping infinite bounds. With
/// softening, each output channel with a finite bound gets one slack per
/// step (columns after U), entering both of its rows, plus rows -s <= 0.
struct ConstraintSet {
  Matrix L;
  Vector rhs;
  Index decision_count = 0;  // Np*nu
  Index slack_count = 0;
  double slack_penalty = 0.0;  // cost rho * ||s||^2
  Index rows_per_step = 0;     // rows of one step, excluding slack sign rows
};

ConstraintSet build_constraints(const PredictionModel& pm, const BoxConstraints& box,
                                std::optional<double> slack_penalty = std::nullopt);

}  // namespace lpvmpc
