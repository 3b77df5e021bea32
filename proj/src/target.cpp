#include "lpvmpc/target.hpp"

#include <string>

namespace lpvmpc {

namespace {

// Selector QP over z = (x, u):
//   min 0.5 ||C x + W - r||_Q^2 + ||u||_R^2
//   (I - A) x - B u = V,  C x = r - W  (optional),  box on C x + W and u.
QpProblem selector_qp(const LpvPoint& lpv, const TargetProblem& tp, const Matrix& Q, const Matrix& R,
                      bool output_equality) {
  const Index nx = lpv.A.rows(), nu = lpv.B.cols(), ny = lpv.C.rows();
  const Index n = nx + nu;
  QpProblem p;
  p.P = Matrix::Zero(n, n);
  p.P.topLeftCorner(nx, nx) = lpv.C.transpose() * Q * lpv.C;
  p.P.bottomRightCorner(nu, nu) = 2.0 * R;
  p.q = Vector::Zero(n);
  p.q.head(nx) = lpv.C.transpose() * Q * (lpv.w - tp.r);

  const Index m = nx + (output_equality ? ny : 0) + ny + nu;
  p.A = Matrix::Zero(m, n);
  p.l.resize(m);
  p.u.resize(m);
  Index r = 0;
  p.A.block(r, 0, nx, nx) = Matrix::Identity(nx, nx) - lpv.A;
  p.A.block(r, nx, nx, nu) = -lpv.B;
  p.l.segment(r, nx) = lpv.v;
  p.u.segment(r, nx) = lpv.v;
  r += nx;
  if (output_equality) {
    p.A.block(r, 0, ny, nx) = lpv.C;
    p.l.segment(r, ny) = tp.r - lpv.w;
    p.u.segment(r, ny) = tp.r - lpv.w;
    r += ny;
  }
  p.A.block(r, 0, ny, nx) = lpv.C;
  p.l.segment(r, ny) = tp.box.y_min - lpv.w;
  p.u.segment(r, ny) = tp.box.y_max - lpv.w;
  r += ny;
  p.A.block(r, nx, nu, nu) = Matrix::Identity(nu, nu);
  p.l.segment(r, nu) = tp.box.u_min;
  p.u.segment(r, nu) = tp.box.u_max;
  return p;
}

bool same_point(const LpvPoint& a, const LpvPoint& b) {
  return a.A == b.A && a.B == b.B && a.C == b.C && a.v == b.v && a.w == b.w;
}

}  // namespace

void TargetProblem::validate(Index nu, Index ny) const {
  if (r.size() != ny || !r.allFinite()) throw ArgumentError("setpoint has wrong dimension or is not finite");
  if (Q.size() != 0 && (Q.rows() != ny || Q.cols() != ny)) throw ArgumentError("selector Q has wrong dimension");
  if (R.size() != 0 && (R.rows() != nu || R.cols() != nu)) throw ArgumentError("selector R has wrong dimension");
  if (!(tol > 0.0)) throw ArgumentError("selector tolerance must be positive");
  if (max_iter < 1) throw ArgumentError("selector needs at least one iteration");
  box.validate(nu, ny);
}

TargetResult solve_target(const AnnSsModel& model, const TargetProblem& tp, const Vector& x_guess,
                          const Vector& u_guess) {
  const Index nx = model.nx(), nu = model.nu(), ny = model.ny();
  tp.validate(nu, ny);
  require(x_guess.size() == nx && u_guess.size() == nu, "initial target guess has wrong dimension");
  const Matrix Q = tp.Q.size() ? tp.Q : Matrix::Identity(ny, ny);
  const Matrix R = tp.R.size() ? tp.R : Matrix(1e-3 * Matrix::Identity(nu, nu));

  ConversionConfig conv = tp.conversion;
  conv.mode = ConversionMode::Ftc;

  TargetResult res;
  res.x_ref = x_guess;
  res.u_ref = u_guess;
  std::optional<WarmStart> warm;
  std::optional<LpvPoint> previous;
  for (int it = 1; it <= tp.max_iter; ++it) {
    const LpvPoint lpv = convert_point(model, SchedulingPoint{res.x_ref, res.u_ref}, conv);
    // Unchanged matrices give the same QP, so the last iterate is already the fixed point.
    if (previous && same_point(*previous, lpv)) {
      res.converged = true;
      break;
    }
    previous = lpv;
    res.iterations = it;
    QpSolution sol = qp_solve(selector_qp(lpv, tp, Q, R, true), tp.qp, warm);
    bool reachable = sol.status != QpStatus::PrimalInfeasible;
    if (!reachable) sol = qp_solve(selector_qp(lpv, tp, Q, R, false), tp.qp);
    if (sol.status == QpStatus::PrimalInfeasible)
      throw QpFailure("target selector: constraints are infeasible at iteration " + std::to_string(it));
    res.reachable = reachable;
    warm = reachable ? std::optional<WarmStart>(WarmStart{sol.x, sol.y}) : std::nullopt;

    const Vector x_new = sol.x.head(nx);
    const Vector u_new = sol.x.tail(nu).cwiseMax(tp.box.u_min).cwiseMin(tp.box.u_max);
    const double move = std::max((x_new - res.x_ref).lpNorm<Eigen::Infinity>(),
                                 (u_new - res.u_ref).lpNorm<Eigen::Infinity>());
    res.x_ref = x_new;
    res.u_ref = u_new;
    if (move < tp.tol) {
      res.converged = true;
      break;
    }
  }
  res.state_residual = (model.f_eval(res.x_ref, res.u_ref) - res.x_ref).lpNorm<Eigen::Infinity>();
  res.output_residual = (model.h_eval(res.x_ref) - tp.r).lpNorm<Eigen::Infinity>();
  return res;
}

}  // namespace lpvmpc
