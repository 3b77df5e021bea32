#include "lpvmpc/predict.hpp"

#include <cmath>
#include <limits>

namespace lpvmpc {

namespace {

Matrix block_diagonal(const std::vector<Matrix>& blocks) {
  Index rows = 0, cols = 0;
  for (const Matrix& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Index r = 0, c = 0;
  for (const Matrix& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

void check_psd(const Matrix& m, Index dim, const char* name) {
  if (m.rows() != dim || m.cols() != dim) throw ArgumentError(std::string(name) + " has wrong dimension");
  if (!m.allFinite()) throw ArgumentError(std::string(name) + " is not finite");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ArgumentError(std::string(name) + " is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale)
    throw ArgumentError(std::string(name) + " is not positive semi-definite");
}

}  // namespace

HorizonWeights HorizonWeights::uniform(const Matrix& Q, const Matrix& R, Index horizon) {
  require(horizon >= 1, "horizon must be at least 1");
  return HorizonWeights{std::vector<Matrix>(static_cast<std::size_t>(horizon), Q),
                        std::vector<Matrix>(static_cast<std::size_t>(horizon), R)};
}

void HorizonWeights::validate(Index nx, Index nu) const {
  if (Q.empty() || Q.size() != R.size()) throw ArgumentError("weights must provide Np blocks of Q and R");
  for (const Matrix& q : Q) check_psd(q, nx, "Q");
  for (const Matrix& r : R) check_psd(r, nu, "R");
}

Matrix HorizonWeights::omega() const { return block_diagonal(Q); }
Matrix HorizonWeights::psi() const { return block_diagonal(R); }

BoxConstraints BoxConstraints::unbounded(Index nu, Index ny) {
  const double inf = std::numeric_limits<double>::infinity();
  return BoxConstraints{Vector::Constant(nu, -inf), Vector::Constant(nu, inf), Vector::Constant(ny, -inf),
                        Vector::Constant(ny, inf)};
}

BoxConstraints BoxConstraints::symmetric(double u_abs, double y_abs, Index nu, Index ny) {
  return BoxConstraints{Vector::Constant(nu, -u_abs), Vector::Constant(nu, u_abs), Vector::Constant(ny, -y_abs),
                        Vector::Constant(ny, y_abs)};
}

void BoxConstraints::validate(Index nu, Index ny) const {
  if (u_min.size() != nu || u_max.size() != nu || y_min.size() != ny || y_max.size() != ny)
    throw ArgumentError("box constraint dimensions do not match");
  if (u_min.hasNaN() || u_max.hasNaN() || y_min.hasNaN() || y_max.hasNaN())
    throw ArgumentError("box constraints contain NaN");
  if ((u_min.array() > u_max.array()).any() || (y_min.array() > y_max.array()).any())
    throw ArgumentError("infeasible box: min > max");
}

Vector PredictionModel::free_response() const { return Phi * x0 + offset_response; }
Vector PredictionModel::predicted_states(const Vector& U) const { return free_response() + Gamma * U; }
Vector PredictionModel::predicted_outputs(const Vector& U) const { return Lambda * predicted_states(U) + H; }

// Forward recursion on the block rows: row i+1 = A_i * row i + [B_i at column i] (+ v_i).
PredictionModel build_prediction(std::span<const LpvPoint> points, const Vector& x0) {
  if (points.size() < 2) throw ArgumentError("build_prediction needs Np + 1 >= 2 scheduling points");
  const Index Np = static_cast<Index>(points.size()) - 1;
  const Index nx = points[0].A.rows();
  const Index nu = points[0].B.cols();
  const Index ny = points[0].C.rows();
  if (x0.size() != nx) throw ArgumentError("initial state has wrong dimension");
  for (const LpvPoint& p : points) {
    if (p.A.rows() != nx || p.A.cols() != nx || p.B.rows() != nx || p.B.cols() != nu || p.C.rows() != ny ||
        p.C.cols() != nx || p.v.size() != nx || p.w.size() != ny)
      throw ArgumentError("LPV points have inconsistent dimensions");
  }

  PredictionModel pm;
  pm.horizon = Np;
  pm.nx = nx;
  pm.nu = nu;
  pm.ny = ny;
  pm.x0 = x0;
  pm.Phi.resize(Np * nx, nx);
  pm.Gamma = Matrix::Zero(Np * nx, Np * nu);
  pm.offset_response.resize(Np * nx);
  pm.Lambda = Matrix::Zero(Np * ny, Np * nx);
  pm.H.resize(Np * ny);

  Matrix phi = Matrix::Identity(nx, nx);
  Matrix gamma = Matrix::Zero(nx, Np * nu);
  Vector offset = Vector::Zero(nx);
  for (Index i = 0; i < Np; ++i) {
    const LpvPoint& step = points[static_cast<std::size_t>(i)];
    phi = step.A * phi;
    gamma = step.A * gamma;
    gamma.middleCols(i * nu, nu) += step.B;
    offset = step.A * offset + step.v;

    pm.Phi.middleRows(i * nx, nx) = phi;
    pm.Gamma.middleRows(i * nx, nx) = gamma;
    pm.offset_response.segment(i * nx, nx) = offset;

    const LpvPoint& out = points[static_cast<std::size_t>(i + 1)];
    pm.Lambda.block(i * ny, i * nx, ny, nx) = out.C;
    pm.H.segment(i * ny, ny) = out.w;
  }
  return pm;
}

CostTerms build_cost(const PredictionModel& pm, const Vector& x_ref, const Vector& u_ref, const HorizonWeights& w) {
  if (w.horizon() != pm.horizon) throw ArgumentError("weights horizon does not match the prediction horizon");
  w.validate(pm.nx, pm.nu);
  if (x_ref.size() != pm.nx || u_ref.size() != pm.nu) throw ArgumentError("reference has wrong dimension");

  const Matrix omega = w.omega();
  const Matrix psi = w.psi();
  const Vector X_ref = x_ref.replicate(pm.horizon, 1);
  const Vector U_ref = u_ref.replicate(pm.horizon, 1);
  const Vector e = pm.free_response() - X_ref;

  CostTerms c;
  c.G = 2.0 * (psi + pm.Gamma.transpose() * omega * pm.Gamma);
  c.G = 0.5 * (c.G + c.G.transpose());
  c.F = 2.0 * (pm.Gamma.transpose() * omega * e - psi.transpose() * U_ref);
  c.constant = e.dot(omega * e) + U_ref.dot(psi * U_ref);
  return c;
}

ConstraintSet build_constraints(const PredictionModel& pm, const BoxConstraints& box,
                                std::optional<double> slack_penalty) {
  box.validate(pm.nu, pm.ny);
  if (slack_penalty && !(*slack_penalty > 0.0)) throw ArgumentError("slack penalty must be positive");

  const Index Np = pm.horizon, nu = pm.nu, ny = pm.ny;
  const Index n_u = Np * nu;

  // Output rows in terms of U: Y = Lambda Gamma U + (Lambda free + H).
  const Matrix y_gain = pm.Lambda * pm.Gamma;
  const Vector y_free = pm.Lambda * pm.free_response() + pm.H;

  std::vector<Index> softened;  // output channels carrying a slack
  for (Index c = 0; c < ny; ++c)
    if (std::isfinite(box.y_min(c)) || std::isfinite(box.y_max(c))) softened.push_back(c);
  const Index slacks_per_step = slack_penalty ? static_cast<Index>(softened.size()) : 0;

  ConstraintSet cs;
  cs.decision_count = n_u;
  cs.slack_count = Np * slacks_per_step;
  cs.slack_penalty = slack_penalty.value_or(0.0);

  Index rows_per_step = 0;
  for (Index c = 0; c < nu; ++c) rows_per_step += std::isfinite(box.u_min(c)) + std::isfinite(box.u_max(c));
  for (Index c = 0; c < ny; ++c) rows_per_step += std::isfinite(box.y_min(c)) + std::isfinite(box.y_max(c));
  cs.rows_per_step = rows_per_step;

  const Index cols = n_u + cs.slack_count;
  const Index rows = Np * rows_per_step + cs.slack_count;
  cs.L = Matrix::Zero(rows, cols);
  cs.rhs.resize(rows);

  auto slack_column = [&](Index step, Index channel) -> Index {
    for (Index s = 0; s < slacks_per_step; ++s)
      if (softened[static_cast<std::size_t>(s)] == channel) return n_u + step * slacks_per_step + s;
    return -1;
  };

  Index r = 0;
  for (Index i = 0; i < Np; ++i) {
    for (Index c = 0; c < nu; ++c) {
      if (std::isfinite(box.u_min(c))) {
        cs.L(r, i * nu + c) = -1.0;
        cs.rhs(r++) = -box.u_min(c);
      }
    }
    for (Index c = 0; c < nu; ++c) {
      if (std::isfinite(box.u_max(c))) {
        cs.L(r, i * nu + c) = 1.0;
        cs.rhs(r++) = box.u_max(c);
      }
    }
    const Index y_row = i * ny;  // y_{i+1}
    for (Index c = 0; c < ny; ++c) {
      if (std::isfinite(box.y_min(c))) {
        cs.L.row(r).head(n_u) = -y_gain.row(y_row + c);
        if (slack_penalty) cs.L(r, slack_column(i, c)) = -1.0;
        cs.rhs(r++) = -box.y_min(c) + y_free(y_row + c);
      }
    }
    for (Index c = 0; c < ny; ++c) {
      if (std::isfinite(box.y_max(c))) {
        cs.L.row(r).head(n_u) = y_gain.row(y_row + c);
        if (slack_penalty) cs.L(r, slack_column(i, c)) = -1.0;
        cs.rhs(r++) = box.y_max(c) - y_free(y_row + c);
      }
    }
  }
  for (Index s = 0; s < cs.slack_count; ++s) {
    cs.L(r, n_u + s) = -1.0;
    cs.rhs(r++) = 0.0;
  }
  return cs;
}

}  // namespace lpvmpc
