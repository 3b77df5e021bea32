#include "lpvmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace lpvmpc {

std::string to_string(QpStatus status) {
  switch (status) {
    case QpStatus::Solved: return "solved";
    case QpStatus::MaxIterations: return "max-iter";
    case QpStatus::PrimalInfeasible: return "primal-infeasible";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kRhoMin = 1e-6;
constexpr double kRhoMax = 1e6;

double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

Vector project(const Vector& v, const Vector& l, const Vector& u) { return v.cwiseMax(l).cwiseMin(u); }

void validate(const QpProblem& p) {
  const Index n = p.q.size();
  const Index m = p.l.size();
  if (p.P.rows() != n || p.P.cols() != n) throw ArgumentError("qp: P must be n x n");
  if (p.A.rows() != m || p.A.cols() != n || p.u.size() != m) throw ArgumentError("qp: A, l, u dimensions mismatch");
  if (!p.P.allFinite() || !p.q.allFinite() || !p.A.allFinite()) throw ArgumentError("qp: non-finite problem data");
  if (p.l.hasNaN() || p.u.hasNaN()) throw ArgumentError("qp: NaN in bounds");
  if ((p.l.array() > p.u.array()).any()) throw ArgumentError("qp: l > u");
}

// Modified Ruiz equilibration of the KKT matrix [P A'; A 0] plus a cost scale.
struct Scaling {
  Vector D;  // variables
  Vector E;  // constraints
  double c = 1.0;
};

Scaling equilibrate(const QpProblem& p, int iterations) {
  const Index n = p.q.size(), m = p.l.size();
  Scaling s{Vector::Ones(n), Vector::Ones(m), 1.0};
  Matrix P = p.P;
  Matrix A = p.A;
  Vector q = p.q;
  auto limit = [](double v) { return v < 1e-4 ? 1.0 : std::min(v, 1e4); };
  for (int it = 0; it < iterations; ++it) {
    Vector d(n), e(m);
    for (Index j = 0; j < n; ++j) {
      double col = P.col(j).cwiseAbs().maxCoeff();
      if (m > 0) col = std::max(col, A.col(j).cwiseAbs().maxCoeff());
      d(j) = 1.0 / std::sqrt(limit(col));
    }
    for (Index i = 0; i < m; ++i) e(i) = 1.0 / std::sqrt(limit(n > 0 ? A.row(i).cwiseAbs().maxCoeff() : 0.0));
    P = d.asDiagonal() * P * d.asDiagonal();
    A = e.asDiagonal() * A * d.asDiagonal();
    q = d.cwiseProduct(q);
    s.D = s.D.cwiseProduct(d);
    s.E = s.E.cwiseProduct(e);

    double mean_col = 0.0;
    for (Index j = 0; j < n; ++j) mean_col += P.col(j).cwiseAbs().maxCoeff();
    mean_col = n > 0 ? mean_col / static_cast<double>(n) : 0.0;
    const double gamma = 1.0 / limit(std::max(mean_col, inf_norm(q)));
    P *= gamma;
    q *= gamma;
    s.c *= gamma;
  }
  return s;
}

struct ScaledProblem {
  Matrix P, A;
  Vector q, l, u;
};

ScaledProblem apply_scaling(const QpProblem& p, const Scaling& s) {
  ScaledProblem sp;
  sp.P = s.c * (s.D.asDiagonal() * p.P * s.D.asDiagonal());
  sp.A = s.E.asDiagonal() * p.A * s.D.asDiagonal();
  sp.q = s.c * s.D.cwiseProduct(p.q);
  sp.l = s.E.cwiseProduct(p.l);
  sp.u = s.E.cwiseProduct(p.u);
  return sp;
}

enum class RowKind { Inequality, Equality, Free };

std::vector<RowKind> classify_rows(const Vector& l, const Vector& u) {
  std::vector<RowKind> kinds(static_cast<std::size_t>(l.size()));
  for (Index i = 0; i < l.size(); ++i) {
    if (l(i) == -kInf && u(i) == kInf)
      kinds[i] = RowKind::Free;
    else if (u(i) - l(i) < 1e-9 * std::max(1.0, std::abs(u(i))))
      kinds[i] = RowKind::Equality;
    else
      kinds[i] = RowKind::Inequality;
  }
  return kinds;
}

Vector row_penalties(const std::vector<RowKind>& kinds, double rho, double eq_scale) {
  Vector r(static_cast<Index>(kinds.size()));
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    switch (kinds[i]) {
      case RowKind::Free: r(static_cast<Index>(i)) = kRhoMin; break;
      case RowKind::Equality: r(static_cast<Index>(i)) = std::min(rho * eq_scale, kRhoMax); break;
      case RowKind::Inequality: r(static_cast<Index>(i)) = rho; break;
    }
  }
  return r;
}

class KktFactor {
 public:
  void factor(const Matrix& P, const Matrix& A, const Vector& rho, double sigma) {
    Matrix K = P + A.transpose() * rho.asDiagonal() * A;
    K.diagonal().array() += sigma;
    llt_.compute(K);
    use_ldlt_ = llt_.info() != Eigen::Success;
    if (use_ldlt_) ldlt_.compute(K);
  }
  Vector solve(const Vector& b) const { return use_ldlt_ ? Vector(ldlt_.solve(b)) : Vector(llt_.solve(b)); }

 private:
  Eigen::LLT<Matrix> llt_;
  Eigen::LDLT<Matrix> ldlt_;
  bool use_ldlt_ = false;
};

double objective(const QpProblem& p, const Vector& x) { return 0.5 * x.dot(p.P * x) + p.q.dot(x); }

bool primal_infeasible(const QpProblem& p, const Vector& dy, double eps) {
  const double norm = inf_norm(dy);
  if (norm <= 1e-30) return false;
  const double tol = eps * norm;
  if (inf_norm(p.A.transpose() * dy) > tol) return false;
  double support = 0.0;
  for (Index i = 0; i < dy.size(); ++i) {
    if (dy(i) > tol) {
      if (p.u(i) == kInf) return false;
      support += p.u(i) * dy(i);
    } else if (dy(i) < -tol) {
      if (p.l(i) == -kInf) return false;
      support += p.l(i) * dy(i);
    }
  }
  return support < -tol;
}

// Solves the equality-constrained problem on the guessed active set and
// returns the candidate when multiplier signs are consistent.
std::optional<std::pair<Vector, Vector>> polish(const QpProblem& p, const Vector& x, const Vector& y,
                                                const QpSettings& s) {
  const Index n = p.q.size(), m = p.l.size();
  const Vector z = p.A * x;
  std::vector<Index> lower, upper;
  for (Index i = 0; i < m; ++i) {
    if (z(i) - p.l(i) < -y(i) && p.l(i) > -kInf)
      lower.push_back(i);
    else if (p.u(i) - z(i) < y(i) && p.u(i) < kInf)
      upper.push_back(i);
  }
  const Index k = static_cast<Index>(lower.size() + upper.size());
  Matrix K = Matrix::Zero(n + k, n + k);
  Vector rhs(n + k);
  K.topLeftCorner(n, n) = p.P;
  rhs.head(n) = -p.q;
  Index r = n;
  for (Index i : lower) {
    K.block(r, 0, 1, n) = p.A.row(i);
    K.block(0, r, n, 1) = p.A.row(i).transpose();
    rhs(r++) = p.l(i);
  }
  for (Index i : upper) {
    K.block(r, 0, 1, n) = p.A.row(i);
    K.block(0, r, n, 1) = p.A.row(i).transpose();
    rhs(r++) = p.u(i);
  }
  Matrix K_reg = K;
  K_reg.diagonal().head(n).array() += s.polish_delta;
  K_reg.diagonal().tail(k).array() -= s.polish_delta;
  Eigen::PartialPivLU<Matrix> lu(K_reg);
  Vector sol = lu.solve(rhs);
  for (int it = 0; it < s.polish_refine_iter; ++it) sol += lu.solve(rhs - K * sol);
  if (!sol.allFinite()) return std::nullopt;

  Vector y_pol = Vector::Zero(m);
  r = n;
  for (Index i : lower) {
    y_pol(i) = sol(r++);
    if (y_pol(i) > 0.0) return std::nullopt;
  }
  for (Index i : upper) {
    y_pol(i) = sol(r++);
    if (y_pol(i) < 0.0) return std::nullopt;
  }
  return std::make_pair(Vector(sol.head(n)), y_pol);
}

}  // namespace

KktResiduals kkt_residuals(const QpProblem& p, const Vector& x, const Vector& y, double eps_abs, double eps_rel) {
  const Vector Ax = p.A * x;
  const Vector proj = project(Ax, p.l, p.u);
  const Vector Px = p.P * x;
  const Vector Aty = p.A.transpose() * y;
  KktResiduals r;
  r.primal = inf_norm(Ax - proj);
  r.dual = inf_norm(Px + p.q + Aty);
  r.primal_tolerance = eps_abs + eps_rel * std::max(inf_norm(Ax), inf_norm(proj));
  r.dual_tolerance = eps_abs + eps_rel * std::max({inf_norm(Px), inf_norm(Aty), inf_norm(p.q)});
  return r;
}

QpSolution qp_solve(const QpProblem& input, const QpSettings& s, const std::optional<WarmStart>& warm) {
  QpProblem p = input;
  validate(p);
  p.P = 0.5 * (p.P + p.P.transpose());
  const Index n = p.q.size(), m = p.l.size();

  const Scaling scale = s.scaling ? equilibrate(p, s.scaling_iter) : Scaling{Vector::Ones(n), Vector::Ones(m), 1.0};
  const ScaledProblem sp = apply_scaling(p, scale);
  const std::vector<RowKind> kinds = classify_rows(sp.l, sp.u);

  double rho = s.rho;
  Vector rho_vec = row_penalties(kinds, rho, s.equality_rho_scale);
  KktFactor kkt;
  kkt.factor(sp.P, sp.A, rho_vec, s.sigma);

  Vector x = Vector::Zero(n), y = Vector::Zero(m);
  if (warm) {
    if (warm->x.size() == n) x = warm->x.cwiseQuotient(scale.D);
    if (warm->y.size() == m) y = scale.c * warm->y.cwiseQuotient(scale.E);
  }
  Vector z = project(sp.A * x, sp.l, sp.u);

  auto unscaled = [&](const Vector& xs, const Vector& ys) {
    return std::make_pair(Vector(scale.D.cwiseProduct(xs)), Vector(scale.E.cwiseProduct(ys) / scale.c));
  };

  QpSolution sol;
  sol.status = QpStatus::MaxIterations;
  int iter = 0;
  for (iter = 1; iter <= s.max_iter; ++iter) {
    const Vector x_prev = x;
    const Vector y_prev = y;
    const Vector z_prev = z;

    const Vector rhs = s.sigma * x_prev - sp.q + sp.A.transpose() * (rho_vec.cwiseProduct(z_prev) - y_prev);
    const Vector x_tilde = kkt.solve(rhs);
    const Vector z_tilde = sp.A * x_tilde;
    x = s.alpha * x_tilde + (1.0 - s.alpha) * x_prev;
    const Vector z_relaxed = s.alpha * z_tilde + (1.0 - s.alpha) * z_prev;
    z = project(z_relaxed + y_prev.cwiseQuotient(rho_vec), sp.l, sp.u);
    y = y_prev + rho_vec.cwiseProduct(z_relaxed - z);

    if (!x.allFinite() || !y.allFinite()) break;

    const auto [xu, yu] = unscaled(x, y);
    const KktResiduals res = kkt_residuals(p, xu, yu, s.eps_abs, s.eps_rel);
    if (res.satisfied()) {
      sol.status = QpStatus::Solved;
      break;
    }
    if (primal_infeasible(p, Vector(scale.E.cwiseProduct(y - y_prev)), s.eps_primal_inf)) {
      sol.status = QpStatus::PrimalInfeasible;
      break;
    }

    if (s.adaptive_rho && iter % s.adaptive_rho_interval == 0) {
      const Vector Ax = sp.A * x;
      const Vector Px = sp.P * x;
      const Vector Aty = sp.A.transpose() * y;
      const double prim = inf_norm(Ax - z) / std::max({inf_norm(Ax), inf_norm(z), 1e-30});
      const double dual = inf_norm(Px + sp.q + Aty) / std::max({inf_norm(Px), inf_norm(Aty), inf_norm(sp.q), 1e-30});
      const double rho_new = std::clamp(rho * std::sqrt(prim / std::max(dual, 1e-30)), kRhoMin, kRhoMax);
      if (rho_new > s.adaptive_rho_tolerance * rho || rho_new < rho / s.adaptive_rho_tolerance) {
        rho = rho_new;
        rho_vec = row_penalties(kinds, rho, s.equality_rho_scale);
        kkt.factor(sp.P, sp.A, rho_vec, s.sigma);
        ++sol.rho_updates;
      }
    }
  }
  sol.iterations = std::min(iter, s.max_iter);

  std::tie(sol.x, sol.y) = unscaled(x, y);
  if (!sol.x.allFinite() || !sol.y.allFinite()) {
    sol.x = Vector::Zero(n);
    sol.y = Vector::Zero(m);
    sol.status = QpStatus::MaxIterations;
  }

  KktResiduals res = kkt_residuals(p, sol.x, sol.y, s.eps_abs, s.eps_rel);
  if (s.polish && sol.status != QpStatus::PrimalInfeasible) {
    if (auto candidate = polish(p, sol.x, sol.y, s)) {
      const KktResiduals pol = kkt_residuals(p, candidate->first, candidate->second, s.eps_abs, s.eps_rel);
      const double merit = std::max(res.primal / res.primal_tolerance, res.dual / res.dual_tolerance);
      const double merit_pol = std::max(pol.primal / pol.primal_tolerance, pol.dual / pol.dual_tolerance);
      if (merit_pol <= std::max(merit, 1.0)) {
        sol.x = candidate->first;
        sol.y = candidate->second;
        sol.polished = true;
        res = pol;
        if (res.satisfied()) sol.status = QpStatus::Solved;
      }
    }
  }
  if (sol.status == QpStatus::Solved && !res.satisfied()) sol.status = QpStatus::MaxIterations;

  sol.primal_residual = res.primal;
  sol.dual_residual = res.dual;
  sol.objective = objective(p, sol.x);
  return sol;
}

Vector shift_blocks(const Vector& values, Index block) {
  if (block <= 0 || values.size() % block != 0) throw ArgumentError("shift_blocks: length is not a multiple of block");
  const Index count = values.size() / block;
  if (count <= 1) return values;
  Vector out(values.size());
  out.head((count - 1) * block) = values.tail((count - 1) * block);
  out.tail(block) = values.tail(block);
  return out;
}

WarmStart qp_warm_start_shift(const QpSolution& previous, Index var_block, Index row_block) {
  return WarmStart{shift_blocks(previous.x, var_block), shift_blocks(previous.y, row_block)};
}

}  // namespace lpvmpc
