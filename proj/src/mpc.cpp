#include "lpvmpc/mpc.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <string>

namespace lpvmpc {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// Shifts the U and slack parts of a previous solution separately.
WarmStart shift_solution(const QpSolution& prev, Index n_u, Index nu, Index n_s, Index Np, Index rows_u) {
  WarmStart w;
  w.x = prev.x;
  w.x.head(n_u) = shift_blocks(prev.x.head(n_u), nu);
  if (n_s > 0) w.x.tail(n_s) = shift_blocks(prev.x.tail(n_s), n_s / Np);
  w.y = prev.y;
  const Index per_step = rows_u / Np;
  if (per_step > 0) w.y.head(rows_u) = shift_blocks(prev.y.head(rows_u), per_step);
  if (n_s > 0) w.y.tail(n_s) = shift_blocks(prev.y.tail(n_s), n_s / Np);
  return w;
}

}  // namespace

void ControllerConfig::validate(Index nx, Index nu, Index ny) const {
  if (horizon < 1) throw ConfigError("horizon must be at least 1");
  if (!(conv_tol > 0.0)) throw ConfigError("conv_tol must be positive");
  if (max_inner_iter < 1) throw ConfigError("max_inner_iter must be at least 1");
  if (weights.horizon() != horizon) throw ConfigError("weights must have one block per horizon step");
  if (slack_penalty && !(*slack_penalty > 0.0)) throw ConfigError("slack penalty must be positive");
  try {
    weights.validate(nx, nu);
    box.validate(nu, ny);
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
}

Schedule initial_schedule(const Vector& x0, Index nu, Index horizon) {
  require(horizon >= 1, "horizon must be at least 1");
  return Schedule(static_cast<std::size_t>(horizon + 1), SchedulingPoint{x0, Vector::Zero(nu)});
}

Schedule propagate_schedule(const Schedule& optimal) {
  require(optimal.size() >= 2, "schedule needs at least two points");
  const std::size_t Np = optimal.size() - 1;
  Schedule next(optimal.size());
  for (std::size_t i = 0; i + 2 <= Np; ++i) next[i] = optimal[i + 1];
  next[Np - 1] = SchedulingPoint{optimal[Np].x, optimal[Np - 1].u};
  next[Np] = SchedulingPoint{optimal[Np].x, Vector::Zero(optimal[Np].u.size())};
  return next;
}

Vector schedule_inputs(const Schedule& schedule) {
  require(schedule.size() >= 2, "schedule needs at least two points");
  const Index nu = schedule.front().u.size();
  const Index Np = static_cast<Index>(schedule.size()) - 1;
  Vector U(Np * nu);
  for (Index i = 0; i < Np; ++i) U.segment(i * nu, nu) = schedule[static_cast<std::size_t>(i)].u;
  return U;
}

InnerResult inner_iteration(const AnnSsModel& model, const ControllerConfig& cfg, const Vector& x0,
                            const Schedule& schedule, const Reference& ref, const std::optional<WarmStart>& warm) {
  const Index Np = cfg.horizon, nu = model.nu();
  if (static_cast<Index>(schedule.size()) != Np + 1) throw ArgumentError("schedule length must be Np + 1");
  if (!x0.allFinite()) throw NumericalError("initial state is not finite");

  InnerResult res;
  auto t0 = Clock::now();
  const std::vector<LpvPoint> lpv = convert_schedule(model, schedule, cfg.conversion);
  res.t_convert_ms = ms_since(t0);

  t0 = Clock::now();
  const PredictionModel pm = build_prediction(lpv, x0);
  const CostTerms cost = build_cost(pm, ref.x_ref, ref.u_ref, cfg.weights);
  const ConstraintSet cs = build_constraints(pm, cfg.box, cfg.slack_penalty);
  const Index n_u = cs.decision_count, n_s = cs.slack_count;

  QpProblem qp;
  qp.P = Matrix::Zero(n_u + n_s, n_u + n_s);
  const double eps = 1e-9 * cost.G.trace() / static_cast<double>(n_u);
  qp.P.topLeftCorner(n_u, n_u) = cost.G + eps * Matrix::Identity(n_u, n_u);
  if (n_s > 0) qp.P.bottomRightCorner(n_s, n_s) = 2.0 * cs.slack_penalty * Matrix::Identity(n_s, n_s);
  qp.q = Vector::Zero(n_u + n_s);
  qp.q.head(n_u) = cost.F;
  qp.A = cs.L;
  qp.l = Vector::Constant(cs.rhs.size(), -std::numeric_limits<double>::infinity());
  qp.u = cs.rhs;

  std::optional<WarmStart> start;
  if (warm && warm->x.size() == qp.variables() && warm->y.size() == qp.constraints()) start = warm;
  res.qp = qp_solve(qp, cfg.qp, start);
  res.t_qp_ms = ms_since(t0);
  if (res.qp.status == QpStatus::PrimalInfeasible) throw QpFailure("MPC QP is primal infeasible");

  res.U = res.qp.x.head(n_u);
  for (Index i = 0; i < Np; ++i)
    res.U.segment(i * nu, nu) = res.U.segment(i * nu, nu).cwiseMax(cfg.box.u_min).cwiseMin(cfg.box.u_max);
  res.slack = res.qp.x.tail(n_s);
  res.predicted_outputs = pm.predicted_outputs(res.U);

  res.states.reserve(static_cast<std::size_t>(Np + 1));
  res.states.push_back(x0);
  res.schedule.resize(static_cast<std::size_t>(Np + 1));
  for (Index i = 0; i < Np; ++i) {
    const Vector u = res.U.segment(i * nu, nu);
    res.schedule[static_cast<std::size_t>(i)] = SchedulingPoint{res.states.back(), u};
    res.states.push_back(model.f_eval(res.states.back(), u));
    if (!res.states.back().allFinite()) throw NumericalError("model rollout is not finite");
  }
  res.schedule[static_cast<std::size_t>(Np)] = SchedulingPoint{res.states.back(), Vector::Zero(nu)};
  return res;
}

StepResult control_step(const AnnSsModel& model, const ControllerConfig& cfg, const Vector& x_hat,
                        const Schedule& warm_schedule, const Reference& ref, const std::optional<WarmStart>& warm_qp) {
  if (!x_hat.allFinite()) throw NumericalError("state estimate is not finite");
  const auto t0 = Clock::now();
  StepResult out;
  IterationRecord& rec = out.record;
  Schedule schedule = warm_schedule;
  Vector previous = schedule_inputs(schedule);
  std::optional<WarmStart> warm = warm_qp;

  for (int j = 1; j <= cfg.max_inner_iter; ++j) {
    try {
      out.last = inner_iteration(model, cfg, x_hat, schedule, ref, warm);
    } catch (const QpFailure& e) {
      throw QpFailure(std::string(e.what()) + " (inner iteration " + std::to_string(j) + ")");
    }
    const InnerResult& it = out.last;
    rec.iterations = j;
    rec.t_convert_ms += it.t_convert_ms;
    rec.t_qp_ms += it.t_qp_ms;
    rec.qp_status = it.qp.status;
    rec.qp_iterations += it.qp.iterations;
    const double residual = (it.U - previous).norm();
    rec.residuals.push_back(residual);
    previous = it.U;
    schedule = it.schedule;
    warm = WarmStart{it.qp.x, it.qp.y};
    if (residual <= cfg.conv_tol) {
      rec.converged = true;
      break;
    }
  }
  rec.max_slack = out.last.slack.size() ? out.last.slack.maxCoeff() : 0.0;
  out.u = out.last.U.head(model.nu());
  out.next_schedule = propagate_schedule(out.last.schedule);
  rec.t_total_ms = ms_since(t0);
  return out;
}

LpvMpcController::LpvMpcController(const AnnSsModel& model, ControllerConfig cfg) : model_(model), cfg_(std::move(cfg)) {
  cfg_.validate(model.nx(), model.nu(), model.ny());
}

void LpvMpcController::reset() {
  schedule_.reset();
  warm_qp_.reset();
}

StepResult LpvMpcController::step(const Vector& x_hat, const Reference& ref) {
  if (!schedule_) schedule_ = initial_schedule(x_hat, model_.nu(), cfg_.horizon);
  StepResult res = control_step(model_, cfg_, x_hat, *schedule_, ref, warm_qp_);
  schedule_ = res.next_schedule;
  const QpSolution& qp = res.last.qp;
  const Index n_u = cfg_.horizon * model_.nu();
  const Index n_s = qp.x.size() - n_u;
  const Index rows_u = qp.y.size() - n_s;
  if (cfg_.shift_qp_start) warm_qp_ = shift_solution(qp, n_u, model_.nu(), n_s, cfg_.horizon, rows_u);
  return res;
}

ReferenceSignal ReferenceSignal::constant_output(const Vector& r) {
  ReferenceSignal s;
  s.setpoint = [r](Index) { return r; };
  return s;
}

ReferenceSignal ReferenceSignal::piecewise(const std::vector<double>& levels, Index hold) {
  require(!levels.empty() && hold >= 1, "piecewise reference needs levels and a positive hold");
  ReferenceSignal s;
  s.setpoint = [levels, hold](Index k) {
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(k / hold), levels.size() - 1);
    return Vector::Constant(1, levels[i]).eval();
  };
  return s;
}

ReferenceSignal ReferenceSignal::state_input(Reference ref) {
  ReferenceSignal s;
  s.fixed = std::move(ref);
  return s;
}

TrajectoryLog closed_loop(DiscretePlant& plant, const AnnSsModel& model, const ControllerConfig& cfg,
                          const ReferenceSignal& reference, Index n_sim) {
  const Index nu = model.nu(), ny = model.ny(), nx = model.nx();
  if (plant.nu() != nu || plant.ny() != ny) throw ArgumentError("plant and model dimensions differ");
  if (!reference.fixed && !reference.setpoint) throw ArgumentError("closed loop needs a reference");
  LpvMpcController controller(model, cfg);
  const Index n = model.dims().window();

  Matrix u_hist = Matrix::Zero(nu, n);
  Matrix y_hist = Matrix::Zero(ny, n + 1);
  for (Index i = 0; i < n; ++i) {
    y_hist.col(i) = plant.measure();
    plant.advance(Vector::Zero(nu));
  }

  TargetProblem tp;
  tp.Q = cfg.target_Q;
  tp.R = cfg.target_R;
  tp.box = cfg.box;
  tp.tol = cfg.target_tol;
  tp.max_iter = cfg.target_max_iter;
  tp.conversion = cfg.conversion;

  Reference ref;
  bool reachable = true;
  std::optional<Vector> last_r;
  if (reference.fixed) ref = *reference.fixed;
  else ref = Reference{Vector::Zero(nx), Vector::Zero(nu)};

  TrajectoryLog log;
  log.rows.reserve(static_cast<std::size_t>(n_sim));
  for (Index k = 0; k < n_sim; ++k) {
    LogRow row;
    row.k = k;
    row.y_clean = plant.clean_output();
    row.y = plant.measure();
    y_hist.col(n) = row.y;
    row.x_hat = model.encode_state(IoWindow{u_hist, y_hist});

    if (!reference.fixed) {
      row.r = reference.setpoint(k);
      if (!last_r || *last_r != row.r) {
        tp.r = row.r;
        const TargetResult t = solve_target(model, tp, ref.x_ref, ref.u_ref);
        ref = Reference{t.x_ref, t.u_ref};
        reachable = t.reachable;
        last_r = row.r;
      }
    }
    row.x_ref = ref.x_ref;
    row.u_ref = ref.u_ref;
    row.target_reachable = reachable;

    StepResult step;
    try {
      step = controller.step(row.x_hat, ref);
    } catch (const QpFailure& e) {
      throw QpFailure(std::string(e.what()) + " at control step " + std::to_string(k));
    }
    row.u = step.u;
    row.predicted_outputs = step.last.predicted_outputs;
    row.record = step.record;
    try {
      plant.advance(row.u);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " at control step " + std::to_string(k));
    }
    if (n > 0) {
      if (n > 1) u_hist.leftCols(n - 1) = u_hist.rightCols(n - 1).eval();
      u_hist.col(n - 1) = row.u;
      y_hist.leftCols(n) = y_hist.rightCols(n).eval();
    }
    log.rows.push_back(std::move(row));
  }
  return log;
}

ControllerConfig disc_controller_config(ConversionMode mode) {
  ControllerConfig cfg;
  cfg.horizon = 10;
  const Matrix Q = Eigen::Vector2d(1e3, 10.0).asDiagonal();
  cfg.weights = HorizonWeights::uniform(Q, Matrix::Identity(1, 1), cfg.horizon);
  cfg.box = BoxConstraints::symmetric(4.0, 1.2);
  cfg.conversion.mode = mode;
  return cfg;
}

}  // namespace lpvmpc
