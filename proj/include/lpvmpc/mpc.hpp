#pragma once

#include "lpvmpc/common.hpp"
#include "lpvmpc/lpv.hpp"
#include "lpvmpc/plant.hpp"
#include "lpvmpc/predict.hpp"
#include "lpvmpc/qp.hpp"
#include "lpvmpc/target.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace lpvmpc {

struct ControllerConfig {
  Index horizon = 10;
  HorizonWeights weights;  // Np blocks of Q and R
  BoxConstraints box;
  double conv_tol = 0.1;   // on ||U^(j) - U^(j-1)||_2
  int max_inner_iter = 10;
  ConversionConfig conversion;
  std::optional<double> slack_penalty = 1e4;
  QpSettings qp;
  bool shift_qp_start = true;  // seed each QP with the shifted previous solution
  /// Selector settings used when the reference is an output setpoint.
  Matrix target_Q, target_R;
  double target_tol = 1e-6;
  int target_max_iter = 20;

  void validate(Index nx, Index nu, Index ny) const;
};

/// Scheduling points p_0..p_Np; p_Np carries a zero input.
using Schedule = std::vector<SchedulingPoint>;

/// Algorithm start: x0 held over the horizon with zero inputs.
Schedule initial_schedule(const Vector& x0, Index nu, Index horizon);

/// Next cycle's schedule from this cycle's optimal one:
/// p_i <- p_{i+1} for i <= Np-2, p_{Np-1} <- (x_Np, u_{Np-1}), p_Np <- (x_Np, 0).
Schedule propagate_schedule(const Schedule& optimal);

/// Stacked inputs u_0..u_{Np-1} of a schedule.
Vector schedule_inputs(const Schedule& schedule);

struct Reference {
  Vector x_ref;
  Vector u_ref;
};

struct InnerResult {
  Vector U;                   // Np*nu optimal inputs
  Vector slack;               // output slacks (may be empty)
  std::vector<Vector> states; // nonlinear rollout x_0..x_Np
  Schedule schedule;          // rebuilt from the rollout
  Vector predicted_outputs;   // y_1..y_Np of the LPV prediction
  QpSolution qp;
  double t_convert_ms = 0.0;
  double t_qp_ms = 0.0;
};

/// One pass of convert -> condense -> solve -> simulate.
InnerResult inner_iteration(const AnnSsModel& model, const ControllerConfig& cfg, const Vector& x0,
                            const Schedule& schedule, const Reference& ref,
                            const std::optional<WarmStart>& warm = std::nullopt);

struct IterationRecord {
  int iterations = 0;
  std::vector<double> residuals;  // ||U^(j) - U^(j-1)||_2 per inner iteration
  bool converged = false;
  QpStatus qp_status = QpStatus::Solved;
  int qp_iterations = 0;
  double max_slack = 0.0;
  double t_convert_ms = 0.0;
  double t_qp_ms = 0.0;
  double t_total_ms = 0.0;
};

struct StepResult {
  Vector u;  // applied input
  IterationRecord record;
  InnerResult last;
  Schedule next_schedule;
};

/// Iterates inner_iteration until convergence or max_inner_iter and applies
/// the first input of the last iterate.
StepResult control_step(const AnnSsModel& model, const ControllerConfig& cfg, const Vector& x_hat,
                        const Schedule& warm_schedule, const Reference& ref,
                        const std::optional<WarmStart>& warm_qp = std::nullopt);

/// Receding-horizon controller holding the warm start between calls.
class LpvMpcController {
 public:
  LpvMpcController(const AnnSsModel& model, ControllerConfig cfg);

  const ControllerConfig& config() const { return cfg_; }
  StepResult step(const Vector& x_hat, const Reference& ref);
  void reset();

 private:
  const AnnSsModel& model_;
  ControllerConfig cfg_;
  std::optional<Schedule> schedule_;
  std::optional<WarmStart> warm_qp_;
  Index slack_count_ = 0;
};

/// Output setpoint per step, or a fixed state/input reference.
struct ReferenceSignal {
  std::function<Vector(Index)> setpoint;  // r_k; selector resolves (x_ref, u_ref)
  std::optional<Reference> fixed;

  static ReferenceSignal constant_output(const Vector& r);
  static ReferenceSignal piecewise(const std::vector<double>& levels, Index hold);
  static ReferenceSignal state_input(Reference ref);
};

struct LogRow {
  Index k = 0;
  Vector r;        // output setpoint (empty for fixed references)
  Vector y;        // measured output
  Vector y_clean;  // noiseless plant output
  Vector u;        // applied input
  Vector x_hat;
  Vector x_ref, u_ref;
  bool target_reachable = true;
  Vector predicted_outputs;
  IterationRecord record;
};

struct TrajectoryLog {
  std::vector<LogRow> rows;
  Index size() const { return static_cast<Index>(rows.size()); }
};

/// Runs the Algorithm 1 loop on a plant for n_sim steps. Before step 0 the
/// plant runs n = max(na, nb) samples with zero input to fill the encoder
/// window.
TrajectoryLog closed_loop(DiscretePlant& plant, const AnnSsModel& model, const ControllerConfig& cfg,
                          const ReferenceSignal& reference, Index n_sim);

/// Defaults for the disc study: Np = 10, Q = diag(1e3, 10), R = 1, |u| <= 4, |y| <= 1.2.
ControllerConfig disc_controller_config(ConversionMode mode = ConversionMode::Ftc);

}  // namespace lpvmpc
