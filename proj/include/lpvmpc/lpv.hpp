#pragma once

#include "lpvmpc/common.hpp"
#include "lpvmpc/model.hpp"

#include <span>
#include <string>
#include <vector>

namespace lpvmpc {

enum class ConversionMode { Ftc, Jacobian };

std::string to_string(ConversionMode mode);
ConversionMode conversion_mode_from_string(const std::string& name);

/// Scheduling variable p = col(x, u); the scheduling map is the identity.
struct SchedulingPoint {
  Vector x;
  Vector u;

  Vector stacked() const;
};

struct ConversionConfig {
  double dlambda = 0.05;  // quadrature step on [0, 1]
  ConversionMode mode = ConversionMode::Ftc;
  unsigned workers = 1;

  /// Simpson subinterval count: round(1 / dlambda), bumped to the next even number.
  int intervals() const;
};

/// x+ = A x + B u + v, y = C x + w, valid at the scheduling point it was built for.
struct LpvPoint {
  Matrix A;  // nx x nx
  Matrix B;  // nx x nu
  Matrix C;  // ny x nx
  Vector v;  // nx
  Vector w;  // ny
  ConversionMode mode = ConversionMode::Ftc;
};

/// Simpson nodes and weights on [0, 1] for the configured step.
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};
QuadratureRule simpson_rule(const ConversionConfig& cfg);

/// Ftc mode: A, B, C are line integrals of the model Jacobians along
/// lambda * p for lambda in [0, 1], v = f(0, 0), w = h(0). Jacobian mode:
/// single Jacobians at p with v, w chosen so the form is exact at p.
LpvPoint convert_point(const AnnSsModel& model, const SchedulingPoint& p, const ConversionConfig& cfg);

/// Element-wise convert_point. Work fans out across points and quadrature
/// nodes; results are summed in ascending lambda so they do not depend on
/// the worker count.
std::vector<LpvPoint> convert_schedule(const AnnSsModel& model, std::span<const SchedulingPoint> points,
                                       const ConversionConfig& cfg);

struct ReconstructionError {
  double state = 0.0;   // ||A x + B u + v - f(x, u)||_inf
  double output = 0.0;  // ||C x + w - h(x)||_inf
};

ReconstructionError reconstruction_error(const AnnSsModel& model, const LpvPoint& lpv, const Vector& x,
                                         const Vector& u);

}  // namespace lpvmpc
