#include "lpvmpc/lpv.hpp"

#include "lpvmpc/parallel.hpp"

#include <cmath>
#include <sstream>

namespace lpvmpc {

std::string to_string(ConversionMode mode) { return mode == ConversionMode::Ftc ? "ftc" : "jacobian"; }

ConversionMode conversion_mode_from_string(const std::string& name) {
  if (name == "ftc") return ConversionMode::Ftc;
  if (name == "jacobian") return ConversionMode::Jacobian;
  throw ConfigError("unknown conversion mode '" + name + "' (expected ftc or jacobian)");
}

Vector SchedulingPoint::stacked() const {
  Vector p(x.size() + u.size());
  p << x, u;
  return p;
}

int ConversionConfig::intervals() const {
  if (!(dlambda > 0.0 && dlambda <= 1.0)) throw ArgumentError("dlambda must lie in (0, 1]");
  int n = static_cast<int>(std::lround(1.0 / dlambda));
  n = std::max(n, 2);
  if (n % 2 != 0) ++n;
  return n;
}

QuadratureRule simpson_rule(const ConversionConfig& cfg) {
  const int n = cfg.intervals();
  const double h = 1.0 / n;
  QuadratureRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n + 1));
  rule.weights.resize(static_cast<std::size_t>(n + 1));
  for (int j = 0; j <= n; ++j) {
    rule.nodes[j] = static_cast<double>(j) / n;
    const double coeff = (j == 0 || j == n) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
    rule.weights[j] = coeff * h / 3.0;
  }
  return rule;
}

namespace {

struct JacobianSample {
  Matrix df;  // nx x (nx + nu)
  Matrix dh;  // ny x nx
};

void check_point(const AnnSsModel& model, const SchedulingPoint& p, std::size_t index) {
  if (p.x.size() != model.nx() || p.u.size() != model.nu())
    throw ArgumentError("scheduling point " + std::to_string(index) + " has wrong dimension");
  if (!p.x.allFinite() || !p.u.allFinite())
    throw ArgumentError("scheduling point " + std::to_string(index) + " is not finite");
}

JacobianSample sample_jacobians(const AnnSsModel& model, const SchedulingPoint& p, double lambda, std::size_t index) {
  const Vector x = lambda * p.x;
  JacobianSample s{model.f_jacobian(x, lambda * p.u), model.h_jacobian(x)};
  if (!s.df.allFinite() || !s.dh.allFinite()) {
    std::ostringstream msg;
    msg << "non-finite Jacobian at scheduling point " << index << ", lambda = " << lambda;
    throw NumericalError(msg.str());
  }
  return s;
}

}  // namespace

std::vector<LpvPoint> convert_schedule(const AnnSsModel& model, std::span<const SchedulingPoint> points,
                                       const ConversionConfig& cfg) {
  const Index nx = model.nx();
  const Index nu = model.nu();
  for (std::size_t i = 0; i < points.size(); ++i) check_point(model, points[i], i);

  std::vector<LpvPoint> out(points.size());
  if (points.empty()) return out;

  if (cfg.mode == ConversionMode::Jacobian) {
    parallel_for(points.size(), cfg.workers, [&](std::size_t i) {
      const SchedulingPoint& p = points[i];
      const JacobianSample s = sample_jacobians(model, p, 1.0, i);
      LpvPoint& lpv = out[i];
      lpv.mode = ConversionMode::Jacobian;
      lpv.A = s.df.leftCols(nx);
      lpv.B = s.df.rightCols(nu);
      lpv.C = s.dh;
      lpv.v = model.f_eval(p.x, p.u) - lpv.A * p.x - lpv.B * p.u;
      lpv.w = model.h_eval(p.x) - lpv.C * p.x;
    });
    return out;
  }

  const QuadratureRule rule = simpson_rule(cfg);
  const std::size_t nodes = rule.nodes.size();
  std::vector<JacobianSample> samples(points.size() * nodes);
  parallel_for(samples.size(), cfg.workers, [&](std::size_t item) {
    const std::size_t i = item / nodes;
    samples[item] = sample_jacobians(model, points[i], rule.nodes[item % nodes], i);
  });

  const Vector v = model.f_eval(Vector::Zero(nx), Vector::Zero(nu));
  const Vector w = model.h_eval(Vector::Zero(nx));
  for (std::size_t i = 0; i < points.size(); ++i) {
    Matrix df = Matrix::Zero(nx, nx + nu);
    Matrix dh = Matrix::Zero(model.ny(), nx);
    for (std::size_t j = 0; j < nodes; ++j) {
      df += rule.weights[j] * samples[i * nodes + j].df;
      dh += rule.weights[j] * samples[i * nodes + j].dh;
    }
    LpvPoint& lpv = out[i];
    lpv.mode = ConversionMode::Ftc;
    lpv.A = df.leftCols(nx);
    lpv.B = df.rightCols(nu);
    lpv.C = dh;
    lpv.v = v;
    lpv.w = w;
  }
  return out;
}

LpvPoint convert_point(const AnnSsModel& model, const SchedulingPoint& p, const ConversionConfig& cfg) {
  return convert_schedule(model, std::span<const SchedulingPoint>(&p, 1), cfg).front();
}

ReconstructionError reconstruction_error(const AnnSsModel& model, const LpvPoint& lpv, const Vector& x,
                                         const Vector& u) {
  ReconstructionError e;
  e.state = (lpv.A * x + lpv.B * u + lpv.v - model.f_eval(x, u)).lpNorm<Eigen::Infinity>();
  e.output = (lpv.C * x + lpv.w - model.h_eval(x)).lpNorm<Eigen::Infinity>();
  return e;
}

}  // namespace lpvmpc
