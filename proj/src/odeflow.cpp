#include "flowforge/odeflow.hpp"

#include "flowforge/errors.hpp"
#include "flowforge/linalg.hpp"
#include "flowforge/parallel.hpp"

#include <cmath>
#include <ostream>
#include <string>

namespace flowforge {

namespace {

void check_state(const Eigen::VectorXd& z, long step) {
  if (!z.allFinite()) throw DivergenceError("non-finite state", step);
  if (z.norm() > kDivergenceNorm) throw DivergenceError("state norm exceeded cutoff", step);
}

void check_steps(int steps) {
  if (steps < 1) throw InputError("integration needs at least one step");
}

}  // namespace

VectorField as_vector_field(const PairField& field) {
  const int d = field.dimension;
  VectorField out;
  out.dimension = 2 * d;
  out.rhs = [field, d](const Eigen::VectorXd& z, double t) {
    Eigen::VectorXd dz(2 * d);
    const Eigen::VectorXd x = z.head(d);
    const Eigen::VectorXd v = z.tail(d);
    dz.head(d) = field.f(x, v, t);
    dz.tail(d) = field.g(x, v, t);
    return dz;
  };
  if (field.f_x && field.f_v && field.g_x && field.g_v) {
    out.jacobian = [field, d](const Eigen::VectorXd& z, double t) {
      const Eigen::VectorXd x = z.head(d);
      const Eigen::VectorXd v = z.tail(d);
      Eigen::MatrixXd j(2 * d, 2 * d);
      j.topLeftCorner(d, d) = field.f_x(x, v, t);
      j.topRightCorner(d, d) = field.f_v(x, v, t);
      j.bottomLeftCorner(d, d) = field.g_x(x, v, t);
      j.bottomRightCorner(d, d) = field.g_v(x, v, t);
      return j;
    };
  }
  return out;
}

Box Box::cube(int dim, double half_width) {
  return Box{Eigen::VectorXd::Constant(dim, -half_width), Eigen::VectorXd::Constant(dim, half_width)};
}

std::vector<Eigen::VectorXd> grid_points(const Box& box, int per_axis) {
  if (per_axis < 2) throw InputError("grid_points: need at least 2 points per axis");
  if (box.lo.size() != box.hi.size()) throw InputError("grid_points: malformed box");
  const int dim = box.dimension();
  std::size_t total = 1;
  for (int i = 0; i < dim; ++i) total *= static_cast<std::size_t>(per_axis);
  std::vector<Eigen::VectorXd> pts;
  pts.reserve(total);
  std::vector<int> counter(dim, 0);
  for (std::size_t n = 0; n < total; ++n) {
    Eigen::VectorXd p(dim);
    for (int i = 0; i < dim; ++i)
      p[i] = box.lo[i] + (box.hi[i] - box.lo[i]) * counter[i] / (per_axis - 1);
    pts.push_back(std::move(p));
    for (int i = dim - 1; i >= 0; --i) {
      if (++counter[i] < per_axis) break;
      counter[i] = 0;
    }
  }
  return pts;
}

FlowProbe probe_flow(const FlowMap& map, std::span<const Eigen::VectorXd> points) {
  FlowProbe probe;
  probe.points.assign(points.begin(), points.end());
  probe.values.resize(points.size());
  probe.jacobians.resize(points.size());
  parallel_for(points.size(), [&](std::size_t i) {
    MapEvaluation e = map(points[i]);
    probe.values[i] = std::move(e.value);
    probe.jacobians[i] = std::move(e.jacobian);
  });
  return probe;
}

FlowProbe probe_flow(const FlowMap& map, const Box& box, int per_axis) {
  const auto pts = grid_points(box, per_axis);
  return probe_flow(map, pts);
}

FlowDistance flow_distance(const FlowProbe& a, const FlowProbe& b) {
  if (a.points.size() != b.points.size() || a.values.size() != b.values.size())
    throw InputError("flow_distance: probes have different sizes");
  double c0 = 0.0;
  double j = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    if ((a.points[i] - b.points[i]).norm() > 0.0)
      throw InputError("flow_distance: probes evaluated on different points");
    c0 = std::max(c0, (a.values[i] - b.values[i]).norm());
    j = std::max(j, spectral_norm(a.jacobians[i] - b.jacobians[i]));
  }
  return {c0, c0 + j};
}

FlowDistance flow_distance(const FlowMap& a, const FlowMap& b, const Box& box, int per_axis) {
  const auto pts = grid_points(box, per_axis);
  return flow_distance(probe_flow(a, pts), probe_flow(b, pts));
}

Eigen::VectorXd integrate(const VectorField& field, const Eigen::VectorXd& z0, double t0,
                          double t1, int steps) {
  check_steps(steps);
  if (z0.size() != field.dimension) throw InputError("integrate: state dimension mismatch");
  const double h = (t1 - t0) / steps;
  Eigen::VectorXd z = z0;
  for (int s = 0; s < steps; ++s) {
    const double t = t0 + s * h;
    const Eigen::VectorXd k1 = field.rhs(z, t);
    const Eigen::VectorXd k2 = field.rhs(z + 0.5 * h * k1, t + 0.5 * h);
    const Eigen::VectorXd k3 = field.rhs(z + 0.5 * h * k2, t + 0.5 * h);
    const Eigen::VectorXd k4 = field.rhs(z + h * k3, t + h);
    z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    check_state(z, s + 1);
  }
  return z;
}

MapEvaluation integrate_with_jacobian(const VectorField& field, const Eigen::VectorXd& z0,
                                      double t0, double t1, int steps) {
  check_steps(steps);
  if (!field.jacobian) throw InputError("integrate_with_jacobian: field has no Jacobian");
  if (z0.size() != field.dimension) throw InputError("integrate: state dimension mismatch");
  const double h = (t1 - t0) / steps;
  const auto n = z0.size();
  Eigen::VectorXd z = z0;
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
  for (int s = 0; s < steps; ++s) {
    const double t = t0 + s * h;
    const Eigen::VectorXd k1 = field.rhs(z, t);
    const Eigen::MatrixXd m1 = field.jacobian(z, t) * a;
    const Eigen::VectorXd zb = z + 0.5 * h * k1;
    const Eigen::VectorXd k2 = field.rhs(zb, t + 0.5 * h);
    const Eigen::MatrixXd m2 = field.jacobian(zb, t + 0.5 * h) * (a + 0.5 * h * m1);
    const Eigen::VectorXd zc = z + 0.5 * h * k2;
    const Eigen::VectorXd k3 = field.rhs(zc, t + 0.5 * h);
    const Eigen::MatrixXd m3 = field.jacobian(zc, t + 0.5 * h) * (a + 0.5 * h * m2);
    const Eigen::VectorXd zd = z + h * k3;
    const Eigen::VectorXd k4 = field.rhs(zd, t + h);
    const Eigen::MatrixXd m4 = field.jacobian(zd, t + h) * (a + h * m3);
    z += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    a += (h / 6.0) * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
    check_state(z, s + 1);
    if (!a.allFinite()) throw DivergenceError("non-finite Jacobian", s + 1);
  }
  return {z, a};
}

std::vector<Eigen::VectorXd> alternating_euler(const PairField& field, const Eigen::VectorXd& x0,
                                               const Eigen::VectorXd& v0, double t0, double eta,
                                               int n) {
  if (!(eta > 0.0)) throw InputError("alternating_euler: step must be positive");
  if (n < 0) throw InputError("alternating_euler: negative step count");
  const int d = field.dimension;
  if (x0.size() != d || v0.size() != d) throw InputError("alternating_euler: dimension mismatch");
  std::vector<Eigen::VectorXd> traj;
  traj.reserve(static_cast<std::size_t>(n) + 1);
  Eigen::VectorXd x = x0;
  Eigen::VectorXd v = v0;
  Eigen::VectorXd z(2 * d);
  z << x, v;
  traj.push_back(z);
  for (int i = 0; i < n; ++i) {
    const double t = t0 + i * eta;
    v = v + eta * field.g(x, v, t);
    x = x + eta * field.f(x, v, t);
    z << x, v;
    check_state(z, i + 1);
    traj.push_back(z);
  }
  return traj;
}

MapEvaluation alternating_euler_map(const PairField& field, const Eigen::VectorXd& z0, double t0,
                                    double eta, int n) {
  if (!(eta > 0.0)) throw InputError("alternating_euler: step must be positive");
  const int d = field.dimension;
  if (z0.size() != 2 * d) throw InputError("alternating_euler_map: dimension mismatch");
  if (!(field.f_x && field.f_v && field.g_x && field.g_v))
    throw InputError("alternating_euler_map: field has no partial Jacobians");
  Eigen::VectorXd x = z0.head(d);
  Eigen::VectorXd v = z0.tail(d);
  // alpha = dx/dz0, beta = dv/dz0, each d x 2d.
  Eigen::MatrixXd alpha = Eigen::MatrixXd::Identity(d, 2 * d);
  Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(d, 2 * d);
  beta.rightCols(d).setIdentity();
  Eigen::VectorXd z(2 * d);
  for (int i = 0; i < n; ++i) {
    const double t = t0 + i * eta;
    const Eigen::MatrixXd gx = field.g_x(x, v, t);
    const Eigen::MatrixXd gv = field.g_v(x, v, t);
    v = v + eta * field.g(x, v, t);
    beta = beta + eta * (gx * alpha + gv * beta);
    const Eigen::MatrixXd fx = field.f_x(x, v, t);
    const Eigen::MatrixXd fv = field.f_v(x, v, t);
    x = x + eta * field.f(x, v, t);
    alpha = alpha + eta * (fx * alpha + fv * beta);
    z << x, v;
    check_state(z, i + 1);
  }
  MapEvaluation out;
  out.value = z0.size() == 0 ? z0 : (Eigen::VectorXd(2 * d) << x, v).finished();
  out.jacobian.resize(2 * d, 2 * d);
  out.jacobian << alpha, beta;
  return out;
}

namespace {

// RK4 of y0' = A y0, y1' = A y1 + g(y0, t), optionally with Jacobians
// Y0' = A Y0, Y1' = A Y1 + Dg(y0, t) Y0.
struct PerturbedState {
  Eigen::VectorXd y0, y1;
  Eigen::MatrixXd j0, j1;
};

PerturbedState integrate_perturbation(const Eigen::MatrixXd& A, const Perturbation& pert,
                                      const Eigen::VectorXd& z0, double t, int steps,
                                      bool with_jacobian) {
  check_steps(steps);
  if (A.rows() != A.cols() || A.rows() != z0.size())
    throw InputError("perturbation: matrix/state dimension mismatch");
  const auto n = z0.size();
  PerturbedState s{z0, Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Identity(n, n),
                   Eigen::MatrixXd::Zero(n, n)};
  if (with_jacobian && !pert.jacobian) throw InputError("perturbation: missing Jacobian of g");
  const double h = t / steps;
  auto deriv = [&](const PerturbedState& u, double time) {
    PerturbedState du;
    du.y0 = A * u.y0;
    du.y1 = A * u.y1 + pert.g(u.y0, time);
    if (with_jacobian) {
      du.j0 = A * u.j0;
      du.j1 = A * u.j1 + pert.jacobian(u.y0, time) * u.j0;
    }
    return du;
  };
  auto axpy = [&](const PerturbedState& u, double c, const PerturbedState& du) {
    PerturbedState r{u.y0 + c * du.y0, u.y1 + c * du.y1, u.j0, u.j1};
    if (with_jacobian) {
      r.j0 = u.j0 + c * du.j0;
      r.j1 = u.j1 + c * du.j1;
    }
    return r;
  };
  for (int i = 0; i < steps; ++i) {
    const double time = i * h;
    const PerturbedState k1 = deriv(s, time);
    const PerturbedState k2 = deriv(axpy(s, 0.5 * h, k1), time + 0.5 * h);
    const PerturbedState k3 = deriv(axpy(s, 0.5 * h, k2), time + 0.5 * h);
    const PerturbedState k4 = deriv(axpy(s, h, k3), time + h);
    s.y0 += (h / 6.0) * (k1.y0 + 2.0 * k2.y0 + 2.0 * k3.y0 + k4.y0);
    s.y1 += (h / 6.0) * (k1.y1 + 2.0 * k2.y1 + 2.0 * k3.y1 + k4.y1);
    if (with_jacobian) {
      s.j0 += (h / 6.0) * (k1.j0 + 2.0 * k2.j0 + 2.0 * k3.j0 + k4.j0);
      s.j1 += (h / 6.0) * (k1.j1 + 2.0 * k2.j1 + 2.0 * k3.j1 + k4.j1);
    }
    check_state(s.y0, i + 1);
    check_state(s.y1, i + 1);
  }
  return s;
}

}  // namespace

Eigen::VectorXd perturbation_first_order(const Eigen::MatrixXd& A, const Perturbation& pert,
                                         const Eigen::VectorXd& z0, double eps, double t,
                                         int steps) {
  const PerturbedState s = integrate_perturbation(A, pert, z0, t, steps, false);
  return s.y0 + eps * s.y1;
}

MapEvaluation perturbation_first_order_map(const Eigen::MatrixXd& A, const Perturbation& pert,
                                           const Eigen::VectorXd& z0, double eps, double t,
                                           int steps) {
  const PerturbedState s = integrate_perturbation(A, pert, z0, t, steps, true);
  return {s.y0 + eps * s.y1, s.j0 + eps * s.j1};
}

double fit_loglog_slope(std::span<const double> x, std::span<const double> y, double floor) {
  if (x.size() != y.size()) throw InputError("fit_loglog_slope: length mismatch");
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !std::isfinite(y[i]) || !(y[i] > floor)) continue;
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  if (lx.size() < 2) throw DegenerateFitError("fit_loglog_slope: fewer than two usable points");
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  if (!(sxx > 0.0)) throw DegenerateFitError("fit_loglog_slope: parameters are not distinct");
  return sxy / sxx;
}

SlopeReport perturbation_order_check(const Eigen::MatrixXd& A, const Perturbation& pert,
                                     const Box& box, int per_axis, std::span<const double> eps,
                                     double t, int steps) {
  const auto pts = grid_points(box, per_axis);
  return perturbation_order_check(A, pert, pts, eps, t, steps);
}

SlopeReport perturbation_order_check(const Eigen::MatrixXd& A, const Perturbation& pert,
                                     std::span<const Eigen::VectorXd> pts,
                                     std::span<const double> eps, double t, int steps) {
  if (eps.size() < 3) throw InputError("perturbation_order_check: need at least 3 values");
  if (pts.empty()) throw InputError("perturbation_order_check: no probe points");
  SlopeReport report;
  for (double e : eps) {
    VectorField full;
    full.dimension = static_cast<int>(A.rows());
    full.rhs = [&, e](const Eigen::VectorXd& z, double time) -> Eigen::VectorXd {
      return A * z + e * pert.g(z, time);
    };
    full.jacobian = [&, e](const Eigen::VectorXd& z, double time) -> Eigen::MatrixXd {
      return A + e * pert.jacobian(z, time);
    };
    const FlowMap exact = [&](const Eigen::VectorXd& z) {
      return integrate_with_jacobian(full, z, 0.0, t, steps);
    };
    const FlowMap first = [&, e](const Eigen::VectorXd& z) {
      return perturbation_first_order_map(A, pert, z, e, t, steps);
    };
    const FlowDistance dist = flow_distance(probe_flow(exact, pts), probe_flow(first, pts));
    report.parameters.push_back(e);
    report.c0.push_back(dist.c0);
    report.c1.push_back(dist.c1);
  }
  try {
    report.slope = fit_loglog_slope(report.parameters, report.c1);
  } catch (const DegenerateFitError&) {
    report.degenerate = true;
    report.slope = std::nan("");
  }
  return report;
}

void write_probe_csv(std::ostream& os, const FlowProbe& probe) {
  if (probe.points.empty()) return;
  const auto n = probe.points.front().size();
  const auto m = probe.values.front().size();
  bool first = true;
  auto sep = [&]() -> std::ostream& {
    if (!first) os << ',';
    first = false;
    return os;
  };
  for (Eigen::Index i = 0; i < n; ++i) sep() << "point_" << i;
  for (Eigen::Index i = 0; i < m; ++i) sep() << "value_" << i;
  for (Eigen::Index r = 0; r < m; ++r)
    for (Eigen::Index c = 0; c < n; ++c) sep() << "jac_" << r << '_' << c;
  os << '\n';
  const auto old_precision = os.precision(17);
  for (std::size_t k = 0; k < probe.points.size(); ++k) {
    first = true;
    for (Eigen::Index i = 0; i < n; ++i) sep() << probe.points[k][i];
    for (Eigen::Index i = 0; i < m; ++i) sep() << probe.values[k][i];
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < n; ++c) sep() << probe.jacobians[k](r, c);
    os << '\n';
  }
  os.precision(old_precision);
}

}  // namespace flowforge
