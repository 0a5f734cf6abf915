#pragma once

// Fixed-step flow maps of ordinary differential equations: reference RK4
// integration (optionally with the variational equation), the alternating
// Euler scheme for split position/velocity systems, C0/C1 distances between
// flow maps on a compact box, and first-order perturbation utilities.

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace flowforge {

// Divergence cutoff on the Euclidean norm of any integrated state.
inline constexpr double kDivergenceNorm = 1e12;

struct VectorField {
  int dimension = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> rhs;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)> jacobian;
};

// Split field  x' = f(x, v, t),  v' = g(x, v, t)  with x, v in R^d.  The
// partial Jacobian callbacks are needed only for the Jacobian-tracking
// variants.
struct PairField {
  using Part = std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&, double)>;
  using Partial =
      std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&, double)>;
  int dimension = 0;
  Part f;
  Part g;
  Partial f_x, f_v, g_x, g_v;
};

// Stacks (x, v) into one 2d-dimensional field.
VectorField as_vector_field(const PairField& field);

// Value and Jacobian of a map at a point.
struct MapEvaluation {
  Eigen::VectorXd value;
  Eigen::MatrixXd jacobian;
};

using FlowMap = std::function<MapEvaluation(const Eigen::VectorXd&)>;

// Axis-aligned box [lo, hi].
struct Box {
  Eigen::VectorXd lo;
  Eigen::VectorXd hi;

  static Box cube(int dim, double half_width);
  int dimension() const { return static_cast<int>(lo.size()); }
};

// Uniform lattice with `per_axis` points per axis including the corners,
// row-major (last coordinate varies fastest).
std::vector<Eigen::VectorXd> grid_points(const Box& box, int per_axis);

struct FlowProbe {
  std::vector<Eigen::VectorXd> points;
  std::vector<Eigen::VectorXd> values;
  std::vector<Eigen::MatrixXd> jacobians;
};

FlowProbe probe_flow(const FlowMap& map, std::span<const Eigen::VectorXd> points);
FlowProbe probe_flow(const FlowMap& map, const Box& box, int per_axis);

// c0 = max ||T_a - T_b||_2 over the probe points;
// c1 = c0 + max ||DT_a - DT_b||_2 (spectral norm).
struct FlowDistance {
  double c0 = 0.0;
  double c1 = 0.0;
};

FlowDistance flow_distance(const FlowProbe& a, const FlowProbe& b);
FlowDistance flow_distance(const FlowMap& a, const FlowMap& b, const Box& box, int per_axis);

// Classical fixed-step RK4 from t0 to t1 (t1 < t0 integrates backwards).
Eigen::VectorXd integrate(const VectorField& field, const Eigen::VectorXd& z0, double t0,
                          double t1, int steps);

// RK4 on the state together with the variational equation
// alpha' = DF(z, t) alpha, alpha(t0) = I.
MapEvaluation integrate_with_jacobian(const VectorField& field, const Eigen::VectorXd& z0,
                                      double t0, double t1, int steps);

// Alternating Euler: V_{i+1} = V_i + eta g(X_i, V_i, t_i), then
// X_{i+1} = X_i + eta f(X_i, V_{i+1}, t_i), t_i = t0 + i eta.  Returns the
// n + 1 iterates as stacked (x, v) vectors.
std::vector<Eigen::VectorXd> alternating_euler(const PairField& field, const Eigen::VectorXd& x0,
                                               const Eigen::VectorXd& v0, double t0, double eta,
                                               int n);

// Final iterate of the alternating Euler scheme together with its Jacobian,
// obtained by running the same scheme on the augmented pairs (x, alpha) and
// (v, beta).
MapEvaluation alternating_euler_map(const PairField& field, const Eigen::VectorXd& z0, double t0,
                                    double eta, int n);

// Bound (b t + x0) e^{a t} for x' <= a x + b.
template <typename Scalar>
Scalar gronwall_bound(Scalar a, Scalar b, Scalar x0, Scalar t) {
  using std::exp;
  return (b * t + x0) * exp(a * t);
}

// Perturbation term of  z' = A z + eps g(z, t).
struct Perturbation {
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, double)> g;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&, double)> jacobian;
};

// y0(t) + eps y1(t) with y0' = A y0, y1' = A y1 + g(y0, t), y0(0) = z0,
// y1(0) = 0.
Eigen::VectorXd perturbation_first_order(const Eigen::MatrixXd& A, const Perturbation& pert,
                                         const Eigen::VectorXd& z0, double eps, double t,
                                         int steps);

// Same map with its Jacobian in z0.
MapEvaluation perturbation_first_order_map(const Eigen::MatrixXd& A, const Perturbation& pert,
                                           const Eigen::VectorXd& z0, double eps, double t,
                                           int steps);

// Least-squares slope of log(y) against log(x).  Points with y at or below
// `floor` are ignored; fewer than two usable points throws
// DegenerateFitError.
double fit_loglog_slope(std::span<const double> x, std::span<const double> y,
                        double floor = 1e-12);

struct SlopeReport {
  std::vector<double> parameters;
  std::vector<double> c0;
  std::vector<double> c1;
  double slope = 0.0;  // fitted on c1
  bool degenerate = false;
};

// Compares the full flow of z' = A z + eps g against the first-order map
// for each eps and fits the log-log slope of the C1 distance.
SlopeReport perturbation_order_check(const Eigen::MatrixXd& A, const Perturbation& pert,
                                     const Box& box, int per_axis, std::span<const double> eps,
                                     double t, int steps);

// Same check over an explicit probe set (for example a grid clipped to a ball).
SlopeReport perturbation_order_check(const Eigen::MatrixXd& A, const Perturbation& pert,
                                     std::span<const Eigen::VectorXd> points,
                                     std::span<const double> eps, double t, int steps);

// CSV with columns point_i, value_i, jac_r_c.
void write_probe_csv(std::ostream& os, const FlowProbe& probe);

}  // namespace flowforge
