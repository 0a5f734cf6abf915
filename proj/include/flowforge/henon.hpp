#pragma once

// Polynomial coefficient functions J, F, G for the periodically forced
// oscillator
//
//   x' = v - tau F(v, t) (.) x,
//   v'_j = -Omega_j^2 x_j - tau J_j(x, t) - tau v_j G_j(x, t),
//
// chosen so that its time-2pi map agrees to first order in tau with the
// time-tau flow of  x' = dH/dv,  v' = -dH/dx - gamma dH/dv  (run backwards by
// default).  Each (coordinate j, multi-index k) gives an independent small
// linear system whose entries are exact trigonometric inner products.

#include "flowforge/multipoly.hpp"
#include "flowforge/odeflow.hpp"

#include <Eigen/Dense>

#include <span>
#include <utility>
#include <vector>

namespace flowforge {

// Omega_j = 1 + M + ... + M^{j-1}.  Throws InputError on overflow.
std::vector<int> frequencies(int d, int max_degree);

// Componentwise harmonic solution with frequencies omega.
std::pair<Eigen::VectorXd, Eigen::VectorXd> unperturbed_solution(const Eigen::VectorXd& x0,
                                                                 const Eigen::VectorXd& v0,
                                                                 std::span<const int> omega,
                                                                 double t);

enum class ChunkDirection { Reverse, Forward };

// r1_j and r2_j as polynomials in (x, v).  Reverse: r1 = dH/dv_j,
// r2 = -(dH/dx_j + gamma dH/dv_j); Forward negates both.
struct TargetPolynomials {
  std::vector<Polynomial> r1;
  std::vector<Polynomial> r2;
};

TargetPolynomials target_polynomials(const Polynomial& H, double gamma,
                                     ChunkDirection direction = ChunkDirection::Reverse,
                                     int max_degree = 0);

struct CoefficientSystem {
  int j = 0;
  MultiIndex k;
  Eigen::MatrixXd matrix;  // 2n x (n' or 3n'), n = |box(k)|, n' = |box(k + e_j)|
  Eigen::VectorXd rhs;
  Eigen::VectorXd solution;
  Eigen::VectorXd singular_values;
  double residual = 0.0;  // max-norm of matrix * solution - rhs
  double rank_ratio = 0.0;  // sigma_{2n} / sigma_1, 1 for an all-zero matrix
};

struct HenonOptions {
  int max_degree = 0;  // 0: total degree of H, at least 1
  ChunkDirection direction = ChunkDirection::Reverse;
  bool keep_systems = false;
  double residual_tol = 1e-8;
  double rank_tol = 1e-10;
};

struct HenonSystem {
  std::vector<int> omega;
  double gamma = 1.0;
  double tau = 0.0;
  int max_degree = 1;
  std::vector<TimeVaryingPolynomial> J;  // in x, degree <= M
  std::vector<TimeVaryingPolynomial> F;  // in v, degree <= M - 1
  std::vector<TimeVaryingPolynomial> G;  // in x, degree <= M - 1
  double max_residual = 0.0;
  double min_rank_ratio = 1.0;
  long system_count = 0;
  std::vector<CoefficientSystem> systems;  // filled when keep_systems is set

  int dimension() const { return static_cast<int>(omega.size()); }
};

HenonSystem solve_coefficients(const Polynomial& H, double gamma, double tau,
                               const HenonOptions& options = {});

// Same construction for explicit targets (r1, r2 per coordinate, each a
// polynomial in (x, v)).
HenonSystem solve_coefficients_for_targets(const TargetPolynomials& targets,
                                           std::span<const int> omega, int max_degree,
                                           double gamma, double tau,
                                           const HenonOptions& options = {});

// (Phi1, Phi2) at (x0, v0) by periodic trapezoid quadrature with `nodes`
// points; the time-2pi map is (x0, v0) - tau (Phi1, Phi2) + O(tau^2).
std::pair<Eigen::VectorXd, Eigen::VectorXd> period_integrals(const HenonSystem& sys,
                                                             const Eigen::VectorXd& x0,
                                                             const Eigen::VectorXd& v0,
                                                             int nodes = 512);

PairField approximating_field(const HenonSystem& sys);

// x' = dH/dv, v' = -dH/dx - gamma dH/dv with its exact Jacobian.
VectorField hamiltonian_field(const Polynomial& H, double gamma);

// C1 distance between the time-2pi map of approximating_field and the
// chunk flow for each tau; slope fitted on c1.  Flagged degenerate when the
// distances do not vary with tau (less than a factor 2 over the list).
SlopeReport verify_chunk_order(const Polynomial& H, double gamma, const Box& box,
                               std::span<const double> taus, int per_axis, int steps = 2000,
                               const HenonOptions& options = {});

}  // namespace flowforge
