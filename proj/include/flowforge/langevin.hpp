#pragma once

// Underdamped Langevin dynamics with a standard Gaussian target.  Phase-space
// vectors are stacked as z = (x, v) with x, v in R^d; the linear drift is
// x' = v, v' = -x - gamma v, i.e. B (x) I_d with B = [[0, 1], [-1, -gamma]].

#include "flowforge/odeflow.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace flowforge {

struct LangevinParams {
  int d = 1;
  double gamma = 1.0;

  // Throws InputError unless d >= 1 and 0 < gamma < 2.
  void validate() const;
};

struct GaussianDensity {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  int dimension() const { return static_cast<int>(mean.size()); }
  // Symmetric to 1e-12 and positive definite; throws MatrixError otherwise.
  void validate() const;
};

struct ConditioningReport {
  double kappa = 1.0;
  double gamma = 1.0;
  double lower = 1.0;   // A(kappa, gamma)
  double upper = 1.0;   // B(kappa, gamma) = 1 / A
  double bound = 1.0;   // B / A
  double observed_min = 1.0;
  double observed_max = 1.0;
  double observed_condition = 1.0;  // worst per-point ratio
  double identity_deviation = 0.0;  // max ||D - I||_2 over samples
  long samples = 0;
  long violations = 0;
};

// e^{Bt} for the 2x2 drift block.  Closed form from the eigenvalues
// -gamma/2 +- i sqrt(1 - gamma^2/4); gamma >= 2 is handled by the
// critically damped and overdamped forms.
template <typename Scalar>
Eigen::Matrix<Scalar, 2, 2> block_exp(Scalar gamma, Scalar t) {
  using std::cos;
  using std::cosh;
  using std::exp;
  using std::sin;
  using std::sinh;
  using std::sqrt;
  const Scalar h = gamma / Scalar(2);
  const Scalar disc = Scalar(1) - h * h;
  Scalar c, s;
  if (disc > Scalar(0)) {
    const Scalar w = sqrt(disc);
    c = cos(w * t);
    s = sin(w * t) / w;
  } else if (disc < Scalar(0)) {
    const Scalar w = sqrt(-disc);
    c = cosh(w * t);
    s = sinh(w * t) / w;
  } else {
    c = Scalar(1);
    s = t;
  }
  Eigen::Matrix<Scalar, 2, 2> m;
  m << c + s * h, s, -s, c - s * h;
  return exp(-h * t) * m;
}

// sqrt((2 + gamma)/(2 - gamma)) e^{-gamma t / 2}, a bound on ||e^{Bt}||_2.
double block_exp_norm_bound(double gamma, double t);

// 2x2 block expanded to (2d)x(2d) as block (x) I_d.
Eigen::MatrixXd kron_identity(const Eigen::Matrix2d& block, int d);

// [[0, I], [-I, -gamma I]].
Eigen::MatrixXd drift_matrix(double gamma, int d);

// Sigma_t = e^{Bt}(Sigma_0 - I)e^{B^T t} + I.
Eigen::MatrixXd variance_proxy(const Eigen::MatrixXd& sigma0, double gamma, double t);

GaussianDensity gaussian_evolve(const GaussianDensity& p0, double gamma, double t);

// z -> C(-Sigma^{-1}(z - mu) + z), the probability-flow field at a frozen
// density.
VectorField langevin_field(const GaussianDensity& p, double gamma);

// Time-dependent probability-flow field along the Gaussian path started at p0.
VectorField langevin_path_field(const GaussianDensity& p0, double gamma);

// A(kappa, gamma) = (1 + ((2+gamma)/(2-gamma))(kappa-1))^{-2/gamma}.
double conditioning_lower_bound(double kappa, double gamma);

// kappa = largest eigenvalue of Sigma_0^{-1}.  Throws PreconditionError if
// the smallest is below 1 (beyond a 1e-12 relative slack).
double source_kappa(const Eigen::MatrixXd& sigma0);

// Integrates D' = C(I - Sigma_t^{-1}) D, D_0 = I on [0, t1] and records the
// singular values of D at every step.
ConditioningReport jacobian_flow(const Eigen::MatrixXd& sigma0, double gamma, double kappa,
                                 double t1, int steps);

struct IntegralBoundReport {
  double integral = 0.0;  // trapezoid approximation of the integral of ||C H_s||_2
  double bound = 0.0;     // (2/gamma) ln(1 + ((2+gamma)/(2-gamma))(kappa-1))
  bool pass = false;
};

IntegralBoundReport hessian_integral_check(const Eigen::MatrixXd& sigma0, double gamma,
                                           double kappa, double t1, int steps);

struct ConvolutionReport {
  double lower_margin = 0.0;  // min eigenvalue of H - (Sigma_2 + Sigma)^{-1}
  double upper_margin = 0.0;  // min eigenvalue of (Sigma_1 + Sigma)^{-1} - H
  Eigen::MatrixXd hessian;    // -Hess ln(p * q), constant for Gaussians
  long probes = 0;
  bool pass = false;
};

// p = N(0, Sigma_p) with Sigma_1 <= Sigma_p <= Sigma_2, q = N(0, Sigma).
// Checks (Sigma_2 + Sigma)^{-1} <= -Hess ln(p * q) <= (Sigma_1 + Sigma)^{-1}
// at every probe.
ConvolutionReport convolution_hessian_check(const Eigen::MatrixXd& sigma1,
                                            const Eigen::MatrixXd& sigma2,
                                            const Eigen::MatrixXd& sigma_p,
                                            const Eigen::MatrixXd& sigma,
                                            const std::vector<Eigen::VectorXd>& probes,
                                            double tol = 1e-10);

// S = [[1/4, 1/2], [1/2, 2]] (x) I_d.
Eigen::MatrixXd lyapunov_weight(int d);

// KL(p || N(0, I)) + E_p <u, S u>,  u = grad ln p - grad ln N(0, I).
double lyapunov_gaussian(const GaussianDensity& p);

struct SdeOptions {
  double gamma = 1.0;
  double eta = 0.01;
  long steps = 100;
  long particles = 1000;
  std::uint64_t seed = 0;
  bool noise = true;
};

// Kinetic Langevin particles:  v <- (1 - eta gamma) v - eta grad_U(x) + xi,
// xi ~ N(0, 2 gamma eta I), then x <- x + eta v.  Returns one particle per
// row as (x, v).  Each particle draws from its own counter stream.
Eigen::MatrixXd sde_simulate(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad_U,
                             const GaussianDensity& initial, const SdeOptions& options);

// Rows as x_0..x_{d-1}, v_0..v_{d-1}.
void write_particles_csv(std::ostream& os, const Eigen::MatrixXd& particles);

}  // namespace flowforge
