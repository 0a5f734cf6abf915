#pragma once

// End-to-end construction: a coupling network approximating the flow map
// T_{phi,0} of the Gaussian probability-flow ODE, which carries N(0, I) at
// time phi back to the padded source N((mu, 0), diag(Sigma_x, I)).

#include "flowforge/coupling.hpp"
#include "flowforge/langevin.hpp"
#include "flowforge/metrics.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace flowforge {

struct BuildConfig {
  int d = 1;
  Eigen::VectorXd mean;     // length d; empty means zero
  Eigen::MatrixXd sigma_x;  // d x d with I <= Sigma_x^{-1} <= kappa I
  double gamma = 1.0;
  double epsilon = 0.1;
  double tau = 0.25;
  double eta = 0.0;     // 0: tau^2
  double phi = 0.0;     // 0: choose_time
  double radius = 0.0;  // 0: choose_radius(epsilon_1, 2d)
  // Time at which each chunk's Hamiltonian is frozen: the chunk midpoint
  // (second order in tau) or its upper end.
  bool freeze_midpoint = true;
  int probe_grid = 21;
  double probe_half_width = 2.0;
  int reference_steps_per_unit = 200;
  std::uint64_t seed = 0;

  // Throws InputError on malformed fields, PreconditionError when the
  // source violates the covariance hypothesis.
  void validate() const;
  GaussianDensity source() const;
};

struct BuildReport {
  double kappa = 1.0;
  double lyapunov0 = 0.0;
  double lipschitz_bound = 1.0;
  double epsilon1 = 0.0;
  double phi = 0.0;
  bool phi_chosen = false;
  double radius = 0.0;
  long chunks = 0;
  double tau_eff = 0.0;
  long steps_per_chunk = 0;
  double eta_eff = 0.0;
  long block_count = 0;
  double max_residual = 0.0;
  double min_rank_ratio = 1.0;
  double c0 = 0.0;  // network vs reference T_{phi,0} on the probe grid
  double c1 = 0.0;
  double roundtrip = 0.0;  // max |inverse(forward(z)) - z| on the probe grid
  double min_abs_scale = 0.0;
  long min_scale_block = -1;
  ConditioningReport conditioning;
  std::vector<std::string> notes;
};

// phi = -10 ln eps1 + ln 2 + ln L0, floored at 1.  L0 <= 0 returns 1.
double choose_time(double eps1, double L0);

// 2 E[|z| 1{|z| > R}] for z ~ N(0, I_dim), by Simpson quadrature of the chi
// density.
double gaussian_tail_moment(double radius, int dim);

// Smallest R on the grid 0.25 * 1.02^i with gaussian_tail_moment(R) < delta.
double choose_radius(double delta, int dim);

// H(z) = -1/2 (z - mu)^T Sigma^{-1} (z - mu) + 1/2 |z|^2 without the constant.
Polynomial chunk_hamiltonian(const GaussianDensity& p);

// Affine reference T_{phi,0}(z) = c + Phi z of the probability-flow ODE.
MapEvaluation reference_flow(const GaussianDensity& p0, double gamma, double phi,
                             int steps_per_unit);

struct BuildResult {
  CouplingNetwork network;
  BuildReport report;
};

BuildResult build_network(const BuildConfig& cfg);

struct W1Report {
  long samples = 0;
  int directions = 0;
  double radius = 0.0;
  double sliced = 0.0;
  Eigen::VectorXd marginals;
};

// Pushes N(0, I) restricted to B(0, R) through the network and compares with
// direct samples of the padded source.
W1Report evaluate_w1(const CouplingNetwork& net, const BuildConfig& cfg, double radius,
                     long n_samples, std::uint64_t seed, int directions = 64,
                     Eigen::MatrixXd* pushed = nullptr);

// Same comparison against an explicit phase-space target.
W1Report evaluate_w1(const CouplingNetwork& net, const GaussianDensity& target, double radius,
                     long n_samples, std::uint64_t seed, int directions = 64,
                     Eigen::MatrixXd* pushed = nullptr);

}  // namespace flowforge
