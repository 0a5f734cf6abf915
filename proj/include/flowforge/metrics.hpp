#pragma once

// Distances between distributions: exact empirical W1 in one dimension,
// sliced W1 in several, and closed forms for Gaussians.

#include "flowforge/langevin.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>

namespace flowforge {

// One sample per row.
struct SampleCloud {
  Eigen::MatrixXd points;
  std::uint64_t seed = 0;

  int dimension() const { return static_cast<int>(points.cols()); }
  long size() const { return static_cast<long>(points.rows()); }
};

// Exact W1 between two empirical measures on the line, computed as the
// integral of |F_a - F_b|.  Sizes may differ; for equal sizes this is the
// mean absolute difference of the sorted samples.
double w1_1d(std::span<const double> a, std::span<const double> b);

// Unit direction k of the sliced estimator (normalized Gaussian draw).
Eigen::VectorXd slice_direction(int dim, std::uint64_t seed, std::uint64_t k);

// Mean of w1_1d over `n_directions` projections.
double sliced_w1(const SampleCloud& a, const SampleCloud& b, int n_directions,
                 std::uint64_t seed);

// W1 of each coordinate marginal.
Eigen::VectorXd marginal_w1(const SampleCloud& a, const SampleCloud& b);

// KL(p || q).
double gaussian_kl(const GaussianDensity& p, const GaussianDensity& q);

// Closed-form W2 between Gaussians.
double gaussian_w2(const GaussianDensity& p, const GaussianDensity& q);

struct TalagrandReport {
  double w2 = 0.0;      // exact, an upper bound for W1
  double kl = 0.0;      // KL(q || N(0, I))
  double margin = 0.0;  // 2 KL - W2^2
  bool pass = false;
};

// W1(q, N(0, I))^2 <= W2^2 <= 2 KL(q || N(0, I)).
TalagrandReport talagrand_check(const GaussianDensity& q, double tol = 1e-12);

// Draws n samples of N(mean, cov) using per-sample counter streams.
SampleCloud sample_gaussian(const GaussianDensity& p, long n, std::uint64_t seed);

// Samples of N(0, I_dim) conditioned on the ball of radius R (rejection).
SampleCloud sample_truncated_gaussian(int dim, double radius, long n, std::uint64_t seed);

void write_cloud_csv(std::ostream& os, const SampleCloud& cloud, bool phase_space);
SampleCloud read_cloud_csv(std::istream& is);

}  // namespace flowforge
