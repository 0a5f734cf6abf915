#include <doctest.h>

#include "flowforge/errors.hpp"
#include "flowforge/linalg.hpp"
#include "flowforge/pipeline.hpp"

#include <cmath>
#include <numbers>

using namespace flowforge;
using doctest::Approx;

namespace {

BuildConfig one_dim(double sx, double tau, double phi) {
  BuildConfig c;
  c.d = 1;
  c.sigma_x = Eigen::MatrixXd::Constant(1, 1, sx);
  c.gamma = 1.0;
  c.tau = tau;
  c.phi = phi;
  c.probe_grid = 9;
  return c;
}

std::vector<Eigen::VectorXd> ball_points(int dim, double radius, int per_axis) {
  std::vector<Eigen::VectorXd> out;
  for (const auto& z : grid_points(Box::cube(dim, radius), per_axis))
    if (z.norm() <= radius + 1e-12) out.push_back(z);
  return out;
}

}  // namespace

TEST_CASE("choose_time examples") {
  CHECK(choose_time(std::exp(-1.0), 1.0) == Approx(10.0 + std::log(2.0)));
  CHECK(choose_time(0.5, 0.0) == 1.0);
  CHECK(choose_time(0.5, 1e-300) == 1.0);
  CHECK(choose_time(0.1, 2.0) > choose_time(0.1, 1.0));
  CHECK_THROWS_AS(choose_time(1.5, 1.0), InputError);
}

TEST_CASE("choose_radius examples") {
  const double mean_norm = std::sqrt(std::numbers::pi / 2);  // E|z| for dim 2
  CHECK(gaussian_tail_moment(0.0, 2) == Approx(2 * mean_norm).epsilon(1e-10));
  CHECK(choose_radius(3.0, 2) == 0.25);
  const double r = choose_radius(1e-3, 2);
  CHECK(gaussian_tail_moment(r, 2) < 1e-3);
  CHECK(gaussian_tail_moment(r / 1.02, 2) >= 1e-3);
  double prev = 1e9;
  for (double delta : {1e-6, 1e-4, 1e-2, 1.0}) {
    const double rr = choose_radius(delta, 4);
    CHECK(rr <= prev);
    prev = rr;
  }
  // Closed form in dim 2: 2 (R e^{-R^2/2} + sqrt(pi/2) erfc(R/sqrt 2)).
  const double R = 1.7;
  const double exact = 2 * (R * std::exp(-R * R / 2) + mean_norm * std::erfc(R / std::sqrt(2.0)));
  CHECK(gaussian_tail_moment(R, 2) == Approx(exact).epsilon(1e-10));
}

TEST_CASE("chunk_hamiltonian examples") {
  const GaussianDensity std2{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)};
  const Polynomial h0 = chunk_hamiltonian(std2);
  CHECK(poly_eval(h0, Eigen::Vector2d(0.3, 1.2)) == Approx(0.0));
  CHECK(poly_gradient(h0, Eigen::Vector2d(0.3, 1.2)).norm() <= 1e-15);

  GaussianDensity p = std2;
  p.covariance(0, 0) = 2.0;
  const Polynomial h = chunk_hamiltonian(p);
  CHECK(h.coefficient({2, 0}) == Approx(0.25));
  CHECK(h.coefficient({0, 2}) == Approx(0.0));

  GaussianDensity q{Eigen::Vector2d(0.4, -0.3), Eigen::Matrix2d::Identity()};
  q.covariance << 0.6, 0.1, 0.1, 1.4;
  const Polynomial hq = chunk_hamiltonian(q);
  const Eigen::MatrixXd prec = spd_inverse(q.covariance);
  for (const Eigen::VectorXd& z : {Eigen::VectorXd(Eigen::Vector2d(0.1, 0.2)), Eigen::VectorXd(Eigen::Vector2d(-1, 2))}) {
    const Eigen::VectorXd want = -prec * (z - q.mean) + z;
    CHECK((poly_gradient(hq, z) - want).norm() <= 1e-10);
  }
  GaussianDensity bad = std2;
  bad.covariance.setZero();
  CHECK_THROWS_AS(chunk_hamiltonian(bad), MatrixError);
}

TEST_CASE("reference flow is the affine probability-flow map") {
  const BuildConfig c = one_dim(0.5, 0.25, 3.0);
  const MapEvaluation ref = reference_flow(c.source(), 1.0, 3.0, 400);
  // Pushing N(0, I) back through the affine map must give the source.
  const Eigen::MatrixXd cov = ref.jacobian * ref.jacobian.transpose();
  const GaussianDensity at_phi = gaussian_evolve(c.source(), 1.0, 3.0);
  const Eigen::MatrixXd back = ref.jacobian * at_phi.covariance * ref.jacobian.transpose();
  CHECK((back - c.source().covariance).norm() <= 1e-8);
  CHECK(cov.allFinite());
}

TEST_CASE("config validation") {
  BuildConfig c = one_dim(0.5, 0.25, 5.0);
  CHECK_NOTHROW(c.validate());
  c.gamma = 2.0;
  CHECK_THROWS_AS(c.validate(), InputError);
  c = one_dim(2.0, 0.25, 5.0);
  CHECK_THROWS_AS(c.validate(), PreconditionError);
  c = one_dim(0.5, 0.0, 5.0);
  CHECK_THROWS_AS(c.validate(), InputError);
}

TEST_CASE("identity source builds a near-identity network") {
  BuildConfig c = one_dim(1.0, 0.25, 0.0);
  const BuildResult r = build_network(c);
  CHECK(r.report.phi == 1.0);
  CHECK_FALSE(r.report.notes.empty());
  CHECK(r.report.block_count == 2 * r.report.chunks * r.report.steps_per_chunk);
  const auto pts = ball_points(2, 2.0, 21);
  double worst = 0.0;
  for (const auto& z : pts) worst = std::max(worst, (network_forward(r.network, z) - z).norm());
  CHECK(worst <= 0.01);
  CHECK(r.report.conditioning.observed_condition <= 1.05);
  const W1Report w = evaluate_w1(r.network, c, 3.0, 100000, 5, 32);
  CHECK(w.sliced <= 0.05);
}

TEST_CASE("kappa 2 build") {
  BuildConfig c = one_dim(0.5, 0.25, 5.0);
  const BuildResult r = build_network(c);
  const long steps = static_cast<long>(std::ceil(2 * std::numbers::pi / (0.25 * 0.25)));
  CHECK(r.report.chunks == 20);
  CHECK(r.report.steps_per_chunk == steps);
  CHECK(r.report.block_count == 2 * 20 * steps);
  CHECK(r.report.kappa == Approx(2.0));
  CHECK(r.report.max_residual <= 1e-8);
  CHECK(r.report.roundtrip <= 1e-9);
  CHECK(r.report.conditioning.bound == Approx(256.0));
  CHECK(r.report.conditioning.observed_condition <= r.report.conditioning.bound * 1.2);
  CHECK(r.report.c0 <= 0.25);
  CHECK(r.report.min_abs_scale > 0.0);
}

TEST_CASE("tau that does not divide phi is shortened") {
  BuildConfig c = one_dim(0.5, 0.3, 1.0);
  c.probe_grid = 3;
  const BuildResult r = build_network(c);
  CHECK(r.report.chunks == 4);
  CHECK(r.report.tau_eff == Approx(0.25));
  CHECK(r.report.notes.size() == 2);
}
