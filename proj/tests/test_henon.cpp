#include <doctest.h>

#include "flowforge/errors.hpp"
#include "flowforge/henon.hpp"
#include "flowforge/random.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace flowforge;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

Polynomial harmonic_energy() {
  return Polynomial::monomial({2, 0}, 0.5) + Polynomial::monomial({0, 2}, 0.5);
}

Polynomial mixed_quadratic() {
  return Polynomial::monomial({2, 0}, 0.25) + Polynomial::monomial({1, 1}, 0.1) +
         Polynomial::monomial({0, 2}, -0.05) + Polynomial::monomial({1, 0}, 0.1);
}

Polynomial random_poly(int dim, int degree, CounterStream& rng) {
  Polynomial p(dim);
  for (const auto& idx : monomials_up_to(dim, degree)) p.add_term(idx, 0.3 * rng.normal());
  return p;
}

}  // namespace

TEST_CASE("frequencies examples") {
  CHECK(frequencies(1, 2) == std::vector<int>{1});
  CHECK(frequencies(2, 2) == std::vector<int>{1, 3});
  CHECK(frequencies(3, 2) == std::vector<int>{1, 3, 7});
  CHECK(frequencies(2, 4) == std::vector<int>{1, 5});
  CHECK_THROWS_AS(frequencies(40, 100), InputError);
  CHECK_THROWS_AS(frequencies(0, 2), InputError);
}

TEST_CASE("unperturbed_solution examples") {
  const Eigen::VectorXd x0 = Eigen::Vector2d(0.3, -1.2), v0 = Eigen::Vector2d(0.7, 0.4);
  const std::vector<int> w{1, 3};
  const auto [x, v] = unperturbed_solution(x0, v0, w, 0.0);
  CHECK(x == x0);
  CHECK(v == v0);
  const std::vector<int> one{1};
  const auto [xr, vr] = unperturbed_solution(Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), one, kPi / 2);
  CHECK(std::abs(xr[0]) <= 1e-15);
  CHECK(vr[0] == Approx(-1.0));
  const auto [xp, vp] = unperturbed_solution(x0, v0, w, 2 * kPi);
  CHECK((xp - x0).norm() <= 1e-13);
  CHECK((vp - v0).norm() <= 1e-13);
}

TEST_CASE("target_polynomials examples") {
  const TargetPolynomials zero = target_polynomials(Polynomial(2), 1.0);
  CHECK(zero.r1[0].is_zero());
  CHECK(zero.r2[0].is_zero());

  const TargetPolynomials t = target_polynomials(harmonic_energy(), 1.0);
  CHECK(t.r1[0] == Polynomial::monomial({0, 1}, 1.0));
  CHECK(t.r2[0] == Polynomial::monomial({1, 0}, -1.0) + Polynomial::monomial({0, 1}, -1.0));
  CHECK(t.r1[0].degree() <= 1);

  const TargetPolynomials f = target_polynomials(harmonic_energy(), 1.0, ChunkDirection::Forward);
  CHECK(f.r1[0] == t.r1[0] * -1.0);
  CHECK(f.r2[0] == t.r2[0] * -1.0);

  CHECK_THROWS_AS(target_polynomials(Polynomial::monomial({3, 0}, 1.0), 1.0, ChunkDirection::Reverse, 2),
                  InputError);
  CHECK_THROWS_AS(target_polynomials(Polynomial(3), 1.0), InputError);
}

TEST_CASE("zero Hamiltonian gives zero coefficients") {
  const HenonSystem sys = solve_coefficients(Polynomial(2), 1.0, 0.1);
  CHECK(sys.max_residual == 0.0);
  for (int j = 0; j < sys.dimension(); ++j) {
    CHECK(sys.J[j].freeze(0.7).is_zero());
    CHECK(sys.F[j].freeze(0.7).is_zero());
    CHECK(sys.G[j].freeze(0.7).is_zero());
  }
}

TEST_CASE("harmonic energy systems solve to tight residual") {
  HenonOptions o;
  o.max_degree = 2;
  o.keep_systems = true;
  const HenonSystem sys = solve_coefficients(harmonic_energy(), 1.0, 0.1, o);
  CHECK(sys.max_residual <= 1e-10);
  CHECK(sys.system_count == static_cast<long>(sys.systems.size()));
  for (const auto& s : sys.systems) {
    CHECK(s.residual <= 1e-10);
    CHECK(s.rank_ratio >= 1e-10);
  }
}

TEST_CASE("degree caps on J, F, G") {
  HenonOptions o;
  o.max_degree = 3;
  CounterStream rng(5, 0);
  const HenonSystem sys = solve_coefficients(random_poly(4, 3, rng), 0.8, 0.1, o);
  for (int j = 0; j < 2; ++j)
    for (double t : {0.0, 1.1, 4.0}) {
      CHECK(sys.J[j].freeze(t).degree() <= 3);
      CHECK(sys.F[j].freeze(t).degree() <= 2);
      CHECK(sys.G[j].freeze(t).degree() <= 2);
    }
}

TEST_CASE("period integrals reproduce the targets") {
  CounterStream rng(6, 0);
  for (int d : {1, 2}) {
    HenonOptions o;
    o.max_degree = 3;
    const Polynomial H = random_poly(2 * d, 3, rng);
    const HenonSystem sys = solve_coefficients(H, 1.0, 0.1, o);
    const TargetPolynomials tp = target_polynomials(H, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
      Eigen::VectorXd x(d), v(d), z(2 * d);
      for (int i = 0; i < d; ++i) {
        x[i] = rng.normal();
        v[i] = rng.normal();
      }
      z << x, v;
      // The trapezoid rule is exact on trigonometric polynomials of degree
      // below the node count.
      const auto [p1, p2] = period_integrals(sys, x, v, 1024);
      for (int j = 0; j < d; ++j) {
        CHECK(std::abs(p1[j] - poly_eval(tp.r1[j], z)) <= 1e-8);
        CHECK(std::abs(p2[j] - poly_eval(tp.r2[j], z)) <= 1e-8);
      }
    }
  }
}

TEST_CASE("rank of every coefficient system") {
  CounterStream rng(7, 0);
  for (int d : {1, 2})
    for (int m = 1; m <= 3; ++m) {
      HenonOptions o;
      o.max_degree = m;
      o.keep_systems = true;
      const HenonSystem sys = solve_coefficients(random_poly(2 * d, m, rng), 1.0, 0.1, o);
      CHECK(sys.min_rank_ratio >= 1e-10);
      CHECK(sys.max_residual <= 1e-8);
    }
}

TEST_CASE("approximating field with tau = 0 is 2 pi periodic") {
  const HenonSystem sys = solve_coefficients(mixed_quadratic(), 1.0, 0.0);
  const VectorField f = as_vector_field(approximating_field(sys));
  const Eigen::VectorXd z0 = Eigen::Vector2d(0.6, -1.1);
  CHECK((integrate(f, z0, 0.0, 2 * kPi, 4000) - z0).norm() <= 1e-10);
}

TEST_CASE("approximating field Jacobian matches finite differences") {
  CounterStream rng(8, 0);
  HenonOptions o;
  o.max_degree = 3;
  const HenonSystem sys = solve_coefficients(random_poly(4, 3, rng), 1.0, 0.2, o);
  const VectorField f = as_vector_field(approximating_field(sys));
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd z(4);
    for (int i = 0; i < 4; ++i) z[i] = rng.normal();
    const double t = 2 * kPi * rng.uniform();
    const Eigen::MatrixXd jac = f.jacobian(z, t);
    for (int c = 0; c < 4; ++c) {
      Eigen::VectorXd zp = z, zm = z;
      zp[c] += 1e-6;
      zm[c] -= 1e-6;
      const Eigen::VectorXd fd = (f.rhs(zp, t) - f.rhs(zm, t)) / 2e-6;
      CHECK((fd - jac.col(c)).norm() <= 1e-6 * std::max(1.0, jac.col(c).norm()));
    }
  }
}

TEST_CASE("hamiltonian field Jacobian") {
  const VectorField f = hamiltonian_field(mixed_quadratic(), 1.0);
  const Eigen::VectorXd z = Eigen::Vector2d(0.4, -0.3);
  const Eigen::VectorXd r = f.rhs(z, 0.0);
  // x' = dH/dv = 0.1 x - 0.1 v, v' = -dH/dx - dH/dv
  CHECK(r[0] == Approx(0.1 * 0.4 - 0.1 * -0.3));
  CHECK(r[1] == Approx(-(0.5 * 0.4 + 0.1 * -0.3 + 0.1) - (0.1 * 0.4 - 0.1 * -0.3)));
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd zp = z, zm = z;
    zp[c] += 1e-6;
    zm[c] -= 1e-6;
    CHECK(((f.rhs(zp, 0) - f.rhs(zm, 0)) / 2e-6 - f.jacobian(z, 0).col(c)).norm() <= 1e-8);
  }
}

TEST_CASE("verify_chunk_order examples") {
  const std::vector<double> taus{0.2, 0.1, 0.05, 0.025};
  const Box box = Box::cube(2, 2.0);
  const SlopeReport zero = verify_chunk_order(Polynomial(2), 1.0, box, taus, 3, 200);
  CHECK(zero.degenerate);
  CHECK(std::isnan(zero.slope));
  for (double c : zero.c1) CHECK(c <= 1e-6);

  const SlopeReport r = verify_chunk_order(mixed_quadratic(), 1.0, box, taus, 5, 1000);
  CHECK_FALSE(r.degenerate);
  CHECK(r.slope >= 1.8);
  CHECK(r.slope <= 2.2);
  CHECK(r.c1[1] < r.c1[0]);
}
