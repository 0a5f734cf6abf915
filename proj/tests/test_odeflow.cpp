#include <doctest.h>

#include "flowforge/errors.hpp"
#include "flowforge/odeflow.hpp"
#include "flowforge/random.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

using namespace flowforge;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

VectorField linear(const Eigen::MatrixXd& A) {
  VectorField f;
  f.dimension = static_cast<int>(A.rows());
  f.rhs = [A](const Eigen::VectorXd& z, double) -> Eigen::VectorXd { return A * z; };
  f.jacobian = [A](const Eigen::VectorXd&, double) -> Eigen::MatrixXd { return A; };
  return f;
}

Eigen::MatrixXd harmonic() {
  Eigen::MatrixXd A(2, 2);
  A << 0, 1, -1, 0;
  return A;
}

PairField harmonic_pair() {
  PairField p;
  p.dimension = 1;
  p.f = [](const Eigen::VectorXd&, const Eigen::VectorXd& v, double) -> Eigen::VectorXd { return v; };
  p.g = [](const Eigen::VectorXd& x, const Eigen::VectorXd&, double) -> Eigen::VectorXd { return -x; };
  p.f_x = [](const Eigen::VectorXd&, const Eigen::VectorXd&, double) -> Eigen::MatrixXd { return Eigen::MatrixXd::Zero(1, 1); };
  p.f_v = [](const Eigen::VectorXd&, const Eigen::VectorXd&, double) -> Eigen::MatrixXd { return Eigen::MatrixXd::Identity(1, 1); };
  p.g_x = [](const Eigen::VectorXd&, const Eigen::VectorXd&, double) -> Eigen::MatrixXd { return -Eigen::MatrixXd::Identity(1, 1); };
  p.g_v = p.f_x;
  return p;
}

// Nonlinear, time-dependent pair field for the Jacobian recurrence check.
PairField nonlinear_pair() {
  PairField p;
  p.dimension = 1;
  p.f = [](const Eigen::VectorXd& x, const Eigen::VectorXd& v, double t) -> Eigen::VectorXd {
    return (v.array() * (1.0 + 0.3 * std::sin(t) * x.array())).matrix();
  };
  p.g = [](const Eigen::VectorXd& x, const Eigen::VectorXd& v, double) -> Eigen::VectorXd {
    return (-x.array() - 0.2 * x.array().cube() - 0.1 * v.array()).matrix();
  };
  p.f_x = [](const Eigen::VectorXd&, const Eigen::VectorXd& v, double t) -> Eigen::MatrixXd {
    return Eigen::MatrixXd::Constant(1, 1, 0.3 * std::sin(t) * v[0]);
  };
  p.f_v = [](const Eigen::VectorXd& x, const Eigen::VectorXd&, double t) -> Eigen::MatrixXd {
    return Eigen::MatrixXd::Constant(1, 1, 1.0 + 0.3 * std::sin(t) * x[0]);
  };
  p.g_x = [](const Eigen::VectorXd& x, const Eigen::VectorXd&, double) -> Eigen::MatrixXd {
    return Eigen::MatrixXd::Constant(1, 1, -1.0 - 0.6 * x[0] * x[0]);
  };
  p.g_v = [](const Eigen::VectorXd&, const Eigen::VectorXd&, double) -> Eigen::MatrixXd {
    return Eigen::MatrixXd::Constant(1, 1, -0.1);
  };
  return p;
}

}  // namespace

TEST_CASE("integrate examples") {
  const VectorField zero = linear(Eigen::MatrixXd::Zero(2, 2));
  CHECK(integrate(zero, Eigen::Vector2d(1, 2), 0, 3, 7) == Eigen::VectorXd(Eigen::Vector2d(1, 2)));
  const VectorField grow = linear(Eigen::MatrixXd::Identity(1, 1));
  CHECK(std::abs(integrate(grow, Eigen::VectorXd::Ones(1), 0, 1, 1000)[0] - std::exp(1.0)) <= 1e-9);
  const Eigen::VectorXd round = integrate(linear(harmonic()), Eigen::Vector2d(1, 0), 0, 2 * kPi, 1000);
  CHECK((round - Eigen::Vector2d(1, 0)).norm() <= 1e-8);
}

TEST_CASE("integrate reports divergence") {
  const VectorField blow = linear(Eigen::MatrixXd::Constant(1, 1, 50.0));
  CHECK_THROWS_AS(integrate(blow, Eigen::VectorXd::Ones(1), 0, 10, 100), DivergenceError);
  VectorField nan_field = blow;
  nan_field.rhs = [](const Eigen::VectorXd& z, double) -> Eigen::VectorXd {
    return Eigen::VectorXd::Constant(z.size(), std::nan(""));
  };
  try {
    integrate(nan_field, Eigen::VectorXd::Ones(1), 0, 1, 10);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step() == 1);
  }
}

TEST_CASE("integrate is fourth order") {
  VectorField f;
  f.dimension = 2;
  f.rhs = [](const Eigen::VectorXd& z, double t) -> Eigen::VectorXd {
    return Eigen::Vector2d(z[1], -std::sin(z[0]) + 0.1 * std::cos(t));
  };
  const Eigen::VectorXd z0 = Eigen::Vector2d(0.5, 0.2);
  const Eigen::VectorXd fine = integrate(f, z0, 0, 2, 1600);
  const double e1 = (integrate(f, z0, 0, 2, 50) - fine).norm();
  const double e2 = (integrate(f, z0, 0, 2, 100) - fine).norm();
  CHECK(e1 / e2 >= 8.0);
}

TEST_CASE("integrate_with_jacobian examples") {
  const MapEvaluation id = integrate_with_jacobian(linear(Eigen::MatrixXd::Zero(3, 3)), Eigen::VectorXd::Ones(3), 0, 1, 10);
  CHECK(id.jacobian.isApprox(Eigen::MatrixXd::Identity(3, 3)));
  const MapEvaluation ex = integrate_with_jacobian(linear(Eigen::MatrixXd::Constant(1, 1, -0.7)), Eigen::VectorXd::Ones(1), 0, 2, 1000);
  CHECK(std::abs(ex.jacobian(0, 0) - std::exp(-1.4)) <= 1e-9);
  const MapEvaluation rot = integrate_with_jacobian(linear(harmonic()), Eigen::Vector2d(1, 0), 0, kPi / 2, 1000);
  Eigen::Matrix2d want;
  want << 0, 1, -1, 0;
  CHECK((rot.jacobian - want).norm() <= 1e-8);
}

TEST_CASE("integrate_with_jacobian matches finite differences") {
  VectorField f;
  f.dimension = 2;
  f.rhs = [](const Eigen::VectorXd& z, double t) -> Eigen::VectorXd {
    return Eigen::Vector2d(z[1] + 0.1 * z[0] * z[1], -std::sin(z[0]) - 0.2 * z[1] + 0.05 * t);
  };
  f.jacobian = [](const Eigen::VectorXd& z, double) -> Eigen::MatrixXd {
    Eigen::Matrix2d j;
    j << 0.1 * z[1], 1 + 0.1 * z[0], -std::cos(z[0]), -0.2;
    return j;
  };
  CounterStream rng(5, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd z0 = Eigen::Vector2d(rng.normal(), rng.normal());
    const MapEvaluation m = integrate_with_jacobian(f, z0, 0, 1.5, 300);
    const double h = 1e-5;
    for (int c = 0; c < 2; ++c) {
      Eigen::VectorXd zp = z0, zm = z0;
      zp[c] += h;
      zm[c] -= h;
      const Eigen::VectorXd fd = (integrate(f, zp, 0, 1.5, 300) - integrate(f, zm, 0, 1.5, 300)) / (2 * h);
      CHECK((fd - m.jacobian.col(c)).norm() <= 1e-4 * std::max(1.0, fd.norm()));
    }
  }
}

TEST_CASE("alternating_euler examples") {
  const auto traj = alternating_euler(harmonic_pair(), Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), 0, 0.1, 1);
  REQUIRE(traj.size() == 2);
  CHECK(traj[1][1] == Approx(-0.1));
  CHECK(traj[1][0] == Approx(0.99));

  PairField zero = harmonic_pair();
  zero.f = [](const Eigen::VectorXd&, const Eigen::VectorXd& v, double) -> Eigen::VectorXd { return 0 * v; };
  zero.g = zero.f;
  const auto flat = alternating_euler(zero, Eigen::VectorXd::Ones(1), Eigen::VectorXd::Constant(1, 2), 0, 0.3, 5);
  for (const auto& z : flat) CHECK(z == Eigen::VectorXd(Eigen::Vector2d(1, 2)));

  std::vector<double> etas, errs;
  for (int n : {200, 400, 800, 1600}) {
    const double eta = 2 * kPi / n;
    const auto t = alternating_euler(harmonic_pair(), Eigen::VectorXd::Ones(1), Eigen::VectorXd::Zero(1), 0, eta, n);
    etas.push_back(eta);
    errs.push_back((t.back() - Eigen::Vector2d(1, 0)).norm());
  }
  // Over one full period the symplectic-Euler phase error cancels to
  // second order; the first-order term shows up on non-periodic spans.
  CHECK(fit_loglog_slope(etas, errs) >= 0.8);
}

TEST_CASE("alternating Euler Jacobian recurrence is exact") {
  const PairField f = nonlinear_pair();
  CounterStream rng(6, 0);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::VectorXd z0 = Eigen::Vector2d(rng.normal(), rng.normal());
    const MapEvaluation m = alternating_euler_map(f, z0, 0.3, 0.05, 40);
    const double h = 1e-6;
    for (int c = 0; c < 2; ++c) {
      Eigen::VectorXd zp = z0, zm = z0;
      zp[c] += h;
      zm[c] -= h;
      const Eigen::VectorXd fp = alternating_euler(f, zp.head(1), zp.tail(1), 0.3, 0.05, 40).back();
      const Eigen::VectorXd fm = alternating_euler(f, zm.head(1), zm.tail(1), 0.3, 0.05, 40).back();
      CHECK(((fp - fm) / (2 * h) - m.jacobian.col(c)).cwiseAbs().maxCoeff() <= 1e-8);
    }
  }
}

TEST_CASE("alternating Euler is first order on a non-periodic span") {
  const PairField f = nonlinear_pair();
  const VectorField full = as_vector_field(f);
  const Box box = Box::cube(2, 1.0);
  const FlowMap ref = [&](const Eigen::VectorXd& z) { return integrate_with_jacobian(full, z, 0, 1, 2000); };
  std::vector<double> etas{0.04, 0.02, 0.01, 0.005}, c1;
  for (double eta : etas) {
    const int n = static_cast<int>(std::lround(1.0 / eta));
    const FlowMap e = [&](const Eigen::VectorXd& z) { return alternating_euler_map(f, z, 0, eta, n); };
    c1.push_back(flow_distance(e, ref, box, 5).c1);
  }
  const double slope = fit_loglog_slope(etas, c1);
  CHECK(slope >= 0.8);
  CHECK(slope <= 1.2);
}

TEST_CASE("flow_distance examples") {
  const Box box = Box::cube(2, 1.0);
  const FlowMap id = [](const Eigen::VectorXd& z) { return MapEvaluation{z, Eigen::MatrixXd::Identity(2, 2)}; };
  const FlowMap shifted = [](const Eigen::VectorXd& z) {
    return MapEvaluation{(z.array() + 0.3).matrix(), Eigen::MatrixXd::Identity(2, 2)};
  };
  const FlowMap twice = [](const Eigen::VectorXd& z) { return MapEvaluation{2 * z, 2 * Eigen::MatrixXd::Identity(2, 2)}; };
  const FlowDistance self = flow_distance(id, id, box, 3);
  CHECK(self.c0 == 0.0);
  CHECK(self.c1 == 0.0);
  const FlowDistance s = flow_distance(id, shifted, box, 3);
  CHECK(s.c0 == Approx(0.3 * std::sqrt(2.0)));
  CHECK(s.c1 == Approx(s.c0));
  const FlowDistance t = flow_distance(id, twice, box, 3);
  CHECK(t.c0 == Approx(std::sqrt(2.0)));
  CHECK(t.c1 == Approx(std::sqrt(2.0) + 1));
}

TEST_CASE("grid points include the corners in row-major order") {
  const auto pts = grid_points(Box::cube(2, 2.0), 3);
  REQUIRE(pts.size() == 9);
  CHECK(pts.front() == Eigen::VectorXd(Eigen::Vector2d(-2, -2)));
  CHECK(pts[1] == Eigen::VectorXd(Eigen::Vector2d(-2, 0)));
  CHECK(pts.back() == Eigen::VectorXd(Eigen::Vector2d(2, 2)));
}

TEST_CASE("gronwall_bound examples") {
  CHECK(gronwall_bound(0.0, 1.0, 0.0, 3.0) == 3.0);
  CHECK(gronwall_bound(1.0, 0.0, 1.0, 1.0) == Approx(std::exp(1.0)));
  CHECK(gronwall_bound(2.5, 1.5, 0.7, 0.0) == 0.7);
  CHECK(gronwall_bound(1.0f, 0.0f, 1.0f, 1.0f) == doctest::Approx(std::exp(1.0f)));
}

TEST_CASE("perturbation_first_order examples") {
  const Eigen::MatrixXd A = harmonic();
  const Perturbation cube{[](const Eigen::VectorXd& z, double) -> Eigen::VectorXd { return z.array().cube(); },
                          [](const Eigen::VectorXd& z, double) -> Eigen::MatrixXd {
                            return (3.0 * z.array().square()).matrix().asDiagonal();
                          }};
  const Perturbation none{[](const Eigen::VectorXd& z, double) -> Eigen::VectorXd { return 0 * z; },
                          [](const Eigen::VectorXd& z, double) -> Eigen::MatrixXd {
                            return Eigen::MatrixXd::Zero(z.size(), z.size());
                          }};
  const Eigen::VectorXd z0 = Eigen::Vector2d(0.4, -0.3);
  Eigen::Matrix2d rot;
  rot << std::cos(1.2), std::sin(1.2), -std::sin(1.2), std::cos(1.2);
  CHECK((perturbation_first_order(A, cube, z0, 0.0, 1.2, 500) - rot * z0).norm() <= 1e-10);
  CHECK((perturbation_first_order(A, none, z0, 0.3, 1.2, 500) - rot * z0).norm() <= 1e-10);

  const Perturbation one{[](const Eigen::VectorXd&, double) -> Eigen::VectorXd { return Eigen::VectorXd::Ones(1); },
                         [](const Eigen::VectorXd&, double) -> Eigen::MatrixXd { return Eigen::MatrixXd::Zero(1, 1); }};
  CHECK(perturbation_first_order(Eigen::MatrixXd::Zero(1, 1), one, Eigen::VectorXd::Zero(1), 0.1, 2.0, 100)[0] ==
        Approx(0.2));
}

TEST_CASE("perturbation_order_check examples") {
  const std::vector<double> eps{0.1, 0.05, 0.025};
  const Perturbation constant{[](const Eigen::VectorXd& z, double) -> Eigen::VectorXd { return Eigen::VectorXd::Ones(z.size()); },
                              [](const Eigen::VectorXd& z, double) -> Eigen::MatrixXd {
                                return Eigen::MatrixXd::Zero(z.size(), z.size());
                              }};
  const SlopeReport flat = perturbation_order_check(harmonic(), constant, Box::cube(2, 1.0), 3, eps, 1.0, 200);
  CHECK(flat.degenerate);

  const Perturbation sq{[](const Eigen::VectorXd& z, double) -> Eigen::VectorXd { return z.array().square(); },
                        [](const Eigen::VectorXd& z, double) -> Eigen::MatrixXd {
                          return (2.0 * z.array()).matrix().asDiagonal();
                        }};
  Box b;
  b.lo = Eigen::VectorXd::Constant(1, 0.5);
  b.hi = Eigen::VectorXd::Constant(1, 1.0);
  const SlopeReport s = perturbation_order_check(-Eigen::MatrixXd::Identity(1, 1), sq, b, 5, eps, 1.0, 400);
  CHECK(s.slope >= 1.8);
  CHECK(s.slope <= 2.2);
  CHECK_THROWS_AS(perturbation_order_check(harmonic(), sq, Box::cube(2, 1.0), 3, std::vector<double>{0.1, 0.05}, 1, 10),
                  InputError);
}

TEST_CASE("fit_loglog_slope") {
  const std::vector<double> x{1, 2, 4, 8}, y{3, 12, 48, 192};
  CHECK(fit_loglog_slope(x, y) == Approx(2.0));
  CHECK_THROWS_AS(fit_loglog_slope(x, std::vector<double>{0, 0, 0, 0}), DegenerateFitError);
}

TEST_CASE("probe CSV header") {
  const FlowMap id = [](const Eigen::VectorXd& z) { return MapEvaluation{z, Eigen::MatrixXd::Identity(2, 2)}; };
  std::ostringstream os;
  write_probe_csv(os, probe_flow(id, Box::cube(2, 1.0), 2));
  const std::string text = os.str();
  CHECK(text.rfind("point_0,point_1,value_0,value_1,jac_0_0,jac_0_1,jac_1_0,jac_1_1\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
}
