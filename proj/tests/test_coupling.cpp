#include <doctest.h>

#include "flowforge/coupling.hpp"
#include "flowforge/errors.hpp"
#include "flowforge/linalg.hpp"
#include "flowforge/random.hpp"

#include <cmath>
#include <vector>

using namespace flowforge;
using doctest::Approx;

namespace {

CouplingBlock identity_block(int dim, std::vector<bool> mask) {
  int na = 0;
  for (bool b : mask) na += b;
  const int np = dim - na;
  return CouplingBlock(mask, std::vector<Polynomial>(na, Polynomial::constant(np, 1.0)),
                       std::vector<Polynomial>(na, Polynomial(np)));
}

// Random block whose scale stays near 1; `amp` shrinks every coefficient
// so that long compositions stay bounded.
CouplingBlock random_block(std::vector<bool> mask, CounterStream& rng, double amp = 1.0) {
  const int dim = static_cast<int>(mask.size());
  int na = 0;
  for (bool b : mask) na += b;
  const int np = dim - na;
  std::vector<Polynomial> scale, shift;
  for (int i = 0; i < na; ++i) {
    Polynomial s = Polynomial::constant(np, 1.0 + amp * 0.2 * (rng.uniform() - 0.5));
    Polynomial t(np);
    for (const auto& idx : monomials_up_to(np, 2)) {
      const int deg = total_degree(idx);
      if (deg == 1) s.add_term(idx, amp * 0.02 * rng.normal());
      t.add_term(idx, amp * (deg == 2 ? 0.03 : 0.3) * rng.normal());
    }
    scale.push_back(s);
    shift.push_back(t);
  }
  return CouplingBlock(mask, scale, shift);
}

CouplingNetwork random_network(int dim, int blocks, CounterStream& rng, double amp = 1.0) {
  CouplingNetwork net;
  net.domain = Box::cube(dim, 2.0);
  for (int b = 0; b < blocks; ++b) {
    std::vector<bool> mask(dim, false);
    for (int i = 0; i < dim; ++i) mask[i] = ((i + b) % 2) == 0;
    net.blocks.push_back(random_block(mask, rng, amp));
  }
  return net;
}

Eigen::VectorXd random_point(int dim, CounterStream& rng) {
  Eigen::VectorXd z(dim);
  for (int i = 0; i < dim; ++i) z[i] = rng.normal();
  return z;
}

}  // namespace

TEST_CASE("block_forward examples") {
  const CouplingBlock id = identity_block(2, {false, true});
  const Eigen::VectorXd z = Eigen::Vector2d(2, 5);
  CHECK(block_forward(id, z) == z);
  CHECK(block_inverse(id, z) == z);

  const CouplingBlock b({false, true}, {Polynomial::constant(1, 1.0)}, {Polynomial::monomial({1}, -1.0)});
  CHECK(block_forward(b, z) == Eigen::VectorXd(Eigen::Vector2d(2, 3)));
  CHECK((block_inverse(b, block_forward(b, z)) - z).norm() <= 1e-12);
  CHECK_THROWS_AS(block_forward(b, Eigen::VectorXd::Zero(3)), InputError);
}

TEST_CASE("block round trip on random probes") {
  CounterStream rng(11, 0);
  const CouplingBlock b = random_block({true, false, true, false}, rng);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXd z = random_point(4, rng);
    CHECK((block_forward(b, block_inverse(b, z)) - z).norm() <= 1e-10);
  }
}

TEST_CASE("singular scale is reported") {
  // scale(x) = x vanishes at x = 0
  const CouplingBlock b({false, true}, {Polynomial::monomial({1}, 1.0)}, {Polynomial(1)});
  CHECK_THROWS_AS(block_inverse(b, Eigen::Vector2d(0.0, 1.0)), SingularBlockError);
  try {
    double z[2] = {0.0, 1.0};
    b.inverse_inplace(z, 17);
    FAIL("expected a singular block");
  } catch (const SingularBlockError& e) {
    CHECK(e.block() == 17);
    CHECK(e.coordinate() == 1);
  }
  const BlockJacobian j = block_jacobian(b, Eigen::Vector2d(0.0, 1.0));
  CHECK(j.singular);
  CHECK(std::isinf(j.log_abs_det));
  CHECK(j.log_abs_det < 0);
}

TEST_CASE("block_jacobian examples") {
  const BlockJacobian id = block_jacobian(identity_block(3, {true, false, true}), Eigen::Vector3d(1, 2, 3));
  CHECK(id.jacobian == Eigen::MatrixXd::Identity(3, 3));
  CHECK(id.log_abs_det == 0.0);

  const CouplingBlock two({true, false, true}, {Polynomial::constant(1, 2.0), Polynomial::constant(1, 2.0)},
                          {Polynomial(1), Polynomial(1)});
  CHECK(block_jacobian(two, Eigen::Vector3d(0.1, 0.2, 0.3)).log_abs_det == Approx(2 * std::log(2.0)));

  CounterStream rng(12, 0);
  const std::vector<bool> mask{false, true, true, false};
  const CouplingBlock b = random_block(mask, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd z = random_point(4, rng);
    const BlockJacobian j = block_jacobian(b, z);
    // Passive rows are unit rows; active rows have zero entries in the
    // other active columns.
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) {
        if (!mask[r]) CHECK(j.jacobian(r, c) == (r == c ? 1.0 : 0.0));
        else if (mask[c] && r != c) CHECK(j.jacobian(r, c) == 0.0);
      }
    CHECK(std::log(std::abs(j.jacobian.determinant())) == Approx(j.log_abs_det).epsilon(1e-12));
    for (int c = 0; c < 4; ++c) {
      Eigen::VectorXd zp = z, zm = z;
      zp[c] += 1e-6;
      zm[c] -= 1e-6;
      CHECK(((block_forward(b, zp) - block_forward(b, zm)) / 2e-6 - j.jacobian.col(c)).norm() <= 1e-7);
    }
  }
}

TEST_CASE("euler_step_to_blocks examples") {
  const HenonSystem sys = solve_coefficients(Polynomial(2), 1.0, 0.0);
  const auto [bv, bx] = euler_step_to_blocks(sys, 0.1, 0);
  Eigen::VectorXd z = Eigen::Vector2d(1.0, 0.0);
  z = block_forward(bv, z);
  CHECK(z[1] == Approx(-0.1));
  CHECK(z[0] == 1.0);
  z = block_forward(bx, z);
  CHECK(z[0] == Approx(0.99));
  CHECK(bv.mask() == std::vector<bool>{false, true});
  CHECK(bx.mask() == std::vector<bool>{true, false});
}

TEST_CASE("blocks reproduce the alternating Euler trajectory") {
  CounterStream rng(13, 0);
  Polynomial H(4);
  for (const auto& idx : monomials_up_to(4, 2)) H.add_term(idx, 0.2 * rng.normal());
  const HenonSystem sys = solve_coefficients(H, 1.0, 0.2);
  const PairField field = approximating_field(sys);
  const double eta = 0.05;
  const int n = 40;
  const Eigen::VectorXd z0 = random_point(4, rng);
  const auto traj = alternating_euler(field, z0.head(2), z0.tail(2), 0.0, eta, n);
  Eigen::VectorXd z = z0;
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto [bv, bx] = euler_step_to_blocks(sys, eta, i);
    z = block_forward(bx, block_forward(bv, z));
    worst = std::max(worst, (z - traj[i + 1]).norm());
  }
  // Same update, different floating-point association.
  CHECK(worst <= 1e-12);
}

TEST_CASE("network forward, inverse and Jacobians") {
  CounterStream rng(14, 0);
  const CouplingNetwork net = random_network(4, 12, rng);
  CHECK_NOTHROW(net.validate());
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::VectorXd z = random_point(4, rng);
    CHECK((network_inverse(net, network_forward(net, z)) - z).norm() <= 1e-9);
    const NetworkJacobian f = network_jacobian(net, z);
    CHECK((f.value - network_forward(net, z)).norm() <= 1e-14);
    CHECK(std::log(std::abs(f.jacobian.determinant())) == Approx(f.log_abs_det).epsilon(1e-8));
    const NetworkJacobian inv = network_inverse_jacobian(net, f.value);
    CHECK((inv.value - z).norm() <= 1e-9);
    CHECK((inv.jacobian - f.jacobian.inverse()).norm() <= 1e-8 * f.jacobian.inverse().norm());
    CHECK(inv.log_abs_det == Approx(-f.log_abs_det).epsilon(1e-8));
  }
  CouplingNetwork bad = net;
  bad.blocks.push_back(identity_block(2, {true, false}));
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("network_pushforward examples") {
  CounterStream rng(15, 0);
  Eigen::MatrixXd cloud(50, 2);
  for (int i = 0; i < 50; ++i) cloud.row(i) = random_point(2, rng).transpose();

  CouplingNetwork empty;
  empty.domain = Box::cube(2, 3.0);
  CHECK(network_pushforward(empty, cloud, Direction::Forward) == cloud);

  CouplingNetwork shift;
  shift.domain = Box::cube(2, 3.0);
  shift.blocks.emplace_back(std::vector<bool>{true, false}, std::vector<Polynomial>{Polynomial::constant(1, 1.0)},
                            std::vector<Polynomial>{Polynomial::constant(1, 0.75)});
  const Eigen::MatrixXd moved = network_pushforward(shift, cloud, Direction::Forward);
  CHECK((moved.col(0).array() - cloud.col(0).array() - 0.75).abs().maxCoeff() <= 1e-15);
  CHECK(moved.col(1) == cloud.col(1));

  const CouplingNetwork net = random_network(2, 400, rng, 0.05);
  const Eigen::MatrixXd there = network_pushforward(net, cloud, Direction::Forward);
  const Eigen::MatrixXd back = network_pushforward(net, there, Direction::Inverse);
  CHECK((back - cloud).cwiseAbs().maxCoeff() <= 1e-9);

  CouplingNetwork singular;
  singular.domain = Box::cube(2, 3.0);
  singular.blocks.push_back(identity_block(2, {true, false}));
  singular.blocks.emplace_back(std::vector<bool>{false, true}, std::vector<Polynomial>{Polynomial(1)},
                               std::vector<Polynomial>{Polynomial(1)});
  try {
    network_pushforward(singular, cloud, Direction::Inverse);
    FAIL("expected a singular block");
  } catch (const SingularBlockError& e) {
    CHECK(e.block() == 1);
  }
}

TEST_CASE("network_conditioning examples") {
  CouplingNetwork id;
  id.domain = Box::cube(2, 1.0);
  id.blocks.push_back(identity_block(2, {true, false}));
  const ConditioningReport a = network_conditioning(id, id.domain, 5);
  CHECK(a.observed_min == Approx(1.0));
  CHECK(a.observed_max == Approx(1.0));
  CHECK(a.observed_condition == Approx(1.0));

  CouplingNetwork two = id;
  two.blocks[0] = CouplingBlock({true, false}, {Polynomial::constant(1, 2.0)}, {Polynomial(1)});
  const ConditioningReport b = network_conditioning(two, two.domain, 5);
  CHECK(b.observed_min == Approx(1.0));
  CHECK(b.observed_max == Approx(2.0));
  CHECK(b.observed_condition == Approx(2.0));
  CHECK(b.samples == 25);

  const InvertibilityReport inv = certify_invertibility(two, two.domain, 5);
  CHECK(inv.min_abs_scale.size() == 1);
  CHECK(inv.worst == Approx(2.0));
  CHECK(inv.worst_block == 0);
}

TEST_CASE("network_map agrees with network_jacobian") {
  CounterStream rng(16, 0);
  const CouplingNetwork net = random_network(2, 6, rng);
  const FlowMap m = network_map(net);
  const Eigen::VectorXd z = random_point(2, rng);
  const MapEvaluation e = m(z);
  const NetworkJacobian j = network_jacobian(net, z);
  CHECK((e.value - j.value).norm() <= 1e-15);
  CHECK((e.jacobian - j.jacobian).norm() <= 1e-15);
}
