#include <doctest.h>

#include "flowforge/errors.hpp"
#include "flowforge/multipoly.hpp"
#include "flowforge/random.hpp"

#include <cmath>
#include <numbers>

using namespace flowforge;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

Polynomial random_poly(int dim, int degree, CounterStream& rng) {
  Polynomial p(dim);
  for (const auto& idx : monomials_up_to(dim, degree)) p.add_term(idx, rng.normal());
  return p;
}

TrigFunction random_trig(CounterStream& rng, int max_m) {
  TrigFunction f;
  for (int k = 0; k < 6; ++k) {
    const int m = static_cast<int>(rng.uniform() * (max_m + 1));
    f.add_mode(m, rng.normal(), m == 0 ? 0.0 : rng.normal());
  }
  return f;
}

}  // namespace

TEST_CASE("poly_eval examples") {
  CHECK(poly_eval(Polynomial::constant(2, 1.0), vec({3, -2})) == 1.0);
  CHECK(poly_eval(Polynomial::monomial({2, 1}, 1.0), vec({2, 3})) == 12.0);
  CHECK(poly_eval(Polynomial(2), vec({0.3, 7})) == 0.0);
  CHECK_THROWS_AS(poly_eval(Polynomial(2), vec({1})), InputError);
}

TEST_CASE("poly_partial examples") {
  const Polynomial x2 = Polynomial::monomial({2, 0}, 1.0);
  CHECK(poly_partial(x2, 0) == Polynomial::monomial({1, 0}, 2.0));
  CHECK(poly_partial(x2, 1).is_zero());
  Polynomial p = Polynomial::monomial({1, 1}, 1.0) + Polynomial::monomial({3, 0}, 1.0);
  CHECK(poly_partial(p, 0) == Polynomial::monomial({0, 1}, 1.0) + Polynomial::monomial({2, 0}, 3.0));
  CHECK_THROWS_AS(poly_partial(p, 2), InputError);
}

TEST_CASE("polynomial invariants") {
  CounterStream rng(1, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const Polynomial p = random_poly(3, 3, rng), q = random_poly(3, 3, rng);
    const Eigen::VectorXd z = vec({rng.normal(), rng.normal(), rng.normal()});
    const double lhs = poly_eval(p + q, z), rhs = poly_eval(p, z) + poly_eval(q, z);
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(rhs)));
    CHECK(poly_partial(poly_partial(p, 0), 2) == poly_partial(poly_partial(p, 2), 0));
  }
  Polynomial p(1);
  p.add_term({1}, 1.0);
  p.add_term({1}, -1.0);
  CHECK(p.is_zero());
}

TEST_CASE("compiled polynomial matches the term map") {
  CounterStream rng(2, 0);
  const Polynomial p = random_poly(4, 4, rng);
  const CompiledPolynomial c(p);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd z = vec({rng.normal(), rng.normal(), rng.normal(), rng.normal()});
    double grad[4];
    CHECK(c.eval(z.data()) == Approx(poly_eval(p, z)).epsilon(1e-12));
    CHECK(c.eval_with_gradient(z.data(), grad) == Approx(poly_eval(p, z)).epsilon(1e-12));
    const Eigen::VectorXd g = poly_gradient(p, z);
    for (int i = 0; i < 4; ++i) CHECK(grad[i] == Approx(g[i]).epsilon(1e-12));
  }
}

TEST_CASE("trig_product examples") {
  const TrigFunction c1 = TrigFunction::cosine(1), s1 = TrigFunction::sine(1);
  TrigFunction want;
  want.add_mode(0, 0.5, 0.0);
  want.add_mode(2, 0.5, 0.0);
  CHECK(trig_product(c1, c1) == want);
  CHECK(trig_product(s1, c1) == TrigFunction::sine(2, 0.5));
  CHECK(trig_product(c1, TrigFunction()).is_zero());
}

TEST_CASE("trig_inner_product examples") {
  CHECK(trig_inner_product(TrigFunction::sine(3), TrigFunction::cosine(3)) == Approx(0.0));
  CHECK(trig_inner_product(TrigFunction::sine(1), TrigFunction::sine(1)) == Approx(kPi));
  CHECK(trig_inner_product(TrigFunction::constant(1), TrigFunction::constant(1)) == Approx(2 * kPi));
}

TEST_CASE("trig_inner_product agrees with Simpson quadrature") {
  CounterStream rng(3, 0);
  const int n = 1 << 14;
  for (int trial = 0; trial < 10; ++trial) {
    const TrigFunction f = random_trig(rng, 64), g = random_trig(rng, 64);
    const double h = 2 * kPi / n;
    double s = f(0) * g(0) + f(2 * kPi) * g(2 * kPi);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h) * g(i * h);
    CHECK(std::abs(trig_inner_product(f, g) - s * h / 3) <= 1e-9);
  }
}

TEST_CASE("integral is 2 pi times the constant mode") {
  TrigFunction f;
  f.add_mode(0, 0.7, 0.0);
  f.add_mode(5, 1.0, -2.0);
  CHECK(f.integral() == Approx(2 * kPi * 0.7));
}

TEST_CASE("basis_g examples") {
  const std::vector<int> w1{1}, w3{3}, w13{1, 3};
  TrigFunction cos2;
  cos2.add_mode(0, 0.5, 0.0);
  cos2.add_mode(2, 0.5, 0.0);
  const TrigFunction a = basis_g({2}, {2}, w1);
  for (double s : {0.0, 0.4, 1.3, 2.9}) CHECK(a(s) == Approx(cos2(s)).epsilon(1e-14));
  const TrigFunction b = basis_g({1}, {0}, w3);
  for (double s : {0.1, 0.7}) CHECK(b(s) == Approx(std::sin(3 * s)));
  const TrigFunction c = basis_g({1, 1}, {1, 0}, w13);
  for (double s : {0.1, 0.7, 2.2}) CHECK(c(s) == Approx(0.5 * std::sin(4 * s) + 0.5 * std::sin(2 * s)));
  CHECK(basis_g({1}, {2}, w1).is_zero());
}

TEST_CASE("basis_g equals the direct product pointwise") {
  CounterStream rng(4, 0);
  const std::vector<int> w{1, 4};
  const MultiIndex k{3, 2}, p{1, 2};
  const TrigFunction g = basis_g(k, p, w);
  for (int i = 0; i < 100; ++i) {
    const double s = 2 * kPi * rng.uniform();
    const double direct = std::pow(std::cos(s), 1) * std::pow(std::sin(s), 2) * std::pow(std::cos(4 * s), 2);
    CHECK(std::abs(g(s) - direct) <= 1e-12);
  }
}

TEST_CASE("time-varying polynomial freeze and period integral") {
  TimeVaryingPolynomial p(2);
  p.add_term({1, 0}, TrigFunction::cosine(1, 2.0));
  TrigFunction f;
  f.add_mode(0, 0.5, 0.0);
  f.add_mode(3, 0.0, 1.0);
  p.add_term({0, 2}, f);
  const Polynomial frozen = p.freeze(kPi / 2);
  CHECK(frozen.coefficient({1, 0}) == Approx(0.0).epsilon(1e-15));
  CHECK(frozen.coefficient({0, 2}) == Approx(0.5 - 1.0));
  const Polynomial avg = p.integrate_period();
  CHECK(avg.coefficient({1, 0}) == Approx(0.0));
  CHECK(avg.coefficient({0, 2}) == Approx(kPi));
  CHECK(p(vec({1.0, 2.0}), 0.0) == Approx(2.0 + 4 * 0.5));
}

TEST_CASE("poly_fit_on_grid examples") {
  std::vector<PolynomialSample> xs;
  for (int i = 0; i < 10; ++i) {
    const double x = -1.0 + 2.0 * i / 9;
    xs.push_back({vec({x}), x * x});
  }
  const PolynomialFit fit = poly_fit_on_grid(xs, 2);
  CHECK(std::abs(fit.polynomial.coefficient({0})) <= 1e-10);
  CHECK(std::abs(fit.polynomial.coefficient({1})) <= 1e-10);
  CHECK(std::abs(fit.polynomial.coefficient({2}) - 1.0) <= 1e-10);
  CHECK(fit.max_residual <= 1e-10);

  std::vector<PolynomialSample> two;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) {
      const double x = -1 + 0.5 * i, y = -1 + 0.5 * j;
      two.push_back({vec({x, y}), 1 - 2 * x + x * y + 3 * y * y});
    }
  CHECK(poly_fit_on_grid(two, 2).max_residual <= 1e-10);

  std::vector<PolynomialSample> c;
  for (int i = 0; i < 41; ++i) {
    const double x = -1.0 + 2.0 * i / 40;
    c.push_back({vec({x}), std::cos(x)});
  }
  CHECK(poly_fit_on_grid(c, 4).max_residual <= 1e-3);

  std::vector<PolynomialSample> same(6, {vec({0.5}), 1.0});
  CHECK_THROWS_AS(poly_fit_on_grid(same, 2), FitError);
}

TEST_CASE("multi-index helpers") {
  CHECK(monomials_up_to(2, 2).size() == 6);
  CHECK(box_indices({1, 2}).size() == 6);
  CHECK(multi_binomial({4, 2}, {2, 1}) == 12.0);
  CHECK(total_degree({3, 0, 2}) == 5);
}
