#pragma once

// Multivariate polynomials with real coefficients, trigonometric
// polynomials in one time variable, and polynomials whose coefficients are
// trigonometric polynomials.  All three are canonical (sorted, pruned) value
// types; every operation is a pure function.

#include <Eigen/Dense>

#include <array>
#include <map>
#include <span>
#include <vector>

namespace flowforge {

// Exponent vector of a monomial.  Entries are non-negative.
using MultiIndex = std::vector<int>;

int total_degree(const MultiIndex& index);

// Graded lexicographic order: lower total degree first, ties broken
// lexicographically with the first variable most significant.
struct GradedLex {
  bool operator()(const MultiIndex& a, const MultiIndex& b) const;
};

// All multi-indices of length `dim` with total degree <= `degree`, in graded
// lexicographic order.
std::vector<MultiIndex> monomials_up_to(int dim, int degree);

// All r with 0 <= r <= k componentwise (lexicographic order).
std::vector<MultiIndex> box_indices(const MultiIndex& k);

// prod_i binom(k_i, p_i); zero if any p_i is outside [0, k_i].
double multi_binomial(const MultiIndex& k, const MultiIndex& p);

// Coefficients with magnitude at or below this are dropped after arithmetic.
inline constexpr double kPruneThreshold = 1e-14;

class Polynomial {
 public:
  using Terms = std::map<MultiIndex, double, GradedLex>;

  explicit Polynomial(int dim = 0) : dim_(dim) {}

  static Polynomial constant(int dim, double c);
  static Polynomial variable(int dim, int i);
  static Polynomial monomial(MultiIndex index, double c);

  int dimension() const { return dim_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  // Total degree; -1 for the zero polynomial.
  int degree() const;
  double coefficient(const MultiIndex& index) const;

  // Adds c to the coefficient of `index`, pruning if it becomes negligible.
  void add_term(const MultiIndex& index, double c);

  Polynomial& operator+=(const Polynomial& other);
  Polynomial& operator-=(const Polynomial& other);
  Polynomial& operator*=(double s);

  friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
  friend Polynomial operator-(Polynomial a, const Polynomial& b) { return a -= b; }
  friend Polynomial operator*(Polynomial a, double s) { return a *= s; }
  friend Polynomial operator*(double s, Polynomial a) { return a *= s; }
  friend Polynomial operator*(const Polynomial& a, const Polynomial& b);
  friend bool operator==(const Polynomial& a, const Polynomial& b) = default;

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& z) const;

 private:
  void check_index(const MultiIndex& index) const;

  int dim_;
  Terms terms_;
};

double poly_eval(const Polynomial& p, const Eigen::Ref<const Eigen::VectorXd>& z);
Polynomial poly_partial(const Polynomial& p, int variable);
Eigen::VectorXd poly_gradient(const Polynomial& p, const Eigen::Ref<const Eigen::VectorXd>& z);

// Largest absolute coefficient difference; polynomials must share a dimension.
double max_coefficient_difference(const Polynomial& a, const Polynomial& b);

// Flat representation for repeated evaluation in hot loops (coupling blocks,
// vector fields).  Evaluation allocates nothing.
class CompiledPolynomial {
 public:
  CompiledPolynomial() = default;
  explicit CompiledPolynomial(const Polynomial& p);

  int dimension() const { return dim_; }
  double eval(const double* z) const;
  // Returns the value and writes the gradient into grad[0..dim).
  double eval_with_gradient(const double* z, double* grad) const;

 private:
  static constexpr int kScratch = 128;
  void fill_powers(const double* z, std::array<double, kScratch>& pw) const;

  int dim_ = 0;
  int max_exp_ = 0;
  std::vector<int> exponents_;
  std::vector<double> coeffs_;
};

// Real trigonometric polynomial  sum_m a_m cos(m s) + b_m sin(m s), m >= 0.
class TrigFunction {
 public:
  struct Mode {
    double cos = 0.0;
    double sin = 0.0;
    friend bool operator==(const Mode&, const Mode&) = default;
  };
  using Modes = std::map<int, Mode>;

  TrigFunction() = default;
  static TrigFunction constant(double c);
  static TrigFunction cosine(int m, double a = 1.0);
  static TrigFunction sine(int m, double b = 1.0);

  const Modes& modes() const { return modes_; }
  bool is_zero() const { return modes_.empty(); }
  int max_frequency() const;

  // Adds a cos(m s) + b sin(m s); negative m is folded onto |m|.
  void add_mode(int m, double a, double b);

  double operator()(double s) const;
  // Integral over one period [0, 2 pi].
  double integral() const;

  TrigFunction& operator+=(const TrigFunction& other);
  TrigFunction& operator-=(const TrigFunction& other);
  TrigFunction& operator*=(double s);

  friend TrigFunction operator+(TrigFunction a, const TrigFunction& b) { return a += b; }
  friend TrigFunction operator-(TrigFunction a, const TrigFunction& b) { return a -= b; }
  friend TrigFunction operator*(TrigFunction a, double s) { return a *= s; }
  friend TrigFunction operator*(double s, TrigFunction a) { return a *= s; }
  friend TrigFunction operator*(const TrigFunction& a, const TrigFunction& b);
  friend bool operator==(const TrigFunction& a, const TrigFunction& b) = default;

 private:
  void prune(int m);
  Modes modes_;
};

TrigFunction trig_product(const TrigFunction& f, const TrigFunction& g);
double trig_inner_product(const TrigFunction& f, const TrigFunction& g);

// prod_i cos(omega_i s)^{p_i} sin(omega_i s)^{k_i - p_i}; the zero function
// when p is not inside the box [0, k].
TrigFunction basis_g(const MultiIndex& k, const MultiIndex& p, std::span<const int> omega);

// Polynomial in `dim` variables whose coefficients are trigonometric
// polynomials of time.
class TimeVaryingPolynomial {
 public:
  using Terms = std::map<MultiIndex, TrigFunction, GradedLex>;

  explicit TimeVaryingPolynomial(int dim = 0) : dim_(dim) {}
  static TimeVaryingPolynomial from_polynomial(const Polynomial& p);

  int dimension() const { return dim_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  int degree() const;

  void add_term(const MultiIndex& index, const TrigFunction& f);

  TimeVaryingPolynomial& operator+=(const TimeVaryingPolynomial& other);
  TimeVaryingPolynomial& operator*=(double s);
  TimeVaryingPolynomial& operator*=(const TrigFunction& f);

  friend TimeVaryingPolynomial operator+(TimeVaryingPolynomial a, const TimeVaryingPolynomial& b) {
    return a += b;
  }
  friend TimeVaryingPolynomial operator*(TimeVaryingPolynomial a, const TrigFunction& f) {
    return a *= f;
  }
  friend TimeVaryingPolynomial operator*(TimeVaryingPolynomial a, double s) { return a *= s; }
  friend TimeVaryingPolynomial operator*(const TimeVaryingPolynomial& a,
                                         const TimeVaryingPolynomial& b);
  friend bool operator==(const TimeVaryingPolynomial&, const TimeVaryingPolynomial&) = default;

  // Coefficients evaluated at time t.
  Polynomial freeze(double t) const;
  // Coefficients integrated over [0, 2 pi].
  Polynomial integrate_period() const;
  double operator()(const Eigen::Ref<const Eigen::VectorXd>& z, double t) const;

 private:
  int dim_;
  Terms terms_;
};

TimeVaryingPolynomial tvp_pow(const TimeVaryingPolynomial& base, int exponent);

struct PolynomialSample {
  Eigen::VectorXd point;
  double value = 0.0;
};

struct PolynomialFit {
  Polynomial polynomial;
  double max_residual = 0.0;
  // Ratio of extreme singular values of the design matrix.
  double condition = 0.0;
};

// Least-squares fit over all monomials of total degree <= `degree`.
PolynomialFit poly_fit_on_grid(std::span<const PolynomialSample> samples, int degree);

}  // namespace flowforge
