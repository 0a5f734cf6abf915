#include "flowforge/multipoly.hpp"

#include "flowforge/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace flowforge {

int total_degree(const MultiIndex& index) {
  return std::accumulate(index.begin(), index.end(), 0);
}

bool GradedLex::operator()(const MultiIndex& a, const MultiIndex& b) const {
  const int da = total_degree(a);
  const int db = total_degree(b);
  if (da != db) return da < db;
  // Within a degree, larger leading exponents come first (x0^2 before x0 x1).
  return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
}

namespace {

void enumerate_degree(int dim, int remaining, int pos, MultiIndex& cur,
                      std::vector<MultiIndex>& out) {
  if (pos == dim - 1) {
    cur[pos] = remaining;
    out.push_back(cur);
    return;
  }
  for (int e = remaining; e >= 0; --e) {
    cur[pos] = e;
    enumerate_degree(dim, remaining - e, pos + 1, cur, out);
  }
}

double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

std::vector<MultiIndex> monomials_up_to(int dim, int degree) {
  if (dim < 1) throw InputError("monomials_up_to: dimension must be positive");
  std::vector<MultiIndex> out;
  MultiIndex cur(dim, 0);
  for (int deg = 0; deg <= degree; ++deg) enumerate_degree(dim, deg, 0, cur, out);
  return out;
}

std::vector<MultiIndex> box_indices(const MultiIndex& k) {
  std::vector<MultiIndex> out;
  MultiIndex cur(k.size(), 0);
  while (true) {
    out.push_back(cur);
    int pos = static_cast<int>(k.size()) - 1;
    while (pos >= 0 && cur[pos] == k[pos]) {
      cur[pos] = 0;
      --pos;
    }
    if (pos < 0) break;
    ++cur[pos];
  }
  return out;
}

double multi_binomial(const MultiIndex& k, const MultiIndex& p) {
  double r = 1.0;
  for (std::size_t i = 0; i < k.size(); ++i) r *= binom(k[i], p[i]);
  return r;
}

// ---------------------------------------------------------------------------
// Polynomial

Polynomial Polynomial::constant(int dim, double c) {
  Polynomial p(dim);
  p.add_term(MultiIndex(dim, 0), c);
  return p;
}

Polynomial Polynomial::variable(int dim, int i) {
  if (i < 0 || i >= dim) throw InputError("Polynomial::variable: index out of range");
  MultiIndex idx(dim, 0);
  idx[i] = 1;
  Polynomial p(dim);
  p.add_term(idx, 1.0);
  return p;
}

Polynomial Polynomial::monomial(MultiIndex index, double c) {
  Polynomial p(static_cast<int>(index.size()));
  p.add_term(index, c);
  return p;
}

int Polynomial::degree() const {
  return terms_.empty() ? -1 : total_degree(terms_.rbegin()->first);
}

double Polynomial::coefficient(const MultiIndex& index) const {
  auto it = terms_.find(index);
  return it == terms_.end() ? 0.0 : it->second;
}

void Polynomial::check_index(const MultiIndex& index) const {
  if (static_cast<int>(index.size()) != dim_)
    throw InputError("Polynomial: multi-index length " + std::to_string(index.size()) +
                     " does not match dimension " + std::to_string(dim_));
  for (int e : index)
    if (e < 0) throw InputError("Polynomial: negative exponent");
}

void Polynomial::add_term(const MultiIndex& index, double c) {
  check_index(index);
  if (c == 0.0) return;
  auto [it, inserted] = terms_.try_emplace(index, c);
  if (!inserted) it->second += c;
  if (std::abs(it->second) <= kPruneThreshold) terms_.erase(it);
}

Polynomial& Polynomial::operator+=(const Polynomial& other) {
  if (other.dim_ != dim_) throw InputError("Polynomial +: dimension mismatch");
  for (const auto& [idx, c] : other.terms_) add_term(idx, c);
  return *this;
}

Polynomial& Polynomial::operator-=(const Polynomial& other) {
  if (other.dim_ != dim_) throw InputError("Polynomial -: dimension mismatch");
  for (const auto& [idx, c] : other.terms_) add_term(idx, -c);
  return *this;
}

Polynomial& Polynomial::operator*=(double s) {
  for (auto it = terms_.begin(); it != terms_.end();) {
    it->second *= s;
    if (std::abs(it->second) <= kPruneThreshold)
      it = terms_.erase(it);
    else
      ++it;
  }
  return *this;
}

Polynomial operator*(const Polynomial& a, const Polynomial& b) {
  if (a.dim_ != b.dim_) throw InputError("Polynomial *: dimension mismatch");
  Polynomial out(a.dim_);
  MultiIndex idx(a.dim_);
  for (const auto& [ia, ca] : a.terms_) {
    for (const auto& [ib, cb] : b.terms_) {
      for (int i = 0; i < a.dim_; ++i) idx[i] = ia[i] + ib[i];
      out.terms_[idx] += ca * cb;
    }
  }
  for (auto it = out.terms_.begin(); it != out.terms_.end();) {
    if (std::abs(it->second) <= kPruneThreshold)
      it = out.terms_.erase(it);
    else
      ++it;
  }
  return out;
}

double Polynomial::operator()(const Eigen::Ref<const Eigen::VectorXd>& z) const {
  return poly_eval(*this, z);
}

double poly_eval(const Polynomial& p, const Eigen::Ref<const Eigen::VectorXd>& z) {
  if (z.size() != p.dimension())
    throw InputError("poly_eval: point has length " + std::to_string(z.size()) +
                     ", polynomial dimension is " + std::to_string(p.dimension()));
  double sum = 0.0;
  for (const auto& [idx, c] : p.terms()) {
    double m = c;
    for (int i = 0; i < p.dimension(); ++i)
      if (idx[i] != 0) m *= std::pow(z[i], idx[i]);
    sum += m;
  }
  return sum;
}

Polynomial poly_partial(const Polynomial& p, int variable) {
  if (variable < 0 || variable >= p.dimension())
    throw InputError("poly_partial: variable " + std::to_string(variable) + " out of range");
  Polynomial out(p.dimension());
  for (const auto& [idx, c] : p.terms()) {
    if (idx[variable] == 0) continue;
    MultiIndex d = idx;
    --d[variable];
    out.add_term(d, c * idx[variable]);
  }
  return out;
}

Eigen::VectorXd poly_gradient(const Polynomial& p, const Eigen::Ref<const Eigen::VectorXd>& z) {
  Eigen::VectorXd g(p.dimension());
  for (int i = 0; i < p.dimension(); ++i) g[i] = poly_eval(poly_partial(p, i), z);
  return g;
}

double max_coefficient_difference(const Polynomial& a, const Polynomial& b) {
  double worst = 0.0;
  const Polynomial diff = a - b;
  for (const auto& [idx, c] : diff.terms()) worst = std::max(worst, std::abs(c));
  return worst;
}

// ---------------------------------------------------------------------------
// CompiledPolynomial

CompiledPolynomial::CompiledPolynomial(const Polynomial& p) : dim_(p.dimension()) {
  for (const auto& [idx, c] : p.terms()) {
    for (int e : idx) max_exp_ = std::max(max_exp_, e);
    exponents_.insert(exponents_.end(), idx.begin(), idx.end());
    coeffs_.push_back(c);
  }
  if (dim_ * (max_exp_ + 1) > kScratch)
    throw InputError("CompiledPolynomial: degree/dimension too large for compiled evaluation");
}

void CompiledPolynomial::fill_powers(const double* z, std::array<double, kScratch>& pw) const {
  const int stride = max_exp_ + 1;
  for (int i = 0; i < dim_; ++i) {
    double* row = pw.data() + i * stride;
    row[0] = 1.0;
    for (int e = 1; e <= max_exp_; ++e) row[e] = row[e - 1] * z[i];
  }
}

double CompiledPolynomial::eval(const double* z) const {
  if (coeffs_.empty()) return 0.0;
  std::array<double, kScratch> pw;
  fill_powers(z, pw);
  const int stride = max_exp_ + 1;
  double sum = 0.0;
  const int* e = exponents_.data();
  for (double c : coeffs_) {
    double m = c;
    for (int i = 0; i < dim_; ++i) m *= pw[i * stride + e[i]];
    sum += m;
    e += dim_;
  }
  return sum;
}

double CompiledPolynomial::eval_with_gradient(const double* z, double* grad) const {
  for (int i = 0; i < dim_; ++i) grad[i] = 0.0;
  if (coeffs_.empty()) return 0.0;
  std::array<double, kScratch> pw;
  fill_powers(z, pw);
  const int stride = max_exp_ + 1;
  double sum = 0.0;
  const int* e = exponents_.data();
  for (double c : coeffs_) {
    double m = c;
    for (int i = 0; i < dim_; ++i) m *= pw[i * stride + e[i]];
    sum += m;
    for (int i = 0; i < dim_; ++i) {
      if (e[i] == 0) continue;
      double g = c * e[i];
      for (int k = 0; k < dim_; ++k) g *= pw[k * stride + (k == i ? e[k] - 1 : e[k])];
      grad[i] += g;
    }
    e += dim_;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// TrigFunction

TrigFunction TrigFunction::constant(double c) {
  TrigFunction f;
  f.add_mode(0, c, 0.0);
  return f;
}

TrigFunction TrigFunction::cosine(int m, double a) {
  TrigFunction f;
  f.add_mode(m, a, 0.0);
  return f;
}

TrigFunction TrigFunction::sine(int m, double b) {
  TrigFunction f;
  f.add_mode(m, 0.0, b);
  return f;
}

int TrigFunction::max_frequency() const { return modes_.empty() ? 0 : modes_.rbegin()->first; }

void TrigFunction::prune(int m) {
  auto it = modes_.find(m);
  if (it == modes_.end()) return;
  if (m == 0) it->second.sin = 0.0;
  if (std::abs(it->second.cos) <= kPruneThreshold) it->second.cos = 0.0;
  if (std::abs(it->second.sin) <= kPruneThreshold) it->second.sin = 0.0;
  if (it->second.cos == 0.0 && it->second.sin == 0.0) modes_.erase(it);
}

void TrigFunction::add_mode(int m, double a, double b) {
  if (m < 0) {
    m = -m;
    b = -b;
  }
  if (m == 0) b = 0.0;
  if (a == 0.0 && b == 0.0) return;
  Mode& mode = modes_[m];
  mode.cos += a;
  mode.sin += b;
  prune(m);
}

double TrigFunction::operator()(double s) const {
  double v = 0.0;
  for (const auto& [m, mode] : modes_) v += mode.cos * std::cos(m * s) + mode.sin * std::sin(m * s);
  return v;
}

double TrigFunction::integral() const {
  auto it = modes_.find(0);
  return it == modes_.end() ? 0.0 : 2.0 * std::numbers::pi * it->second.cos;
}

TrigFunction& TrigFunction::operator+=(const TrigFunction& other) {
  for (const auto& [m, mode] : other.modes_) add_mode(m, mode.cos, mode.sin);
  return *this;
}

TrigFunction& TrigFunction::operator-=(const TrigFunction& other) {
  for (const auto& [m, mode] : other.modes_) add_mode(m, -mode.cos, -mode.sin);
  return *this;
}

TrigFunction& TrigFunction::operator*=(double s) {
  for (auto& [m, mode] : modes_) {
    mode.cos *= s;
    mode.sin *= s;
  }
  for (auto it = modes_.begin(); it != modes_.end();) {
    const int m = it->first;
    ++it;
    prune(m);
  }
  return *this;
}

TrigFunction operator*(const TrigFunction& f, const TrigFunction& g) {
  // Accumulate raw sums first so pruning only sees final coefficients.
  std::map<int, TrigFunction::Mode> acc;
  auto add = [&acc](int m, double a, double b) {
    if (m < 0) {
      m = -m;
      b = -b;
    }
    acc[m].cos += a;
    acc[m].sin += b;
  };
  for (const auto& [m, u] : f.modes_) {
    for (const auto& [n, w] : g.modes_) {
      // cos cos = (cos(m-n) + cos(m+n)) / 2
      // sin sin = (cos(m-n) - cos(m+n)) / 2
      // sin(m) cos(n) = (sin(m+n) + sin(m-n)) / 2
      // cos(m) sin(n) = (sin(m+n) - sin(m-n)) / 2
      const double cc = 0.5 * u.cos * w.cos;
      const double ss = 0.5 * u.sin * w.sin;
      const double sc = 0.5 * u.sin * w.cos;
      const double cs = 0.5 * u.cos * w.sin;
      add(m - n, cc + ss, sc - cs);
      add(m + n, cc - ss, sc + cs);
    }
  }
  TrigFunction out;
  for (const auto& [m, mode] : acc) out.add_mode(m, mode.cos, mode.sin);
  return out;
}

TrigFunction trig_product(const TrigFunction& f, const TrigFunction& g) { return f * g; }

double trig_inner_product(const TrigFunction& f, const TrigFunction& g) {
  return (f * g).integral();
}

TrigFunction basis_g(const MultiIndex& k, const MultiIndex& p, std::span<const int> omega) {
  if (k.size() != p.size() || k.size() != omega.size())
    throw InputError("basis_g: k, p and omega must have equal length");
  for (std::size_t i = 0; i < k.size(); ++i)
    if (p[i] < 0 || p[i] > k[i]) return TrigFunction{};
  TrigFunction out = TrigFunction::constant(1.0);
  for (std::size_t i = 0; i < k.size(); ++i) {
    const TrigFunction c = TrigFunction::cosine(omega[i]);
    const TrigFunction s = TrigFunction::sine(omega[i]);
    for (int e = 0; e < p[i]; ++e) out = out * c;
    for (int e = 0; e < k[i] - p[i]; ++e) out = out * s;
  }
  return out;
}

// ---------------------------------------------------------------------------
// TimeVaryingPolynomial

TimeVaryingPolynomial TimeVaryingPolynomial::from_polynomial(const Polynomial& p) {
  TimeVaryingPolynomial out(p.dimension());
  for (const auto& [idx, c] : p.terms()) out.add_term(idx, TrigFunction::constant(c));
  return out;
}

int TimeVaryingPolynomial::degree() const {
  return terms_.empty() ? -1 : total_degree(terms_.rbegin()->first);
}

void TimeVaryingPolynomial::add_term(const MultiIndex& index, const TrigFunction& f) {
  if (static_cast<int>(index.size()) != dim_)
    throw InputError("TimeVaryingPolynomial: multi-index length does not match dimension");
  if (f.is_zero()) return;
  auto [it, inserted] = terms_.try_emplace(index, f);
  if (!inserted) it->second += f;
  if (it->second.is_zero()) terms_.erase(it);
}

TimeVaryingPolynomial& TimeVaryingPolynomial::operator+=(const TimeVaryingPolynomial& other) {
  if (other.dim_ != dim_) throw InputError("TimeVaryingPolynomial +: dimension mismatch");
  for (const auto& [idx, f] : other.terms_) add_term(idx, f);
  return *this;
}

TimeVaryingPolynomial& TimeVaryingPolynomial::operator*=(double s) {
  for (auto it = terms_.begin(); it != terms_.end();) {
    it->second *= s;
    if (it->second.is_zero())
      it = terms_.erase(it);
    else
      ++it;
  }
  return *this;
}

TimeVaryingPolynomial& TimeVaryingPolynomial::operator*=(const TrigFunction& f) {
  for (auto it = terms_.begin(); it != terms_.end();) {
    it->second = it->second * f;
    if (it->second.is_zero())
      it = terms_.erase(it);
    else
      ++it;
  }
  return *this;
}

TimeVaryingPolynomial operator*(const TimeVaryingPolynomial& a, const TimeVaryingPolynomial& b) {
  if (a.dim_ != b.dim_) throw InputError("TimeVaryingPolynomial *: dimension mismatch");
  TimeVaryingPolynomial out(a.dim_);
  MultiIndex idx(a.dim_);
  for (const auto& [ia, fa] : a.terms_) {
    for (const auto& [ib, fb] : b.terms_) {
      for (int i = 0; i < a.dim_; ++i) idx[i] = ia[i] + ib[i];
      out.add_term(idx, fa * fb);
    }
  }
  return out;
}

TimeVaryingPolynomial tvp_pow(const TimeVaryingPolynomial& base, int exponent) {
  if (exponent < 0) throw InputError("tvp_pow: negative exponent");
  TimeVaryingPolynomial out(base.dimension());
  out.add_term(MultiIndex(base.dimension(), 0), TrigFunction::constant(1.0));
  for (int e = 0; e < exponent; ++e) out = out * base;
  return out;
}

Polynomial TimeVaryingPolynomial::freeze(double t) const {
  Polynomial p(dim_);
  for (const auto& [idx, f] : terms_) p.add_term(idx, f(t));
  return p;
}

Polynomial TimeVaryingPolynomial::integrate_period() const {
  Polynomial p(dim_);
  for (const auto& [idx, f] : terms_) p.add_term(idx, f.integral());
  return p;
}

double TimeVaryingPolynomial::operator()(const Eigen::Ref<const Eigen::VectorXd>& z,
                                         double t) const {
  if (z.size() != dim_) throw InputError("TimeVaryingPolynomial: point dimension mismatch");
  double sum = 0.0;
  for (const auto& [idx, f] : terms_) {
    double m = f(t);
    for (int i = 0; i < dim_; ++i)
      if (idx[i] != 0) m *= std::pow(z[i], idx[i]);
    sum += m;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Least-squares fitting

PolynomialFit poly_fit_on_grid(std::span<const PolynomialSample> samples, int degree) {
  if (samples.empty()) throw InputError("poly_fit_on_grid: no samples");
  if (degree < 0) throw InputError("poly_fit_on_grid: negative degree");
  const int dim = static_cast<int>(samples.front().point.size());
  const std::vector<MultiIndex> basis = monomials_up_to(dim, degree);
  const auto n = static_cast<Eigen::Index>(samples.size());
  const auto m = static_cast<Eigen::Index>(basis.size());
  if (n < m)
    throw InputError("poly_fit_on_grid: " + std::to_string(n) + " samples for " +
                     std::to_string(m) + " monomials");

  Eigen::MatrixXd design(n, m);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& s = samples[r];
    if (s.point.size() != dim) throw InputError("poly_fit_on_grid: inconsistent point dimension");
    for (Eigen::Index c = 0; c < m; ++c) {
      double v = 1.0;
      for (int i = 0; i < dim; ++i) v *= std::pow(s.point[i], basis[c][i]);
      design(r, c) = v;
    }
    rhs[r] = s.value;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  const double condition = sv[0] > 0.0 ? sv[0] / sv[sv.size() - 1] : INFINITY;
  if (!(condition < 1e12))
    throw FitError("poly_fit_on_grid: rank-deficient design matrix (condition " +
                       std::to_string(condition) + ")",
                   condition);

  const Eigen::VectorXd coef = svd.solve(rhs);
  PolynomialFit fit{Polynomial(dim), 0.0, condition};
  for (Eigen::Index c = 0; c < m; ++c) fit.polynomial.add_term(basis[c], coef[c]);
  fit.max_residual = (design * coef - rhs).cwiseAbs().maxCoeff();
  return fit;
}

}  // namespace flowforge
