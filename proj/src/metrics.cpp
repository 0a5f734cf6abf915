#include "flowforge/metrics.hpp"

#include "flowforge/errors.hpp"
#include "flowforge/linalg.hpp"
#include "flowforge/parallel.hpp"
#include "flowforge/random.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace flowforge {

double w1_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InputError("w1_1d: empty sample");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  if (sa.size() == sb.size()) {
    double s = 0.0;
    for (std::size_t i = 0; i < sa.size(); ++i) s += std::abs(sa[i] - sb[i]);
    return s / static_cast<double>(sa.size());
  }
  // Integral of |F_a - F_b| over the merged breakpoints.
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0, j = 0;
  double x = std::min(sa[0], sb[0]);
  double total = 0.0;
  while (i < sa.size() || j < sb.size()) {
    const double next = (j >= sb.size() || (i < sa.size() && sa[i] <= sb[j])) ? sa[i] : sb[j];
    total += std::abs(i / na - j / nb) * (next - x);
    x = next;
    while (i < sa.size() && sa[i] == x) ++i;
    while (j < sb.size() && sb[j] == x) ++j;
  }
  return total;
}

Eigen::VectorXd slice_direction(int dim, std::uint64_t seed, std::uint64_t k) {
  CounterStream rng(seed, k);
  Eigen::VectorXd u(dim);
  do {
    for (int i = 0; i < dim; ++i) u[i] = rng.normal();
  } while (u.norm() < 1e-12);
  return u / u.norm();
}

namespace {

std::vector<double> project(const Eigen::MatrixXd& pts, const Eigen::VectorXd& u) {
  const Eigen::VectorXd p = pts * u;
  return {p.data(), p.data() + p.size()};
}

}  // namespace

double sliced_w1(const SampleCloud& a, const SampleCloud& b, int n_directions,
                 std::uint64_t seed) {
  if (a.dimension() != b.dimension()) throw InputError("sliced_w1: dimension mismatch");
  if (n_directions < 1) throw InputError("sliced_w1: need at least one direction");
  std::vector<double> per(static_cast<std::size_t>(n_directions));
  parallel_for(per.size(), [&](std::size_t k) {
    const Eigen::VectorXd u = slice_direction(a.dimension(), seed, k);
    per[k] = w1_1d(project(a.points, u), project(b.points, u));
  });
  double s = 0.0;
  for (double w : per) s += w;
  return s / n_directions;
}

Eigen::VectorXd marginal_w1(const SampleCloud& a, const SampleCloud& b) {
  if (a.dimension() != b.dimension()) throw InputError("marginal_w1: dimension mismatch");
  Eigen::VectorXd out(a.dimension());
  for (int i = 0; i < a.dimension(); ++i) {
    const Eigen::VectorXd ca = a.points.col(i);
    const Eigen::VectorXd cb = b.points.col(i);
    out[i] = w1_1d(std::span<const double>(ca.data(), ca.size()),
                   std::span<const double>(cb.data(), cb.size()));
  }
  return out;
}

double gaussian_kl(const GaussianDensity& p, const GaussianDensity& q) {
  if (p.mean.size() != q.mean.size()) throw InputError("gaussian_kl: dimension mismatch");
  const Eigen::MatrixXd qinv = spd_inverse(q.covariance);
  const Eigen::VectorXd dm = q.mean - p.mean;
  const double n = static_cast<double>(p.mean.size());
  const double kl = 0.5 * ((qinv * p.covariance).trace() + dm.dot(qinv * dm) - n +
                           spd_logdet(q.covariance) - spd_logdet(p.covariance));
  return std::max(0.0, kl);
}

double gaussian_w2(const GaussianDensity& p, const GaussianDensity& q) {
  if (p.mean.size() != q.mean.size()) throw InputError("gaussian_w2: dimension mismatch");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> sq(0.5 * (q.covariance + q.covariance.transpose()));
  if (sq.eigenvalues().minCoeff() < 0.0) throw MatrixError("covariance is not positive semidefinite");
  const Eigen::MatrixXd r = sq.operatorSqrt();
  const Eigen::MatrixXd inner = r * p.covariance * r;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> si(0.5 * (inner + inner.transpose()));
  const Eigen::VectorXd ev = si.eigenvalues().cwiseMax(0.0);
  const double cross = ev.cwiseSqrt().sum();
  const double w2sq =
      (p.mean - q.mean).squaredNorm() + p.covariance.trace() + q.covariance.trace() - 2.0 * cross;
  return std::sqrt(std::max(0.0, w2sq));
}

TalagrandReport talagrand_check(const GaussianDensity& q, double tol) {
  const auto n = q.mean.size();
  const GaussianDensity ref{Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Identity(n, n)};
  TalagrandReport rep;
  rep.w2 = gaussian_w2(q, ref);
  rep.kl = gaussian_kl(q, ref);
  rep.margin = 2.0 * rep.kl - rep.w2 * rep.w2;
  rep.pass = rep.margin >= -tol;
  return rep;
}

SampleCloud sample_gaussian(const GaussianDensity& p, long n, std::uint64_t seed) {
  if (n < 1) throw InputError("sample_gaussian: need at least one sample");
  p.validate();
  const auto dim = p.mean.size();
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(p.covariance).matrixL();
  SampleCloud cloud{Eigen::MatrixXd(n, dim), seed};
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    CounterStream rng(seed, i);
    Eigen::VectorXd xi(dim);
    for (Eigen::Index k = 0; k < dim; ++k) xi[k] = rng.normal();
    cloud.points.row(static_cast<Eigen::Index>(i)) = (p.mean + chol * xi).transpose();
  });
  return cloud;
}

SampleCloud sample_truncated_gaussian(int dim, double radius, long n, std::uint64_t seed) {
  if (n < 1 || dim < 1) throw InputError("sample_truncated_gaussian: need n >= 1 and dim >= 1");
  if (!(radius > 0.0)) throw InputError("sample_truncated_gaussian: radius must be positive");
  SampleCloud cloud{Eigen::MatrixXd(n, dim), seed};
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    CounterStream rng(seed, i);
    Eigen::VectorXd z(dim);
    for (int attempt = 0;; ++attempt) {
      if (attempt > 1000000) throw InputError("truncation radius too small for rejection sampling");
      for (int k = 0; k < dim; ++k) z[k] = rng.normal();
      if (z.norm() <= radius) break;
    }
    cloud.points.row(static_cast<Eigen::Index>(i)) = z.transpose();
  });
  return cloud;
}

void write_cloud_csv(std::ostream& os, const SampleCloud& cloud, bool phase_space) {
  const int dim = cloud.dimension();
  if (phase_space && dim % 2 == 0) {
    for (int i = 0; i < dim / 2; ++i) os << (i ? "," : "") << "x_" << i;
    for (int i = 0; i < dim / 2; ++i) os << ",v_" << i;
  } else {
    for (int i = 0; i < dim; ++i) os << (i ? "," : "") << "z_" << i;
  }
  os << '\n';
  const auto old = os.precision(17);
  for (Eigen::Index r = 0; r < cloud.points.rows(); ++r) {
    for (int c = 0; c < dim; ++c) os << (c ? "," : "") << cloud.points(r, c);
    os << '\n';
  }
  os.precision(old);
}

SampleCloud read_cloud_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InputError("sample CSV is empty");
  const long cols = static_cast<long>(std::count(line.begin(), line.end(), ',')) + 1;
  std::vector<double> vals;
  long rows = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    long c = 0;
    while (std::getline(ss, cell, ',')) {
      try {
        vals.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InputError("sample CSV: bad number '" + cell + "' on row " + std::to_string(rows + 1));
      }
      ++c;
    }
    if (c != cols) throw InputError("sample CSV: row " + std::to_string(rows + 1) + " has wrong width");
    ++rows;
  }
  SampleCloud cloud{Eigen::MatrixXd(rows, cols), 0};
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) cloud.points(r, c) = vals[static_cast<std::size_t>(r * cols + c)];
  return cloud;
}

}  // namespace flowforge
