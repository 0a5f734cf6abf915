#include "flowforge/langevin.hpp"

#include "flowforge/errors.hpp"
#include "flowforge/linalg.hpp"
#include "flowforge/metrics.hpp"
#include "flowforge/parallel.hpp"
#include "flowforge/random.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace flowforge {

void LangevinParams::validate() const {
  if (d < 1) throw InputError("dimension must be at least 1");
  if (!(gamma > 0.0 && gamma < 2.0))
    throw InputError("friction gamma must satisfy 0 < gamma < 2, got " + std::to_string(gamma));
}

void GaussianDensity::validate() const {
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size())
    throw MatrixError("covariance shape does not match the mean");
  if (!mean.allFinite() || !covariance.allFinite()) throw MatrixError("non-finite Gaussian parameters");
  const double scale = std::max(1.0, covariance.cwiseAbs().maxCoeff());
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw MatrixError("covariance is not symmetric");
  if (symmetric_eigenvalues(covariance)[0] <= 0.0)
    throw MatrixError("covariance is not positive definite");
}

double block_exp_norm_bound(double gamma, double t) {
  return std::sqrt((2.0 + gamma) / (2.0 - gamma)) * std::exp(-0.5 * gamma * t);
}

Eigen::MatrixXd kron_identity(const Eigen::Matrix2d& block, int d) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(2 * d, 2 * d);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(d, d);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 2; ++c) out.block(r * d, c * d, d, d) = block(r, c) * id;
  return out;
}

Eigen::MatrixXd drift_matrix(double gamma, int d) {
  Eigen::Matrix2d b;
  b << 0.0, 1.0, -1.0, -gamma;
  return kron_identity(b, d);
}

namespace {

int half_dimension(Eigen::Index n) {
  if (n <= 0 || n % 2 != 0) throw InputError("phase-space dimension must be even and positive");
  return static_cast<int>(n / 2);
}

}  // namespace

Eigen::MatrixXd variance_proxy(const Eigen::MatrixXd& sigma0, double gamma, double t) {
  if (sigma0.rows() != sigma0.cols()) throw InputError("variance_proxy: covariance must be square");
  const int d = half_dimension(sigma0.rows());
  const Eigen::MatrixXd e = kron_identity(block_exp(gamma, t), d);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2 * d, 2 * d);
  Eigen::MatrixXd s = e * (sigma0 - id) * e.transpose() + id;
  return 0.5 * (s + s.transpose());
}

GaussianDensity gaussian_evolve(const GaussianDensity& p0, double gamma, double t) {
  const int d = half_dimension(p0.mean.size());
  const Eigen::MatrixXd e = kron_identity(block_exp(gamma, t), d);
  return {e * p0.mean, variance_proxy(p0.covariance, gamma, t)};
}

VectorField langevin_field(const GaussianDensity& p, double gamma) {
  const int d = half_dimension(p.mean.size());
  const Eigen::MatrixXd prec = spd_inverse(p.covariance);
  const Eigen::MatrixXd c = drift_matrix(gamma, d);
  const Eigen::MatrixXd jac = c * (Eigen::MatrixXd::Identity(2 * d, 2 * d) - prec);
  const Eigen::VectorXd offset = c * (prec * p.mean);
  VectorField field;
  field.dimension = 2 * d;
  field.rhs = [jac, offset](const Eigen::VectorXd& z, double) -> Eigen::VectorXd {
    return jac * z + offset;
  };
  field.jacobian = [jac](const Eigen::VectorXd&, double) -> Eigen::MatrixXd { return jac; };
  return field;
}

VectorField langevin_path_field(const GaussianDensity& p0, double gamma) {
  const int d = half_dimension(p0.mean.size());
  const Eigen::MatrixXd c = drift_matrix(gamma, d);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2 * d, 2 * d);
  VectorField field;
  field.dimension = 2 * d;
  field.rhs = [=](const Eigen::VectorXd& z, double t) -> Eigen::VectorXd {
    const GaussianDensity p = gaussian_evolve(p0, gamma, t);
    const Eigen::MatrixXd prec = spd_inverse(p.covariance);
    return c * ((id - prec) * z + prec * p.mean);
  };
  field.jacobian = [=](const Eigen::VectorXd&, double t) -> Eigen::MatrixXd {
    return c * (id - spd_inverse(variance_proxy(p0.covariance, gamma, t)));
  };
  return field;
}

double conditioning_lower_bound(double kappa, double gamma) {
  LangevinParams{1, gamma}.validate();
  if (!(kappa >= 1.0)) throw InputError("kappa must be at least 1");
  return std::pow(1.0 + (2.0 + gamma) / (2.0 - gamma) * (kappa - 1.0), -2.0 / gamma);
}

double source_kappa(const Eigen::MatrixXd& sigma0) {
  const Eigen::VectorXd ev = symmetric_eigenvalues(spd_inverse(sigma0));
  if (ev[0] < 1.0 - 1e-12)
    throw PreconditionError("precision eigenvalue " + std::to_string(ev[0]) +
                            " is below 1 (source must satisfy I <= Sigma^{-1})");
  return ev[ev.size() - 1];
}

ConditioningReport jacobian_flow(const Eigen::MatrixXd& sigma0, double gamma, double kappa,
                                 double t1, int steps) {
  LangevinParams{1, gamma}.validate();
  if (steps < 1 || !(t1 >= 0.0)) throw InputError("jacobian_flow: need steps >= 1 and t1 >= 0");
  const int d = half_dimension(sigma0.rows());
  const Eigen::VectorXd ev = symmetric_eigenvalues(spd_inverse(sigma0));
  const double slack = 1e-12 * std::max(1.0, kappa);
  if (ev[0] < 1.0 - slack)
    throw PreconditionError("precision eigenvalue " + std::to_string(ev[0]) + " is below 1");
  if (ev[ev.size() - 1] > kappa + slack)
    throw PreconditionError("precision eigenvalue " + std::to_string(ev[ev.size() - 1]) +
                            " exceeds kappa = " + std::to_string(kappa));

  ConditioningReport rep;
  rep.kappa = kappa;
  rep.gamma = gamma;
  rep.lower = conditioning_lower_bound(kappa, gamma);
  rep.upper = 1.0 / rep.lower;
  rep.bound = rep.upper / rep.lower;
  rep.observed_min = std::numeric_limits<double>::infinity();
  rep.observed_max = 0.0;
  rep.observed_condition = 1.0;

  const Eigen::MatrixXd c = drift_matrix(gamma, d);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2 * d, 2 * d);
  auto rate = [&](double t) -> Eigen::MatrixXd {
    return c * (id - spd_inverse(variance_proxy(sigma0, gamma, t)));
  };
  auto record = [&](const Eigen::MatrixXd& dm) {
    const Eigen::VectorXd sv = singular_values(dm);
    const double lo = sv[sv.size() - 1];
    const double hi = sv[0];
    rep.observed_min = std::min(rep.observed_min, lo);
    rep.observed_max = std::max(rep.observed_max, hi);
    rep.observed_condition = std::max(rep.observed_condition, hi / lo);
    rep.identity_deviation = std::max(rep.identity_deviation, spectral_norm(dm - id));
    const double tol = 1e-9;
    if (lo < rep.lower * (1.0 - tol) || hi > rep.upper * (1.0 + tol)) ++rep.violations;
    ++rep.samples;
  };

  Eigen::MatrixXd dm = id;
  record(dm);
  const double h = t1 / steps;
  for (int s = 0; s < steps; ++s) {
    const double t = s * h;
    const Eigen::MatrixXd a0 = rate(t);
    const Eigen::MatrixXd am = rate(t + 0.5 * h);
    const Eigen::MatrixXd a1 = rate(t + h);
    const Eigen::MatrixXd k1 = a0 * dm;
    const Eigen::MatrixXd k2 = am * (dm + 0.5 * h * k1);
    const Eigen::MatrixXd k3 = am * (dm + 0.5 * h * k2);
    const Eigen::MatrixXd k4 = a1 * (dm + h * k3);
    dm += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!dm.allFinite()) throw DivergenceError("non-finite Jacobian", s + 1);
    record(dm);
  }
  return rep;
}

IntegralBoundReport hessian_integral_check(const Eigen::MatrixXd& sigma0, double gamma,
                                           double kappa, double t1, int steps) {
  if (steps < 1) throw InputError("hessian_integral_check: need steps >= 1");
  const int d = half_dimension(sigma0.rows());
  const Eigen::MatrixXd c = drift_matrix(gamma, d);
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2 * d, 2 * d);
  auto integrand = [&](double t) {
    return spectral_norm(c * (id - spd_inverse(variance_proxy(sigma0, gamma, t))));
  };
  IntegralBoundReport rep;
  const double h = t1 / steps;
  double prev = integrand(0.0);
  for (int s = 1; s <= steps; ++s) {
    const double cur = integrand(s * h);
    rep.integral += 0.5 * h * (prev + cur);
    prev = cur;
  }
  rep.bound = (2.0 / gamma) * std::log(1.0 + (2.0 + gamma) / (2.0 - gamma) * (kappa - 1.0));
  rep.pass = rep.integral <= rep.bound * (1.0 + 1e-9) + 1e-12;
  return rep;
}

ConvolutionReport convolution_hessian_check(const Eigen::MatrixXd& sigma1,
                                            const Eigen::MatrixXd& sigma2,
                                            const Eigen::MatrixXd& sigma_p,
                                            const Eigen::MatrixXd& sigma,
                                            const std::vector<Eigen::VectorXd>& probes,
                                            double tol) {
  const auto n = sigma_p.rows();
  if (sigma1.rows() != n || sigma2.rows() != n || sigma.rows() != n)
    throw InputError("convolution_hessian_check: dimension mismatch");
  if (symmetric_eigenvalues(sigma_p - sigma1)[0] < -tol ||
      symmetric_eigenvalues(sigma2 - sigma_p)[0] < -tol)
    throw PreconditionError("covariance of p is not inside [Sigma_1, Sigma_2]");
  if (symmetric_eigenvalues(sigma)[0] < -tol)
    throw PreconditionError("Sigma must be positive semidefinite");

  ConvolutionReport rep;
  const Eigen::MatrixXd lower = spd_inverse(sigma2 + sigma);
  const Eigen::MatrixXd upper = spd_inverse(sigma1 + sigma);
  const Eigen::MatrixXd h = spd_inverse(sigma_p + sigma);
  rep.hessian = h;
  rep.lower_margin = std::numeric_limits<double>::infinity();
  rep.upper_margin = std::numeric_limits<double>::infinity();
  // -Hess ln N(0, Sigma_p + Sigma) is the same at every probe; the loop keeps
  // the check pointwise so non-Gaussian Hessians could be slotted in.
  auto check_at = [&](const Eigen::VectorXd&) {
    rep.lower_margin = std::min(rep.lower_margin, symmetric_eigenvalues(h - lower)[0]);
    rep.upper_margin = std::min(rep.upper_margin, symmetric_eigenvalues(upper - h)[0]);
    ++rep.probes;
  };
  if (probes.empty()) {
    check_at(Eigen::VectorXd::Zero(n));
  } else {
    for (const auto& z : probes) {
      if (z.size() != n) throw InputError("convolution_hessian_check: probe dimension mismatch");
      check_at(z);
    }
  }
  rep.pass = rep.lower_margin >= -tol && rep.upper_margin >= -tol;
  return rep;
}

Eigen::MatrixXd lyapunov_weight(int d) {
  Eigen::Matrix2d s;
  s << 0.25, 0.5, 0.5, 2.0;
  return kron_identity(s, d);
}

double lyapunov_gaussian(const GaussianDensity& p) {
  p.validate();
  const int d = half_dimension(p.mean.size());
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(2 * d, 2 * d);
  const GaussianDensity target{Eigen::VectorXd::Zero(2 * d), id};
  const double kl = gaussian_kl(p, target);
  // u = K z + Sigma^{-1} mu with K = I - Sigma^{-1}; E[u] = mu, Cov[u] = K Sigma K^T.
  const Eigen::MatrixXd k = id - spd_inverse(p.covariance);
  const Eigen::MatrixXd s = lyapunov_weight(d);
  const double quad = (s * k * p.covariance * k.transpose()).trace() + p.mean.dot(s * p.mean);
  return kl + quad;
}

Eigen::MatrixXd sde_simulate(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad_U,
                             const GaussianDensity& initial, const SdeOptions& o) {
  initial.validate();
  const int d = half_dimension(initial.mean.size());
  if (!(o.eta > 0.0) || o.steps < 0 || o.particles < 1)
    throw InputError("sde_simulate: need eta > 0, steps >= 0 and particles >= 1");
  if (!(o.gamma > 0.0) || !(o.eta * o.gamma < 1.0))
    throw InputError("sde_simulate: need gamma > 0 and eta * gamma < 1");
  const Eigen::MatrixXd chol = Eigen::LLT<Eigen::MatrixXd>(initial.covariance).matrixL();
  const double noise_scale = o.noise ? std::sqrt(2.0 * o.gamma * o.eta) : 0.0;
  Eigen::MatrixXd out(o.particles, 2 * d);
  parallel_for(static_cast<std::size_t>(o.particles), [&](std::size_t i) {
    CounterStream rng(o.seed, i);
    Eigen::VectorXd xi(2 * d);
    for (int k = 0; k < 2 * d; ++k) xi[k] = rng.normal();
    const Eigen::VectorXd z0 = initial.mean + chol * xi;
    Eigen::VectorXd x = z0.head(d);
    Eigen::VectorXd v = z0.tail(d);
    Eigen::VectorXd noise(d);
    for (long s = 0; s < o.steps; ++s) {
      if (o.noise)
        for (int k = 0; k < d; ++k) noise[k] = noise_scale * rng.normal();
      else
        noise.setZero();
      v = (1.0 - o.eta * o.gamma) * v - o.eta * grad_U(x) + noise;
      x = x + o.eta * v;
      if (!x.allFinite() || !v.allFinite() || x.norm() + v.norm() > kDivergenceNorm)
        throw DivergenceError("particle " + std::to_string(i) + " diverged", s + 1);
    }
    out.row(static_cast<Eigen::Index>(i)).head(d) = x.transpose();
    out.row(static_cast<Eigen::Index>(i)).tail(d) = v.transpose();
  });
  return out;
}

void write_particles_csv(std::ostream& os, const Eigen::MatrixXd& particles) {
  const auto d = particles.cols() / 2;
  for (Eigen::Index i = 0; i < d; ++i) os << (i ? "," : "") << "x_" << i;
  for (Eigen::Index i = 0; i < d; ++i) os << ",v_" << i;
  os << '\n';
  const auto old = os.precision(17);
  for (Eigen::Index r = 0; r < particles.rows(); ++r) {
    for (Eigen::Index c = 0; c < particles.cols(); ++c) os << (c ? "," : "") << particles(r, c);
    os << '\n';
  }
  os.precision(old);
}

}  // namespace flowforge
