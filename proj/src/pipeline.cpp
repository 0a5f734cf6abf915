#include "flowforge/pipeline.hpp"

#include "flowforge/errors.hpp"
#include "flowforge/henon.hpp"
#include "flowforge/linalg.hpp"
#include "flowforge/parallel.hpp"
#include "flowforge/random.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace flowforge {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

long ceil_ratio(double a, double b) {
  return std::max(1L, static_cast<long>(std::ceil(a / b - 1e-9)));
}

}  // namespace

void BuildConfig::validate() const {
  if (d < 1) throw InputError("d must be at least 1");
  if (sigma_x.rows() != d || sigma_x.cols() != d)
    throw InputError("sigma_x must be a " + std::to_string(d) + "x" + std::to_string(d) + " matrix");
  if (mean.size() != 0 && mean.size() != d) throw InputError("mean must have length d");
  LangevinParams{d, gamma}.validate();
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InputError("epsilon must lie in (0, 1)");
  if (!(tau > 0.0)) throw InputError("tau must be positive");
  if (eta < 0.0 || !std::isfinite(eta)) throw InputError("eta must be non-negative");
  if (phi < 0.0 || !std::isfinite(phi)) throw InputError("phi must be non-negative");
  if (radius < 0.0 || !std::isfinite(radius)) throw InputError("radius must be non-negative");
  if (probe_grid < 2) throw InputError("probe_grid must be at least 2");
  if (!(probe_half_width > 0.0)) throw InputError("probe_half_width must be positive");
  if (reference_steps_per_unit < 1) throw InputError("reference_steps_per_unit must be positive");
  source().validate();
  source_kappa(source().covariance);
}

GaussianDensity BuildConfig::source() const {
  GaussianDensity p;
  p.mean = Eigen::VectorXd::Zero(2 * d);
  if (mean.size() == d) p.mean.head(d) = mean;
  p.covariance = Eigen::MatrixXd::Identity(2 * d, 2 * d);
  p.covariance.topLeftCorner(d, d) = 0.5 * (sigma_x + sigma_x.transpose());
  return p;
}

double choose_time(double eps1, double L0) {
  if (!(eps1 > 0.0 && eps1 < 1.0)) throw InputError("choose_time: eps1 must lie in (0, 1)");
  if (!(L0 > 0.0)) return 1.0;
  return std::max(1.0, -10.0 * std::log(eps1) + std::log(2.0) + std::log(L0));
}

double gaussian_tail_moment(double radius, int dim) {
  if (dim < 1) throw InputError("gaussian_tail_moment: dim must be positive");
  const double r0 = std::max(0.0, radius);
  // r * chi_dim(r) = r^dim e^{-r^2/2} / (2^{dim/2 - 1} Gamma(dim/2)).
  const double log_norm = (0.5 * dim - 1.0) * std::log(2.0) + std::lgamma(0.5 * dim);
  auto f = [&](double r) {
    if (r <= 0.0) return 0.0;
    return std::exp(dim * std::log(r) - 0.5 * r * r - log_norm);
  };
  const double upper = std::max(r0, std::sqrt(static_cast<double>(dim))) + 40.0;
  const int n = 20000;  // even
  const double h = (upper - r0) / n;
  double s = f(r0) + f(upper);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(r0 + i * h);
  return 2.0 * s * h / 3.0;
}

double choose_radius(double delta, int dim) {
  if (!(delta > 0.0)) throw InputError("choose_radius: delta must be positive");
  double r = 0.25;
  for (int i = 0; i < 2000; ++i, r *= 1.02)
    if (gaussian_tail_moment(r, dim) < delta) return r;
  throw InputError("choose_radius: delta too small for the radius grid");
}

Polynomial chunk_hamiltonian(const GaussianDensity& p) {
  const int n = p.dimension();
  const Eigen::MatrixXd prec = spd_inverse(p.covariance);
  const Eigen::VectorXd lin = prec * p.mean;
  Polynomial h(n);
  for (int i = 0; i < n; ++i) {
    MultiIndex e(n, 0);
    e[i] = 1;
    h.add_term(e, lin[i]);
    for (int j = i; j < n; ++j) {
      MultiIndex q(n, 0);
      ++q[i];
      ++q[j];
      const double c = i == j ? 0.5 * (1.0 - prec(i, i)) : -prec(i, j);
      h.add_term(q, c);
    }
  }
  return h;
}

MapEvaluation reference_flow(const GaussianDensity& p0, double gamma, double phi,
                             int steps_per_unit) {
  const VectorField field = langevin_path_field(p0, gamma);
  const int steps = std::max(1, static_cast<int>(std::ceil(phi * steps_per_unit)));
  return integrate_with_jacobian(field, Eigen::VectorXd::Zero(p0.dimension()), phi, 0.0, steps);
}

BuildResult build_network(const BuildConfig& cfg) {
  cfg.validate();
  const GaussianDensity p0 = cfg.source();
  const int d = cfg.d;
  BuildResult out;
  BuildReport& rep = out.report;

  rep.kappa = source_kappa(p0.covariance);
  rep.lyapunov0 = lyapunov_gaussian(p0);
  rep.lipschitz_bound = 1.0 / conditioning_lower_bound(rep.kappa, cfg.gamma);
  rep.epsilon1 = cfg.epsilon / (2.0 * rep.lipschitz_bound + 1.0);
  rep.phi_chosen = !(cfg.phi > 0.0);
  rep.phi = rep.phi_chosen ? choose_time(rep.epsilon1, rep.lyapunov0) : cfg.phi;
  if (rep.phi_chosen && !(rep.lyapunov0 > 0.0))
    rep.notes.push_back("source equals the target; horizon floored at 1");
  rep.radius = cfg.radius > 0.0 ? cfg.radius : choose_radius(rep.epsilon1, 2 * d);

  rep.chunks = ceil_ratio(rep.phi, cfg.tau);
  rep.tau_eff = rep.phi / static_cast<double>(rep.chunks);
  const double eta = cfg.eta > 0.0 ? cfg.eta : cfg.tau * cfg.tau;
  rep.steps_per_chunk = ceil_ratio(kTwoPi, eta);
  rep.eta_eff = kTwoPi / static_cast<double>(rep.steps_per_chunk);
  if (std::abs(rep.tau_eff - cfg.tau) > 1e-12 * cfg.tau)
    rep.notes.push_back("tau shortened to " + std::to_string(rep.tau_eff) + " to divide phi");
  if (std::abs(rep.eta_eff - eta) > 1e-12 * eta)
    rep.notes.push_back("eta shortened to " + std::to_string(rep.eta_eff) + " to divide 2 pi");

  CouplingNetwork& net = out.network;
  net.domain = Box::cube(2 * d, rep.radius);
  net.blocks.reserve(static_cast<std::size_t>(2 * rep.chunks * rep.steps_per_chunk));
  // Chunk systems are independent; solve them in parallel, then concatenate
  // from the top chunk down.
  std::vector<HenonSystem> systems(static_cast<std::size_t>(rep.chunks));
  parallel_for(systems.size(), [&](std::size_t c) {
    const double t_freeze =
        rep.tau_eff * (static_cast<double>(c) + (cfg.freeze_midpoint ? 0.5 : 1.0));
    const Polynomial H = chunk_hamiltonian(gaussian_evolve(p0, cfg.gamma, t_freeze));
    try {
      systems[c] = solve_coefficients(H, cfg.gamma, rep.tau_eff);
    } catch (const SolvabilityError& e) {
      throw SolvabilityError("chunk " + std::to_string(c) + ": " + e.what(), e.coordinate(),
                             e.index(), e.singular_values());
    }
  });
  for (long c = rep.chunks - 1; c >= 0; --c) {
    const HenonSystem& sys = systems[static_cast<std::size_t>(c)];
    rep.max_residual = std::max(rep.max_residual, sys.max_residual);
    rep.min_rank_ratio = std::min(rep.min_rank_ratio, sys.min_rank_ratio);
    for (long n = 0; n < rep.steps_per_chunk; ++n) {
      auto [bv, bx] = euler_step_to_blocks(sys, rep.eta_eff, n);
      net.blocks.push_back(std::move(bv));
      net.blocks.push_back(std::move(bx));
    }
  }
  rep.block_count = static_cast<long>(net.blocks.size());

  const MapEvaluation ref = reference_flow(p0, cfg.gamma, rep.phi, cfg.reference_steps_per_unit);
  const FlowMap reference = [&ref](const Eigen::VectorXd& z) {
    return MapEvaluation{ref.value + ref.jacobian * z, ref.jacobian};
  };
  const Box probe_box = Box::cube(2 * d, cfg.probe_half_width);
  const auto pts = grid_points(probe_box, cfg.probe_grid);
  const FlowProbe net_probe = probe_flow(network_map(net), pts);
  const FlowDistance dist = flow_distance(net_probe, probe_flow(reference, pts));
  rep.c0 = dist.c0;
  rep.c1 = dist.c1;

  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Eigen::VectorXd back = network_inverse(net, net_probe.values[i]);
    rep.roundtrip = std::max(rep.roundtrip, (back - pts[i]).norm());
  }

  rep.conditioning = network_conditioning(net, probe_box, cfg.probe_grid);
  rep.conditioning.kappa = rep.kappa;
  rep.conditioning.gamma = cfg.gamma;
  rep.conditioning.lower = conditioning_lower_bound(rep.kappa, cfg.gamma);
  rep.conditioning.upper = 1.0 / rep.conditioning.lower;
  rep.conditioning.bound = rep.conditioning.upper / rep.conditioning.lower;

  const InvertibilityReport inv = certify_invertibility(net, probe_box, cfg.probe_grid);
  rep.min_abs_scale = inv.worst;
  rep.min_scale_block = inv.worst_block;
  return out;
}

W1Report evaluate_w1(const CouplingNetwork& net, const BuildConfig& cfg, double radius,
                     long n_samples, std::uint64_t seed, int directions,
                     Eigen::MatrixXd* pushed) {
  return evaluate_w1(net, cfg.source(), radius, n_samples, seed, directions, pushed);
}

W1Report evaluate_w1(const CouplingNetwork& net, const GaussianDensity& p0, double radius,
                     long n_samples, std::uint64_t seed, int directions,
                     Eigen::MatrixXd* pushed) {
  if (n_samples < 2) throw InputError("evaluate_w1: need at least two samples");
  if (directions < 1) throw InputError("evaluate_w1: need at least one direction");
  p0.validate();
  const int dim = p0.dimension();
  if (dim != net.dimension()) throw InputError("evaluate_w1: target dimension does not match the network");
  W1Report rep;
  rep.samples = n_samples;
  rep.directions = directions;
  rep.radius = radius;
  const SampleCloud base = sample_truncated_gaussian(dim, radius, n_samples, seed);
  SampleCloud moved{network_pushforward(net, base.points, Direction::Forward), seed};
  const SampleCloud target = sample_gaussian(p0, n_samples, splitmix64(seed ^ 0x5eedULL));
  rep.sliced = sliced_w1(moved, target, directions, splitmix64(seed + 17));
  rep.marginals = marginal_w1(moved, target);
  if (pushed) *pushed = std::move(moved.points);
  return rep;
}

}  // namespace flowforge
