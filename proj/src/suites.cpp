#include "flowforge/suites.hpp"

#include "flowforge/errors.hpp"
#include "flowforge/linalg.hpp"
#include "flowforge/metrics.hpp"
#include "flowforge/random.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>

namespace flowforge {

namespace {

// Typed, defaulted access to a suite's parameter object.
class Params {
 public:
  Params(const json& j, std::initializer_list<const char*> allowed, const std::string& suite)
      : j_(j.is_null() ? json::object() : j), where_(suite) {
    check_keys(j_, allowed, {}, "suite " + suite);
  }

  double num(const char* key, double fallback) const {
    if (!j_.contains(key)) return fallback;
    if (!j_.at(key).is_number()) throw ConfigError(where_ + "." + key + ": expected a number");
    return j_.at(key).get<double>();
  }

  int integer(const char* key, int fallback) const {
    if (!j_.contains(key)) return fallback;
    if (!j_.at(key).is_number_integer()) throw ConfigError(where_ + "." + key + ": expected an integer");
    return j_.at(key).get<int>();
  }

  std::vector<double> list(const char* key, std::vector<double> fallback) const {
    if (!j_.contains(key)) return fallback;
    const json& a = j_.at(key);
    if (!a.is_array() || a.empty()) throw ConfigError(where_ + "." + key + ": expected a non-empty array");
    std::vector<double> out;
    for (const auto& e : a) {
      if (!e.is_number()) throw ConfigError(where_ + "." + key + ": expected numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  const json* raw(const char* key) const { return j_.contains(key) ? &j_.at(key) : nullptr; }

 private:
  json j_;
  std::string where_;
};

std::string num(double x) { return format_number(x); }
std::string num(long x) { return std::to_string(x); }
std::string num(int x) { return std::to_string(x); }
std::string flag(bool ok) { return ok ? "1" : "0"; }

void add_row(SuiteResult& r, std::vector<std::string> cells, bool ok, const std::string& detail) {
  r.rows.push_back(std::move(cells));
  if (!ok) r.failures.push_back("row " + std::to_string(r.rows.size() - 1) + ": " + detail);
}

Eigen::MatrixXd random_orthogonal(int n, CounterStream& rng) {
  Eigen::MatrixXd g(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
}

Eigen::MatrixXd random_spd(int n, double lo, double hi, CounterStream& rng) {
  const Eigen::MatrixXd q = random_orthogonal(n, rng);
  Eigen::VectorXd ev(n);
  for (int i = 0; i < n; ++i) ev[i] = lo + (hi - lo) * rng.uniform();
  Eigen::MatrixXd s = q * ev.asDiagonal() * q.transpose();
  return 0.5 * (s + s.transpose());
}

GaussianDensity padded_source(const Eigen::MatrixXd& sigma_x) {
  const int d = static_cast<int>(sigma_x.rows());
  GaussianDensity p{Eigen::VectorXd::Zero(2 * d), Eigen::MatrixXd::Identity(2 * d, 2 * d)};
  p.covariance.topLeftCorner(d, d) = sigma_x;
  return p;
}

// Default quadratic chunk Hamiltonian in (x, v), d = 1.
Polynomial default_hamiltonian() {
  Polynomial h(2);
  h.add_term({2, 0}, 0.25);
  h.add_term({1, 1}, 0.1);
  h.add_term({0, 2}, -0.05);
  h.add_term({1, 0}, 0.1);
  return h;
}

Polynomial hamiltonian_param(const Params& p) {
  const json* h = p.raw("hamiltonian");
  if (!h) return default_hamiltonian();
  Polynomial out = polynomial_from_json(*h, "hamiltonian");
  if (out.dimension() % 2 != 0 || out.dimension() == 0)
    throw ConfigError("hamiltonian: dimension must be 2d");
  return out;
}

double slope_or_nan(const std::vector<double>& x, const std::vector<double>& y) {
  try {
    return fit_loglog_slope(x, y);
  } catch (const DegenerateFitError&) {
    return std::nan("");
  }
}

// ---------------------------------------------------------------------------

SuiteResult conditioning_suite(const json& params, std::uint64_t) {
  const Params p(params, {"kappas", "gammas", "d", "t1", "steps", "identity_tol"}, "conditioning");
  const auto kappas = p.list("kappas", {1, 2, 4});
  const auto gammas = p.list("gammas", {0.5, 1, 1.5});
  const int d = p.integer("d", 1);
  const double t1 = p.num("t1", 20.0);
  const int steps = p.integer("steps", 4000);
  const double id_tol = p.num("identity_tol", 1e-10);
  if (d < 1) throw ConfigError("conditioning.d must be positive");

  SuiteResult r;
  r.columns = {{"kappa", "largest eigenvalue of the source precision"},
               {"gamma", "friction"},
               {"lower", "singular value lower bound A"},
               {"upper", "singular value upper bound B = 1/A"},
               {"observed_min", "smallest singular value of D_t over sampled t"},
               {"observed_max", "largest singular value of D_t over sampled t"},
               {"observed_condition", "worst ratio of extreme singular values"},
               {"condition_bound", "B/A"},
               {"violations", "sampled times with a singular value outside [A, B]"},
               {"identity_deviation", "max ||D_t - I||_2 (checked only for kappa = 1)"},
               {"hessian_integral", "integral of ||C H_s||_2 over [0, t1]"},
               {"hessian_integral_bound", "(2/gamma) ln(1 + ((2+gamma)/(2-gamma))(kappa-1))"},
               {"pass", "1 if the row satisfies every check"}};
  long total_violations = 0;
  for (double kappa : kappas)
    for (double gamma : gammas) {
      // Source precision eigenvalues spread over [1, kappa].
      Eigen::VectorXd prec(d);
      for (int i = 0; i < d; ++i) prec[i] = d == 1 ? kappa : 1.0 + (kappa - 1.0) * i / (d - 1.0);
      const Eigen::MatrixXd sigma_x = prec.cwiseInverse().asDiagonal();
      const GaussianDensity p0 = padded_source(sigma_x);
      const ConditioningReport c = jacobian_flow(p0.covariance, gamma, kappa, t1, steps);
      const IntegralBoundReport ib = hessian_integral_check(p0.covariance, gamma, kappa, t1, steps);
      const bool identity_ok = kappa != 1.0 || c.identity_deviation <= id_tol;
      const bool ok = c.violations == 0 && identity_ok && ib.pass;
      total_violations += c.violations;
      add_row(r,
              {num(kappa), num(gamma), num(c.lower), num(c.upper), num(c.observed_min),
               num(c.observed_max), num(c.observed_condition), num(c.bound), num(c.violations),
               num(c.identity_deviation), num(ib.integral), num(ib.bound), flag(ok)},
              ok,
              "kappa=" + num(kappa) + " gamma=" + num(gamma) + " violations=" + num(c.violations) +
                  " identity_deviation=" + num(c.identity_deviation));
    }
  r.summary = {{"violations", total_violations}, {"t1", t1}, {"steps", steps}, {"d", d}};
  return r;
}

SuiteResult variance_suite(const json& params, std::uint64_t seed) {
  const Params p(params, {"gammas", "dims", "times", "steps_per_unit", "tol"}, "variance");
  const auto gammas = p.list("gammas", {0.5, 1, 1.5});
  const auto dims = p.list("dims", {1, 2});
  const auto times = p.list("times", {0.5, 1, 2, 5, 10});
  const int spu = p.integer("steps_per_unit", 400);
  const double tol = p.num("tol", 1e-8);

  SuiteResult r;
  r.columns = {{"gamma", "friction"},
               {"d", "position dimension"},
               {"t", "time"},
               {"error", "||Sigma_t closed form - Sigma_t integrated||_2"},
               {"tol", "allowed error"},
               {"min_eigenvalue", "smallest eigenvalue of the closed-form Sigma_t"},
               {"pass", "1 if error <= tol and Sigma_t is positive definite"}};
  double worst = 0.0;
  std::uint64_t stream = 0;
  for (double gamma : gammas)
    for (double dd : dims) {
      const int d = static_cast<int>(dd);
      if (d < 1) throw ConfigError("variance.dims must be positive");
      CounterStream rng(seed, stream++);
      const Eigen::MatrixXd sigma0 = random_spd(2 * d, 0.2, 3.0, rng);
      const Eigen::MatrixXd C = drift_matrix(gamma, d);
      Eigen::MatrixXd noise = Eigen::MatrixXd::Zero(2 * d, 2 * d);
      noise.bottomRightCorner(d, d) = 2.0 * gamma * Eigen::MatrixXd::Identity(d, d);
      const int n = 2 * d;
      VectorField lyap;
      lyap.dimension = n * n;
      lyap.rhs = [&](const Eigen::VectorXd& s, double) -> Eigen::VectorXd {
        const Eigen::Map<const Eigen::MatrixXd> S(s.data(), n, n);
        Eigen::MatrixXd dS = C * S + S * C.transpose() + noise;
        return Eigen::Map<Eigen::VectorXd>(dS.data(), n * n);
      };
      const Eigen::VectorXd s0 = Eigen::Map<const Eigen::VectorXd>(sigma0.data(), n * n);
      for (double t : times) {
        const int steps = std::max(1, static_cast<int>(std::ceil(t * spu)));
        const Eigen::VectorXd st = integrate(lyap, s0, 0.0, t, steps);
        const Eigen::MatrixXd integrated = Eigen::Map<const Eigen::MatrixXd>(st.data(), n, n);
        const Eigen::MatrixXd closed = variance_proxy(sigma0, gamma, t);
        const double err = spectral_norm(closed - integrated);
        const double min_ev = symmetric_eigenvalues(closed)[0];
        const bool ok = err <= tol && min_ev > 0.0;
        worst = std::max(worst, err);
        add_row(r, {num(gamma), num(d), num(t), num(err), num(tol), num(min_ev), flag(ok)}, ok,
                "gamma=" + num(gamma) + " d=" + num(d) + " t=" + num(t) + " error=" + num(err));
      }
    }
  r.summary = {{"max_error", worst}, {"tol", tol}};
  return r;
}

SuiteResult henon_order_suite(const json& params, std::uint64_t) {
  const Params p(params,
                 {"hamiltonian", "gamma", "taus", "half_width", "grid", "steps", "slope_lo", "slope_hi"},
                 "henon-order");
  const Polynomial H = hamiltonian_param(p);
  const double gamma = p.num("gamma", 1.0);
  const auto taus = p.list("taus", {0.2, 0.1, 0.05, 0.025});
  const double hw = p.num("half_width", 2.0);
  const int grid = p.integer("grid", 5);
  const int steps = p.integer("steps", 1000);
  const double lo = p.num("slope_lo", 1.8), hi = p.num("slope_hi", 2.2);

  const SlopeReport s = verify_chunk_order(H, gamma, Box::cube(H.dimension(), hw), taus, grid, steps);
  SuiteResult r;
  r.columns = {{"tau", "chunk length"},
               {"c0", "max value distance between the time-2pi map and the chunk flow"},
               {"c1", "c0 plus max spectral-norm Jacobian distance"},
               {"slope", "least-squares log-log slope of c1 against tau"},
               {"slope_lo", "lower end of the accepted slope range"},
               {"slope_hi", "upper end of the accepted slope range"},
               {"pass", "1 if the fitted slope is in range"}};
  const bool ok = !s.degenerate && std::isfinite(s.slope) && s.slope >= lo && s.slope <= hi;
  for (std::size_t i = 0; i < s.parameters.size(); ++i)
    add_row(r, {num(s.parameters[i]), num(s.c0[i]), num(s.c1[i]), num(s.slope), num(lo), num(hi), flag(ok)},
            ok || i + 1 < s.parameters.size(), "slope " + num(s.slope) + " outside [" + num(lo) + ", " + num(hi) + "]");
  r.summary = {{"slope", s.slope}, {"slope_lo", lo}, {"slope_hi", hi}, {"degenerate", s.degenerate}};
  return r;
}

SuiteResult euler_order_suite(const json& params, std::uint64_t) {
  const Params p(params,
                 {"hamiltonian", "gamma", "tau", "etas", "span", "half_width", "grid", "reference_steps",
                  "fd_step", "jacobian_tol", "slope_lo", "slope_hi"},
                 "euler-order");
  const Polynomial H = hamiltonian_param(p);
  const double gamma = p.num("gamma", 1.0);
  const double tau = p.num("tau", 0.1);
  const auto etas = p.list("etas", {0.04, 0.02, 0.01, 0.005});
  const double span = p.num("span", 1.0);
  const double hw = p.num("half_width", 1.0);
  const int grid = p.integer("grid", 5);
  const int ref_steps = p.integer("reference_steps", 4000);
  const double h = p.num("fd_step", 1e-5);
  const double jac_tol = p.num("jacobian_tol", 1e-8);
  const double lo = p.num("slope_lo", 0.8), hi = p.num("slope_hi", 1.2);

  const HenonSystem sys = solve_coefficients(H, gamma, tau);
  const PairField field = approximating_field(sys);
  const VectorField full = as_vector_field(field);
  const int n = H.dimension();
  const auto pts = grid_points(Box::cube(n, hw), grid);

  const FlowMap reference = [&](const Eigen::VectorXd& z) {
    return integrate_with_jacobian(full, z, 0.0, span, ref_steps);
  };
  const FlowProbe ref_probe = probe_flow(reference, pts);

  SuiteResult r;
  r.columns = {{"eta", "Euler step"},
               {"steps", "number of alternating Euler steps covering the span"},
               {"c0", "max value distance to the RK4 reference flow"},
               {"c1", "c0 plus max spectral-norm Jacobian distance"},
               {"jacobian_recurrence_error", "max |augmented Euler Jacobian - central finite difference|"},
               {"jacobian_tol", "allowed recurrence error"},
               {"slope", "log-log slope of c1 against eta"},
               {"slope_lo", "lower end of the accepted slope range"},
               {"slope_hi", "upper end of the accepted slope range"},
               {"pass", "1 if the recurrence check holds and the slope is in range"}};

  std::vector<double> c0s, c1s, jac_errs;
  std::vector<int> counts;
  for (double eta : etas) {
    const int steps = std::max(1, static_cast<int>(std::lround(span / eta)));
    const double eta_eff = span / steps;
    const FlowMap euler = [&](const Eigen::VectorXd& z) {
      return alternating_euler_map(field, z, 0.0, eta_eff, steps);
    };
    const FlowProbe probe = probe_flow(euler, pts);
    const FlowDistance dist = flow_distance(probe, ref_probe);
    double jerr = 0.0;
    auto final_state = [&](const Eigen::VectorXd& z) {
      return alternating_euler(field, z.head(n / 2), z.tail(n / 2), 0.0, eta_eff, steps).back();
    };
    for (std::size_t i = 0; i < pts.size(); ++i)
      for (int c = 0; c < n; ++c) {
        Eigen::VectorXd zp = pts[i], zm = pts[i];
        zp[c] += h;
        zm[c] -= h;
        const Eigen::VectorXd fd = (final_state(zp) - final_state(zm)) / (2.0 * h);
        jerr = std::max(jerr, (fd - probe.jacobians[i].col(c)).cwiseAbs().maxCoeff());
      }
    c0s.push_back(dist.c0);
    c1s.push_back(dist.c1);
    jac_errs.push_back(jerr);
    counts.push_back(steps);
  }
  const double slope = slope_or_nan(etas, c1s);
  const bool slope_ok = std::isfinite(slope) && slope >= lo && slope <= hi;
  for (std::size_t i = 0; i < etas.size(); ++i) {
    const bool jac_ok = jac_errs[i] <= jac_tol;
    const bool ok = jac_ok && slope_ok;
    std::string why = !jac_ok ? "jacobian recurrence error " + num(jac_errs[i])
                              : "slope " + num(slope) + " outside [" + num(lo) + ", " + num(hi) + "]";
    add_row(r,
            {num(etas[i]), num(counts[i]), num(c0s[i]), num(c1s[i]), num(jac_errs[i]), num(jac_tol), num(slope),
             num(lo), num(hi), flag(ok)},
            jac_ok && (slope_ok || i + 1 < etas.size()), why);
  }
  r.summary = {{"slope", std::isfinite(slope) ? json(slope) : json(nullptr)},
               {"slope_lo", lo},
               {"slope_hi", hi},
               {"max_jacobian_recurrence_error", *std::max_element(jac_errs.begin(), jac_errs.end())},
               {"span", span},
               {"tau", tau}};
  return r;
}

SuiteResult perturbation_order_suite(const json& params, std::uint64_t) {
  const Params p(params, {"eps", "t", "steps", "grid", "slope_lo", "slope_hi"}, "perturbation-order");
  const auto eps = p.list("eps", {0.1, 0.05, 0.025});
  const double t = p.num("t", 1.0);
  const int steps = p.integer("steps", 400);
  const int grid = p.integer("grid", 5);
  const double lo = p.num("slope_lo", 1.8), hi = p.num("slope_hi", 2.2);

  struct Case {
    std::string name;
    Eigen::MatrixXd A;
    Perturbation g;
    std::vector<Eigen::VectorXd> points;
  };
  std::vector<Case> cases;
  {
    Eigen::MatrixXd A(2, 2);
    A << 0, 1, -1, 0;
    Perturbation cube{[](const Eigen::VectorXd& z, double) -> Eigen::VectorXd { return z.array().cube(); },
                      [](const Eigen::VectorXd& z, double) -> Eigen::MatrixXd {
                        return (3.0 * z.array().square()).matrix().asDiagonal();
                      }};
    // Unit ball: the grid on [-1, 1]^2 clipped to |z| <= 1.
    std::vector<Eigen::VectorXd> ball;
    for (const auto& z : grid_points(Box::cube(2, 1.0), grid))
      if (z.norm() <= 1.0 + 1e-12) ball.push_back(z);
    cases.push_back({"harmonic-cubic", A, cube, ball});
  }
  {
    Perturbation sq{[](const Eigen::VectorXd& z, double) -> Eigen::VectorXd { return z.array().square(); },
                    [](const Eigen::VectorXd& z, double) -> Eigen::MatrixXd {
                      return (2.0 * z.array()).matrix().asDiagonal();
                    }};
    Box box;
    box.lo = Eigen::VectorXd::Constant(1, 0.5);
    box.hi = Eigen::VectorXd::Constant(1, 1.0);
    cases.push_back({"scalar-quadratic", -Eigen::MatrixXd::Identity(1, 1), sq, grid_points(box, grid)});
  }

  SuiteResult r;
  r.columns = {{"case", "0: harmonic A with g = z^3 on the unit ball; 1: x' = -x + eps x^2 on [0.5, 1]"},
               {"eps", "perturbation size"},
               {"c0", "max value distance between the full flow and y0 + eps y1"},
               {"c1", "c0 plus max spectral-norm Jacobian distance"},
               {"slope", "log-log slope of c1 against eps"},
               {"slope_lo", "lower end of the accepted slope range"},
               {"slope_hi", "upper end of the accepted slope range"},
               {"pass", "1 if the slope is in range"}};
  json slopes = json::object();
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const Case& c = cases[ci];
    const SlopeReport s = perturbation_order_check(c.A, c.g, c.points, eps, t, steps);
    const bool ok = !s.degenerate && s.slope >= lo && s.slope <= hi;
    for (std::size_t i = 0; i < eps.size(); ++i)
      add_row(r, {num(static_cast<int>(ci)), num(eps[i]), num(s.c0[i]), num(s.c1[i]), num(s.slope), num(lo),
                  num(hi), flag(ok)},
              ok || i + 1 < eps.size(), c.name + " slope " + num(s.slope));
    slopes[c.name] = std::isfinite(s.slope) ? json(s.slope) : json(nullptr);
  }
  r.summary = {{"slopes", slopes}, {"slope_lo", lo}, {"slope_hi", hi}};
  return r;
}

SuiteResult lyapunov_suite(const json& params, std::uint64_t) {
  const Params p(params, {"sigma_x", "gamma", "samples", "t_max", "slack"}, "lyapunov");
  const double sx = p.num("sigma_x", 0.5);
  const double gamma = p.num("gamma", 1.0);
  const int samples = p.integer("samples", 100);
  const double t_max = p.num("t_max", 30.0);
  const double slack = p.num("slack", 1e-6);
  if (samples < 2) throw ConfigError("lyapunov.samples must be at least 2");
  LangevinParams{1, gamma}.validate();

  const GaussianDensity p0 = padded_source(Eigen::MatrixXd::Constant(1, 1, sx));
  const GaussianDensity target{Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)};
  const double L0 = lyapunov_gaussian(p0);

  SuiteResult r;
  r.columns = {{"t", "time"},
               {"lyapunov", "L[p_t] along the analytic Gaussian path"},
               {"bound", "L[p_0] exp(-t/10) (1 + slack)"},
               {"kl", "KL(p_t || N(0, I))"},
               {"kl_increase", "KL(p_t) - KL(p_previous), must be <= 1e-14"},
               {"pass", "1 if L is under the bound and KL did not increase"}};
  double prev_kl = INFINITY, worst_ratio = 0.0;
  for (int i = 0; i < samples; ++i) {
    const double t = t_max * i / (samples - 1);
    const GaussianDensity pt = gaussian_evolve(p0, gamma, t);
    const double L = lyapunov_gaussian(pt);
    const double bound = L0 * std::exp(-t / 10.0) * (1.0 + slack);
    const double kl = gaussian_kl(pt, target);
    const double inc = i == 0 ? 0.0 : kl - prev_kl;
    const bool ok = L <= bound && inc <= 1e-14;
    if (bound > 0.0) worst_ratio = std::max(worst_ratio, L / bound);
    add_row(r, {num(t), num(L), num(bound), num(kl), num(inc), flag(ok)}, ok,
            "t=" + num(t) + " L=" + num(L) + " bound=" + num(bound) + " kl_increase=" + num(inc));
    prev_kl = kl;
  }
  r.summary = {{"lyapunov0", L0}, {"max_ratio_to_bound", worst_ratio}, {"gamma", gamma}, {"sigma_x", sx}};
  return r;
}

SuiteResult convolution_suite(const json& params, std::uint64_t seed) {
  const Params p(params, {"pairs", "max_dim", "probes", "tol"}, "convolution");
  const int pairs = p.integer("pairs", 50);
  const int max_dim = p.integer("max_dim", 3);
  const int n_probes = p.integer("probes", 5);
  const double tol = p.num("tol", 1e-10);
  if (max_dim < 1 || pairs < 1) throw ConfigError("convolution: pairs and max_dim must be positive");

  SuiteResult r;
  r.columns = {{"pair", "instance index"},
               {"dim", "dimension"},
               {"lower_margin", "min eigenvalue of H - (Sigma_2 + Sigma)^{-1}"},
               {"upper_margin", "min eigenvalue of (Sigma_1 + Sigma)^{-1} - H"},
               {"tol", "margins must be >= -tol"},
               {"pass", "1 if both margins clear -tol"}};
  double worst = INFINITY;
  for (int i = 0; i < pairs; ++i) {
    CounterStream rng(seed, 1000 + static_cast<std::uint64_t>(i));
    const int dim = 1 + i % max_dim;
    const Eigen::MatrixXd sp = random_spd(dim, 0.3, 3.0, rng);
    const Eigen::MatrixXd s = random_spd(dim, 0.3, 3.0, rng);
    const double lmin = symmetric_eigenvalues(sp)[0];
    // Sigma_1 = Sigma_p - a lambda_min I and Sigma_2 = Sigma_p + B B^T sandwich Sigma_p.
    const Eigen::MatrixXd s1 = sp - 0.9 * rng.uniform() * lmin * Eigen::MatrixXd::Identity(dim, dim);
    const Eigen::MatrixXd s2 = sp + random_spd(dim, 0.0, 1.0, rng);
    std::vector<Eigen::VectorXd> probes;
    for (int k = 0; k < n_probes; ++k) {
      Eigen::VectorXd z(dim);
      for (int c = 0; c < dim; ++c) z[c] = 2.0 * rng.normal();
      probes.push_back(z);
    }
    const ConvolutionReport c = convolution_hessian_check(s1, s2, sp, s, probes, tol);
    const double m = std::min(c.lower_margin, c.upper_margin);
    worst = std::min(worst, m);
    const bool ok = m >= -tol;
    add_row(r, {num(i), num(dim), num(c.lower_margin), num(c.upper_margin), num(tol), flag(ok)}, ok,
            "pair " + num(i) + " margin " + num(m));
  }
  r.summary = {{"min_margin", worst}, {"tol", tol}, {"pairs", pairs}};
  return r;
}

SuiteResult wasserstein_suite(const json& params, std::uint64_t seed) {
  const Params p(params,
                 {"instances", "cloud_size", "directions", "tol", "radius_delta", "radius_dim", "mc_samples"},
                 "wasserstein");
  const int instances = p.integer("instances", 100);
  const int cloud = p.integer("cloud_size", 200);
  const int directions = p.integer("directions", 16);
  const double tol = p.num("tol", 1e-12);
  const double delta = p.num("radius_delta", 1e-3);
  const int rdim = p.integer("radius_dim", 2);
  const long mc = static_cast<long>(p.num("mc_samples", 1e6));
  if (instances < 1 || cloud < 2 || directions < 1 || rdim < 1 || mc < 2)
    throw ConfigError("wasserstein: sizes must be positive (cloud_size, mc_samples >= 2)");

  SuiteResult r;
  r.columns = {{"check", "0: Lipschitz pushforward; 1: uniform-closeness pushforward; 2: radius tail vs Monte "
                         "Carlo; 3: transportation inequality"},
               {"instance", "instance index"},
               {"measured", "W1(g(a), g(b)); sliced W1(f(z), g(z)); Monte Carlo tail; W2^2"},
               {"bound", "L W1(a, b); max |f - g|; quadrature tail; 2 KL"},
               {"slack", "allowed excess: tol for checks 0, 1 and 3; three standard errors for check 2"},
               {"pass", "1 if measured <= bound + slack (check 2: |measured - bound| <= slack)"}};
  int failed = 0;

  // Lipschitz pushforward in 1D: g(x) = a sin(b x) + c x + s, Lip(g) <= |a b| + |c|.
  for (int i = 0; i < instances; ++i) {
    CounterStream rng(seed, 2000 + static_cast<std::uint64_t>(i));
    const double a = 2.0 * rng.uniform() - 1.0, b = 3.0 * rng.uniform(), c = 4.0 * rng.uniform() - 2.0;
    const double sft = rng.normal();
    const double L = std::abs(a * b) + std::abs(c);
    const double shift_b = rng.normal(), scale_b = 0.5 + rng.uniform();
    std::vector<double> xa(cloud), xb(cloud), ga(cloud), gb(cloud);
    for (int k = 0; k < cloud; ++k) {
      xa[k] = rng.normal();
      xb[k] = shift_b + scale_b * rng.normal();
    }
    auto g = [&](double x) { return a * std::sin(b * x) + c * x + sft; };
    for (int k = 0; k < cloud; ++k) {
      ga[k] = g(xa[k]);
      gb[k] = g(xb[k]);
    }
    const double lhs = w1_1d(ga, gb), rhs = L * w1_1d(xa, xb);
    const bool ok = lhs <= rhs + tol;
    failed += !ok;
    add_row(r, {"0", num(i), num(lhs), num(rhs), num(tol), flag(ok)}, ok, "Lipschitz instance " + num(i));
  }

  // Uniform closeness: g = f + bounded perturbation, compared on the same cloud.
  for (int i = 0; i < instances; ++i) {
    CounterStream rng(seed, 3000 + static_cast<std::uint64_t>(i));
    const int dim = 1 + i % 4;
    Eigen::MatrixXd M(dim, dim);
    for (int u = 0; u < dim; ++u)
      for (int v = 0; v < dim; ++v) M(u, v) = rng.normal();
    Eigen::VectorXd w(dim);
    for (int u = 0; u < dim; ++u) w[u] = rng.normal();
    const double amp = 0.5 * rng.uniform();
    SampleCloud z{Eigen::MatrixXd(cloud, dim), seed};
    for (int k = 0; k < cloud; ++k)
      for (int u = 0; u < dim; ++u) z.points(k, u) = rng.normal();
    SampleCloud fz{z.points * M.transpose(), seed}, gz{fz.points, seed};
    double eps1 = 0.0;
    for (int k = 0; k < cloud; ++k) {
      const double s = std::sin(z.points.row(k).dot(w));
      for (int u = 0; u < dim; ++u) gz.points(k, u) += amp * s * std::cos(u + 1.0 * k);
      eps1 = std::max(eps1, (gz.points.row(k) - fz.points.row(k)).norm());
    }
    const double lhs = sliced_w1(fz, gz, directions, splitmix64(seed + static_cast<std::uint64_t>(i)));
    const bool ok = lhs <= eps1 + tol;
    failed += !ok;
    add_row(r, {"1", num(i), num(lhs), num(eps1), num(tol), flag(ok)}, ok, "uniform-closeness instance " + num(i));
  }

  // Truncation radius: quadrature tail at the chosen R against Monte Carlo.
  {
    const double R = choose_radius(delta, rdim);
    const double quad = gaussian_tail_moment(R, rdim);
    CounterStream rng(seed, 4000);
    double s = 0.0, s2 = 0.0;
    for (long k = 0; k < mc; ++k) {
      double n2 = 0.0;
      for (int u = 0; u < rdim; ++u) {
        const double x = rng.normal();
        n2 += x * x;
      }
      const double nr = std::sqrt(n2);
      const double v = nr > R ? 2.0 * nr : 0.0;
      s += v;
      s2 += v * v;
    }
    const double mean = s / mc;
    const double se = std::sqrt(std::max(0.0, s2 / mc - mean * mean) / mc);
    const bool ok = std::abs(mean - quad) <= 3.0 * se && quad < delta;
    failed += !ok;
    add_row(r, {"2", "0", num(mean), num(quad), num(3.0 * se), flag(ok)}, ok,
            "radius " + num(R) + " tail " + num(quad) + " vs Monte Carlo " + num(mean));
    r.summary["radius"] = R;
    r.summary["radius_tail_quadrature"] = quad;
    r.summary["radius_tail_monte_carlo"] = mean;
    r.summary["radius_tail_standard_error"] = se;
  }

  // Transportation inequality on a few Gaussians.
  {
    std::vector<GaussianDensity> qs;
    qs.push_back({Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)});
    qs.push_back({Eigen::Vector2d(1.0, -0.5), Eigen::MatrixXd::Identity(2, 2)});
    qs.push_back({Eigen::VectorXd::Zero(2), 4.0 * Eigen::MatrixXd::Identity(2, 2)});
    CounterStream rng(seed, 5000);
    for (int k = 0; k < 5; ++k) {
      Eigen::VectorXd mu(3);
      for (int u = 0; u < 3; ++u) mu[u] = rng.normal();
      qs.push_back({mu, random_spd(3, 0.2, 3.0, rng)});
    }
    for (std::size_t i = 0; i < qs.size(); ++i) {
      const TalagrandReport t = talagrand_check(qs[i], tol);
      failed += !t.pass;
      add_row(r, {"3", num(static_cast<int>(i)), num(t.w2 * t.w2), num(2.0 * t.kl), num(tol), flag(t.pass)},
              t.pass, "transportation inequality instance " + num(static_cast<int>(i)));
    }
  }
  r.summary["failed_rows"] = failed;
  r.summary["instances"] = instances;
  return r;
}

SuiteResult solvability_suite(const json& params, std::uint64_t seed) {
  const Params p(params, {"dims", "degrees", "instances", "residual_tol", "rank_tol"}, "solvability");
  const auto dims = p.list("dims", {1, 2});
  const auto degrees = p.list("degrees", {1, 2, 3, 4});
  const int instances = p.integer("instances", 3);
  HenonOptions opt;
  opt.keep_systems = true;
  opt.residual_tol = p.num("residual_tol", 1e-8);
  opt.rank_tol = p.num("rank_tol", 1e-10);

  SuiteResult r;
  r.columns = {{"d", "position dimension"},
               {"max_degree", "total degree M of the random Hamiltonian"},
               {"instance", "random instance"},
               {"systems", "number of (j, k) coefficient systems"},
               {"rank_deficient", "systems whose numerical rank is below their row count 2n"},
               {"min_rank_ratio", "smallest sigma_{2n} / sigma_1 over the systems"},
               {"max_residual", "largest max-norm residual of the solved systems"},
               {"residual_tol", "allowed residual"},
               {"pass", "1 if every system has full row rank and a residual within tolerance"}};
  std::uint64_t stream = 6000;
  for (double dd : dims)
    for (double mm : degrees)
      for (int inst = 0; inst < instances; ++inst) {
        const int d = static_cast<int>(dd), M = static_cast<int>(mm);
        CounterStream rng(seed, stream++);
        Polynomial H(2 * d);
        for (const auto& idx : monomials_up_to(2 * d, M))
          if (total_degree(idx) > 0) H.add_term(idx, 2.0 * rng.uniform() - 1.0);
        opt.max_degree = M;
        long systems = 0, deficient = 0;
        double min_ratio = 1.0, max_res = 0.0;
        bool solved = true;
        std::string why;
        try {
          const HenonSystem sys = solve_coefficients(H, 1.0, 0.1, opt);
          for (const auto& cs : sys.systems) {
            ++systems;
            const long rows = cs.matrix.rows();
            long rank = 0;
            const double s1 = cs.singular_values.size() ? cs.singular_values[0] : 0.0;
            for (Eigen::Index q = 0; q < cs.singular_values.size(); ++q)
              if (cs.singular_values[q] > opt.rank_tol * s1) ++rank;
            if (s1 > 0.0 && rank < rows) ++deficient;
          }
          min_ratio = sys.min_rank_ratio;
          max_res = sys.max_residual;
        } catch (const SolvabilityError& e) {
          solved = false;
          why = e.what();
        }
        const bool ok = solved && deficient == 0 && max_res <= opt.residual_tol;
        add_row(r,
                {num(d), num(M), num(inst), num(systems), num(deficient), num(min_ratio), num(max_res),
                 num(opt.residual_tol), flag(ok)},
                ok, "d=" + num(d) + " M=" + num(M) + " instance " + num(inst) + (why.empty() ? "" : ": " + why));
      }
  return r;
}

using SuiteFn = SuiteResult (*)(const json&, std::uint64_t);

const std::map<std::string, SuiteFn>& registry() {
  static const std::map<std::string, SuiteFn> r = {
      {"conditioning", conditioning_suite},
      {"variance", variance_suite},
      {"henon-order", henon_order_suite},
      {"euler-order", euler_order_suite},
      {"perturbation-order", perturbation_order_suite},
      {"lyapunov", lyapunov_suite},
      {"convolution", convolution_suite},
      {"wasserstein", wasserstein_suite},
      {"solvability", solvability_suite},
  };
  return r;
}

}  // namespace

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [k, v] : registry()) n.push_back(k);
    return n;
  }();
  return names;
}

SuiteResult run_suite(const std::string& name, const json& params, std::uint64_t seed) {
  const auto it = registry().find(name);
  if (it == registry().end()) throw ConfigError("unknown suite '" + name + "'");
  const auto start = std::chrono::steady_clock::now();
  SuiteResult r = it->second(params, seed);
  r.suite = name;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

json suite_summary(const SuiteResult& result) {
  json s = result.summary.is_null() ? json::object() : result.summary;
  s["suite"] = result.suite;
  s["pass"] = result.pass();
  s["rows"] = result.rows.size();
  s["failures"] = result.failures;
  return s;
}

void write_suite(const SuiteResult& result, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const fs::path base = fs::path(out_dir) / result.suite;
  {
    std::ofstream os(base.string() + ".csv");
    for (std::size_t c = 0; c < result.columns.size(); ++c) os << (c ? "," : "") << result.columns[c].name;
    os << '\n';
    for (const auto& row : result.rows) {
      for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << row[c];
      os << '\n';
    }
  }
  {
    std::ofstream os(base.string() + "_summary.json");
    os << suite_summary(result).dump(2) << '\n';
  }
  {
    json cols = json::array();
    for (const auto& c : result.columns) cols.push_back({{"name", c.name}, {"description", c.description}});
    std::ofstream os(base.string() + "_schema.json");
    os << json{{"suite", result.suite}, {"file", result.suite + ".csv"}, {"columns", cols}}.dump(2) << '\n';
  }
}

}  // namespace flowforge
