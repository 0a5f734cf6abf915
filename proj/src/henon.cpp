#include "flowforge/henon.hpp"

#include "flowforge/errors.hpp"
#include "flowforge/linalg.hpp"
#include "flowforge/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <string>

namespace flowforge {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string index_string(const MultiIndex& k) {
  std::string s = "(";
  for (std::size_t i = 0; i < k.size(); ++i) s += (i ? "," : "") + std::to_string(k[i]);
  return s + ")";
}

MultiIndex shifted(MultiIndex k, int j, int by) {
  k[j] += by;
  return k;
}

bool in_box(const MultiIndex& p, const MultiIndex& k) {
  for (std::size_t i = 0; i < k.size(); ++i)
    if (p[i] < 0 || p[i] > k[i]) return false;
  return true;
}

// Coefficient of x^p v^{k-p} in prod_i x0_i(s)^{k_i}.
TrigFunction x0_power_coefficient(const MultiIndex& k, const MultiIndex& p,
                                  std::span<const int> omega) {
  if (!in_box(p, k)) return {};
  double scale = multi_binomial(k, p);
  for (std::size_t i = 0; i < k.size(); ++i) scale /= std::pow(omega[i], k[i] - p[i]);
  return basis_g(k, p, omega) * scale;
}

// Coefficient of x^p v^{k-p} in prod_i v0_i(s)^{k_i}.
TrigFunction v0_power_coefficient(const MultiIndex& k, const MultiIndex& p,
                                  std::span<const int> omega) {
  if (!in_box(p, k)) return {};
  double scale = multi_binomial(k, p);
  MultiIndex cos_power(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) {
    scale *= std::pow(-omega[i], p[i]);
    cos_power[i] = k[i] - p[i];
  }
  return basis_g(k, cos_power, omega) * scale;
}

MultiIndex concat(const MultiIndex& a, const MultiIndex& b) {
  MultiIndex out(a);
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

// Flattened time-varying polynomial for fast evaluation with gradient.
class TvpEvaluator {
 public:
  explicit TvpEvaluator(const TimeVaryingPolynomial& p) : dim_(p.dimension()) {
    for (const auto& [idx, f] : p.terms()) {
      Term t;
      t.exponents = idx;
      for (const auto& [m, mode] : f.modes()) {
        t.modes.push_back({m, mode.cos, mode.sin});
        max_freq_ = std::max(max_freq_, m);
      }
      terms_.push_back(std::move(t));
    }
  }

  // Value at (z, t); writes the gradient in z when grad is non-null.
  double eval(const Eigen::VectorXd& z, double t, Eigen::VectorXd* grad) const {
    if (grad) grad->setZero(dim_);
    if (terms_.empty()) return 0.0;
    std::vector<double> cm(max_freq_ + 1), sm(max_freq_ + 1);
    for (int m = 0; m <= max_freq_; ++m) {
      cm[m] = std::cos(m * t);
      sm[m] = std::sin(m * t);
    }
    double value = 0.0;
    for (const Term& term : terms_) {
      double c = 0.0;
      for (const auto& md : term.modes) c += md.a * cm[md.m] + md.b * sm[md.m];
      double mono = 1.0;
      for (int i = 0; i < dim_; ++i) mono *= std::pow(z[i], term.exponents[i]);
      value += c * mono;
      if (grad) {
        for (int i = 0; i < dim_; ++i) {
          const int e = term.exponents[i];
          if (e == 0) continue;
          double part = e * std::pow(z[i], e - 1);
          for (int l = 0; l < dim_; ++l)
            if (l != i) part *= std::pow(z[l], term.exponents[l]);
          (*grad)[i] += c * part;
        }
      }
    }
    return value;
  }

 private:
  struct Mode {
    int m;
    double a, b;
  };
  struct Term {
    MultiIndex exponents;
    std::vector<Mode> modes;
  };
  int dim_;
  int max_freq_ = 0;
  std::vector<Term> terms_;
};

struct FieldParts {
  std::vector<TvpEvaluator> J, F, G;
};

}  // namespace

std::vector<int> frequencies(int d, int max_degree) {
  if (d < 1 || max_degree < 1) throw InputError("frequencies: need d >= 1 and M >= 1");
  std::vector<int> omega(d);
  long long acc = 1;
  long long power = 1;
  omega[0] = 1;
  for (int j = 1; j < d; ++j) {
    power *= max_degree;
    acc += power;
    if (power > std::numeric_limits<int>::max() || acc > std::numeric_limits<int>::max())
      throw InputError("frequencies: M^d exceeds the integer range");
    omega[j] = static_cast<int>(acc);
  }
  return omega;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> unperturbed_solution(const Eigen::VectorXd& x0,
                                                                 const Eigen::VectorXd& v0,
                                                                 std::span<const int> omega,
                                                                 double t) {
  const auto d = x0.size();
  if (v0.size() != d || static_cast<Eigen::Index>(omega.size()) != d)
    throw InputError("unperturbed_solution: dimension mismatch");
  Eigen::VectorXd x(d), v(d);
  for (Eigen::Index i = 0; i < d; ++i) {
    const double w = omega[i];
    const double c = std::cos(w * t), s = std::sin(w * t);
    x[i] = x0[i] * c + v0[i] * s / w;
    v[i] = -w * x0[i] * s + v0[i] * c;
  }
  return {x, v};
}

TargetPolynomials target_polynomials(const Polynomial& H, double gamma, ChunkDirection direction,
                                     int max_degree) {
  if (H.dimension() < 2 || H.dimension() % 2 != 0)
    throw InputError("target_polynomials: H must be a polynomial in (x, v)");
  if (max_degree > 0 && H.degree() > max_degree)
    throw InputError("target_polynomials: H has degree " + std::to_string(H.degree()) +
                     " above M = " + std::to_string(max_degree));
  const int d = H.dimension() / 2;
  const double sign = direction == ChunkDirection::Reverse ? 1.0 : -1.0;
  TargetPolynomials out;
  for (int j = 0; j < d; ++j) {
    const Polynomial hx = poly_partial(H, j);
    const Polynomial hv = poly_partial(H, d + j);
    out.r1.push_back(hv * sign);
    out.r2.push_back((hx + hv * gamma) * (-sign));
  }
  return out;
}

HenonSystem solve_coefficients_for_targets(const TargetPolynomials& targets,
                                           std::span<const int> omega, int max_degree,
                                           double gamma, double tau,
                                           const HenonOptions& options) {
  const int d = static_cast<int>(omega.size());
  if (d < 1 || targets.r1.size() != omega.size() || targets.r2.size() != omega.size())
    throw InputError("solve_coefficients: targets and frequencies disagree on dimension");
  if (max_degree < 1) throw InputError("solve_coefficients: M must be at least 1");
  for (int j = 0; j < d; ++j) {
    for (const Polynomial* r : {&targets.r1[j], &targets.r2[j]}) {
      if (r->dimension() != 2 * d) throw InputError("solve_coefficients: target dimension mismatch");
      if (r->degree() > max_degree)
        throw InputError("solve_coefficients: target degree exceeds M = " +
                         std::to_string(max_degree));
    }
  }

  const std::vector<MultiIndex> ks = monomials_up_to(d, max_degree);
  struct Job {
    int j;
    const MultiIndex* k;
  };
  std::vector<Job> jobs;
  for (int j = 0; j < d; ++j)
    for (const auto& k : ks) jobs.push_back({j, &k});

  std::vector<CoefficientSystem> systems(jobs.size());
  parallel_for(jobs.size(), [&](std::size_t jobi) {
    const int j = jobs[jobi].j;
    const MultiIndex& k = *jobs[jobi].k;
    const double wj = omega[j];
    const TrigFunction cos_j = TrigFunction::cosine(omega[j]);
    const TrigFunction sin_j = TrigFunction::sine(omega[j]);

    const std::vector<MultiIndex> rows = box_indices(k);
    const MultiIndex kup = shifted(k, j, 1);
    const std::vector<MultiIndex> basis_idx = box_indices(kup);
    std::vector<TrigFunction> basis_sin, basis_cos;
    for (const auto& r : basis_idx) {
      const TrigFunction b = basis_g(kup, r, omega);
      basis_sin.push_back(b * sin_j);
      basis_cos.push_back(b * cos_j);
    }
    const bool has_fg = k[j] >= 1;
    const MultiIndex kdown = has_fg ? shifted(k, j, -1) : MultiIndex{};
    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index nb = static_cast<Eigen::Index>(basis_idx.size());
    const Eigen::Index cols = has_fg ? 3 * nb : nb;

    CoefficientSystem sys;
    sys.j = j;
    sys.k = k;
    sys.matrix = Eigen::MatrixXd::Zero(2 * n, cols);
    sys.rhs = Eigen::VectorXd::Zero(2 * n);
    for (Eigen::Index row = 0; row < n; ++row) {
      const MultiIndex& p = rows[row];
      MultiIndex q(d);
      for (int i = 0; i < d; ++i) q[i] = k[i] - p[i];
      const MultiIndex xv = concat(p, q);
      sys.rhs[row] = targets.r1[j].coefficient(xv);
      sys.rhs[n + row] = targets.r2[j].coefficient(xv);

      const TrigFunction pj = x0_power_coefficient(k, p, omega);
      TrigFunction coef_f, coef_g;
      if (has_fg) {
        const MultiIndex pm = shifted(p, j, -1);
        coef_f = v0_power_coefficient(kdown, pm, omega) * cos_j +
                 v0_power_coefficient(kdown, p, omega) * sin_j * (1.0 / wj);
        coef_g = x0_power_coefficient(kdown, pm, omega) * sin_j * (-wj) +
                 x0_power_coefficient(kdown, p, omega) * cos_j;
      }
      for (Eigen::Index c = 0; c < nb; ++c) {
        sys.matrix(row, c) = -trig_inner_product(basis_sin[c], pj) / wj;
        sys.matrix(n + row, c) = trig_inner_product(basis_cos[c], pj);
        if (has_fg) {
          sys.matrix(row, nb + c) = trig_inner_product(basis_cos[c], coef_f);
          sys.matrix(n + row, nb + c) = wj * trig_inner_product(basis_sin[c], coef_f);
          sys.matrix(row, 2 * nb + c) = -trig_inner_product(basis_sin[c], coef_g) / wj;
          sys.matrix(n + row, 2 * nb + c) = trig_inner_product(basis_cos[c], coef_g);
        }
      }
    }

    sys.singular_values = singular_values(sys.matrix);
    const double s1 = sys.singular_values.size() ? sys.singular_values[0] : 0.0;
    const Eigen::Index need = std::min<Eigen::Index>(2 * n, sys.singular_values.size());
    sys.rank_ratio = s1 > 0.0 ? sys.singular_values[need - 1] / s1 : 1.0;
    if (sys.matrix.size() > 0 && s1 > 0.0) {
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(sys.matrix);
      sys.solution = cod.solve(sys.rhs);
    } else {
      sys.solution = Eigen::VectorXd::Zero(cols);
    }
    sys.residual = (sys.matrix * sys.solution - sys.rhs).cwiseAbs().maxCoeff();
    auto fail = [&](const std::string& why) {
      const Eigen::VectorXd& sv = sys.singular_values;
      throw SolvabilityError(why + " for coordinate " + std::to_string(j) + ", k = " +
                                 index_string(k),
                             j, k, std::vector<double>(sv.data(), sv.data() + sv.size()));
    };
    if (need < 2 * n || sys.rank_ratio < options.rank_tol) fail("coefficient system is rank deficient");
    if (!(sys.residual <= options.residual_tol)) fail("coefficient system residual above tolerance");
    systems[jobi] = std::move(sys);
  });

  HenonSystem out;
  out.omega.assign(omega.begin(), omega.end());
  out.gamma = gamma;
  out.tau = tau;
  out.max_degree = max_degree;
  out.J.assign(d, TimeVaryingPolynomial(d));
  out.F.assign(d, TimeVaryingPolynomial(d));
  out.G.assign(d, TimeVaryingPolynomial(d));
  for (const CoefficientSystem& sys : systems) {
    const int j = sys.j;
    const MultiIndex kup = shifted(sys.k, j, 1);
    const std::vector<MultiIndex> basis_idx = box_indices(kup);
    const Eigen::Index nb = static_cast<Eigen::Index>(basis_idx.size());
    TrigFunction cj, cf, cg;
    for (Eigen::Index c = 0; c < nb; ++c) {
      const TrigFunction b = basis_g(kup, basis_idx[c], omega);
      cj += b * sys.solution[c];
      if (sys.solution.size() == 3 * nb) {
        cf += b * sys.solution[nb + c];
        cg += b * sys.solution[2 * nb + c];
      }
    }
    out.J[j].add_term(sys.k, cj);
    if (sys.solution.size() == 3 * nb) {
      const MultiIndex kdown = shifted(sys.k, j, -1);
      out.F[j].add_term(kdown, cf);
      out.G[j].add_term(kdown, cg);
    }
    out.max_residual = std::max(out.max_residual, sys.residual);
    out.min_rank_ratio = std::min(out.min_rank_ratio, sys.rank_ratio);
    ++out.system_count;
  }
  if (options.keep_systems) out.systems = std::move(systems);
  return out;
}

HenonSystem solve_coefficients(const Polynomial& H, double gamma, double tau,
                               const HenonOptions& options) {
  if (H.dimension() < 2 || H.dimension() % 2 != 0)
    throw InputError("solve_coefficients: H must be a polynomial in (x, v)");
  const int d = H.dimension() / 2;
  const int m = options.max_degree > 0 ? options.max_degree : std::max(1, H.degree());
  const TargetPolynomials targets = target_polynomials(H, gamma, options.direction, m);
  const std::vector<int> omega = frequencies(d, m);
  return solve_coefficients_for_targets(targets, omega, m, gamma, tau, options);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> period_integrals(const HenonSystem& sys,
                                                             const Eigen::VectorXd& x0,
                                                             const Eigen::VectorXd& v0,
                                                             int nodes) {
  const int d = sys.dimension();
  if (nodes < 2) throw InputError("period_integrals: need at least 2 nodes");
  Eigen::VectorXd phi1 = Eigen::VectorXd::Zero(d), phi2 = Eigen::VectorXd::Zero(d);
  const double h = kTwoPi / nodes;
  for (int i = 0; i < nodes; ++i) {
    const double s = i * h;
    const auto [x, v] = unperturbed_solution(x0, v0, sys.omega, s);
    for (int j = 0; j < d; ++j) {
      const double w = sys.omega[j];
      const double jj = sys.J[j](x, s);
      const double ff = sys.F[j](v, s);
      const double gg = sys.G[j](x, s);
      const double c = std::cos(w * s), sn = std::sin(w * s);
      phi1[j] += h * (-jj * sn / w + ff * c * x[j] - gg * sn * v[j] / w);
      phi2[j] += h * (jj * c + w * ff * sn * x[j] + gg * c * v[j]);
    }
  }
  return {phi1, phi2};
}

PairField approximating_field(const HenonSystem& sys) {
  const int d = sys.dimension();
  auto parts = std::make_shared<FieldParts>();
  for (int j = 0; j < d; ++j) {
    parts->J.emplace_back(sys.J[j]);
    parts->F.emplace_back(sys.F[j]);
    parts->G.emplace_back(sys.G[j]);
  }
  Eigen::VectorXd w2(d);
  for (int j = 0; j < d; ++j) w2[j] = static_cast<double>(sys.omega[j]) * sys.omega[j];
  const double tau = sys.tau;

  PairField f;
  f.dimension = d;
  f.f = [parts, tau, d](const Eigen::VectorXd& x, const Eigen::VectorXd& v, double t) {
    Eigen::VectorXd out(d);
    for (int j = 0; j < d; ++j) out[j] = v[j] - tau * parts->F[j].eval(v, t, nullptr) * x[j];
    return out;
  };
  f.g = [parts, tau, d, w2](const Eigen::VectorXd& x, const Eigen::VectorXd& v, double t) {
    Eigen::VectorXd out(d);
    for (int j = 0; j < d; ++j)
      out[j] = -w2[j] * x[j] - tau * parts->J[j].eval(x, t, nullptr) -
               tau * v[j] * parts->G[j].eval(x, t, nullptr);
    return out;
  };
  f.f_x = [parts, tau, d](const Eigen::VectorXd&, const Eigen::VectorXd& v, double t) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
    for (int j = 0; j < d; ++j) m(j, j) = -tau * parts->F[j].eval(v, t, nullptr);
    return m;
  };
  f.f_v = [parts, tau, d](const Eigen::VectorXd& x, const Eigen::VectorXd& v, double t) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd grad(d);
    for (int j = 0; j < d; ++j) {
      parts->F[j].eval(v, t, &grad);
      m.row(j) -= tau * x[j] * grad.transpose();
    }
    return m;
  };
  f.g_x = [parts, tau, d, w2](const Eigen::VectorXd& x, const Eigen::VectorXd& v, double t) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd gj(d), gg(d);
    for (int j = 0; j < d; ++j) {
      parts->J[j].eval(x, t, &gj);
      parts->G[j].eval(x, t, &gg);
      m.row(j) = -tau * (gj + v[j] * gg).transpose();
      m(j, j) -= w2[j];
    }
    return m;
  };
  f.g_v = [parts, tau, d](const Eigen::VectorXd& x, const Eigen::VectorXd&, double t) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
    for (int j = 0; j < d; ++j) m(j, j) = -tau * parts->G[j].eval(x, t, nullptr);
    return m;
  };
  return f;
}

VectorField hamiltonian_field(const Polynomial& H, double gamma) {
  if (H.dimension() < 2 || H.dimension() % 2 != 0)
    throw InputError("hamiltonian_field: H must be a polynomial in (x, v)");
  const int n = H.dimension();
  const int d = n / 2;
  // Row i of C grad H as a polynomial, with its gradient polynomials.
  auto rows = std::make_shared<std::vector<Polynomial>>();
  for (int j = 0; j < d; ++j) rows->push_back(poly_partial(H, d + j));
  for (int j = 0; j < d; ++j)
    rows->push_back((poly_partial(H, j) + poly_partial(H, d + j) * gamma) * -1.0);
  auto grads = std::make_shared<std::vector<CompiledPolynomial>>();
  auto values = std::make_shared<std::vector<CompiledPolynomial>>();
  for (const auto& r : *rows) {
    values->emplace_back(r);
    for (int i = 0; i < n; ++i) grads->emplace_back(poly_partial(r, i));
  }
  VectorField f;
  f.dimension = n;
  f.rhs = [values, n](const Eigen::VectorXd& z, double) {
    Eigen::VectorXd out(n);
    for (int i = 0; i < n; ++i) out[i] = (*values)[i].eval(z.data());
    return out;
  };
  f.jacobian = [grads, n](const Eigen::VectorXd& z, double) {
    Eigen::MatrixXd m(n, n);
    for (int i = 0; i < n; ++i)
      for (int c = 0; c < n; ++c) m(i, c) = (*grads)[i * n + c].eval(z.data());
    return m;
  };
  return f;
}

SlopeReport verify_chunk_order(const Polynomial& H, double gamma, const Box& box,
                               std::span<const double> taus, int per_axis, int steps,
                               const HenonOptions& options) {
  if (taus.size() < 2) throw InputError("verify_chunk_order: need at least two tau values");
  if (box.dimension() != H.dimension()) throw InputError("verify_chunk_order: box dimension mismatch");
  const VectorField truth = hamiltonian_field(H, gamma);
  const double sign = options.direction == ChunkDirection::Reverse ? -1.0 : 1.0;
  const auto pts = grid_points(box, per_axis);
  SlopeReport report;
  for (double tau : taus) {
    if (!(tau > 0.0)) throw InputError("verify_chunk_order: tau must be positive");
    const HenonSystem sys = solve_coefficients(H, gamma, tau, options);
    const VectorField approx = as_vector_field(approximating_field(sys));
    const int chunk_steps = std::max(50, steps / 10);
    const FlowMap a = [&](const Eigen::VectorXd& z) {
      return integrate_with_jacobian(approx, z, 0.0, kTwoPi, steps);
    };
    const FlowMap b = [&](const Eigen::VectorXd& z) {
      return integrate_with_jacobian(truth, z, 0.0, sign * tau, chunk_steps);
    };
    const FlowDistance dist = flow_distance(probe_flow(a, pts), probe_flow(b, pts));
    report.parameters.push_back(tau);
    report.c0.push_back(dist.c0);
    report.c1.push_back(dist.c1);
  }
  try {
    report.slope = fit_loglog_slope(report.parameters, report.c1);
  } catch (const DegenerateFitError&) {
    report.degenerate = true;
  }
  // Distances that do not move with tau are integrator noise (H = 0 gives a
  // pure harmonic field whose only error is the reference quadrature).
  const auto [lo, hi] = std::minmax_element(report.c1.begin(), report.c1.end());
  if (!(*hi > 2.0 * *lo)) report.degenerate = true;
  if (report.degenerate) report.slope = std::nan("");
  return report;
}

}  // namespace flowforge
