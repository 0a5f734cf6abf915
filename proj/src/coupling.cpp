#include "flowforge/coupling.hpp"

#include "flowforge/errors.hpp"
#include "flowforge/linalg.hpp"
#include "flowforge/parallel.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>

namespace flowforge {

CouplingBlock::CouplingBlock(std::vector<bool> active, std::vector<Polynomial> scale,
                             std::vector<Polynomial> shift, double step_time)
    : mask_(std::move(active)), scale_(std::move(scale)), shift_(std::move(shift)),
      step_time_(step_time) {
  if (mask_.empty() || static_cast<int>(mask_.size()) > kMaxCouplingDim)
    throw InputError("coupling block dimension must be in [1, " + std::to_string(kMaxCouplingDim) + "]");
  for (int i = 0; i < static_cast<int>(mask_.size()); ++i)
    (mask_[i] ? active_ : passive_).push_back(i);
  if (scale_.size() != active_.size() || shift_.size() != active_.size())
    throw InputError("coupling block needs one scale and one shift per active coordinate");
  const int np = static_cast<int>(passive_.size());
  for (std::size_t i = 0; i < active_.size(); ++i) {
    if (scale_[i].dimension() != np || shift_[i].dimension() != np)
      throw InputError("coupling block polynomials must be in the passive coordinates");
    scale_c_.emplace_back(scale_[i]);
    shift_c_.emplace_back(shift_[i]);
  }
}

void CouplingBlock::gather(const double* z, double* p) const {
  for (std::size_t k = 0; k < passive_.size(); ++k) p[k] = z[passive_[k]];
}

void CouplingBlock::forward_inplace(double* z) const {
  std::array<double, kMaxCouplingDim> p;
  gather(z, p.data());
  for (std::size_t i = 0; i < active_.size(); ++i) {
    const int a = active_[i];
    z[a] = z[a] * scale_c_[i].eval(p.data()) + shift_c_[i].eval(p.data());
  }
}

void CouplingBlock::forward_checked(double* z, long id) const {
  std::array<double, kMaxCouplingDim> p;
  gather(z, p.data());
  for (std::size_t i = 0; i < active_.size(); ++i) {
    const int a = active_[i];
    const double s = scale_c_[i].eval(p.data());
    if (!(std::abs(s) >= kSingularScale))
      throw SingularBlockError("coupling block " + std::to_string(id) +
                                   " has a vanishing scale at coordinate " + std::to_string(a),
                               id, a);
    z[a] = z[a] * s + shift_c_[i].eval(p.data());
  }
}

void CouplingBlock::inverse_inplace(double* z, long id) const {
  std::array<double, kMaxCouplingDim> p;
  gather(z, p.data());
  for (std::size_t i = 0; i < active_.size(); ++i) {
    const int a = active_[i];
    const double s = scale_c_[i].eval(p.data());
    if (!(std::abs(s) >= kSingularScale))
      throw SingularBlockError("coupling block " + std::to_string(id) +
                                   " has a vanishing scale at coordinate " + std::to_string(a),
                               id, a);
    z[a] = (z[a] - shift_c_[i].eval(p.data())) / s;
  }
}

void CouplingBlock::scale_values(const double* z, double* out) const {
  std::array<double, kMaxCouplingDim> p;
  gather(z, p.data());
  for (std::size_t i = 0; i < active_.size(); ++i) out[i] = scale_c_[i].eval(p.data());
}

double CouplingBlock::apply_jacobian(const double* z, Eigen::MatrixXd& acc) const {
  std::array<double, kMaxCouplingDim> p, gs, gt;
  gather(z, p.data());
  const std::size_t np = passive_.size();
  double logdet = 0.0;
  // Active rows only depend on the passive rows (unchanged) and themselves,
  // so updating them in place is safe.
  for (std::size_t i = 0; i < active_.size(); ++i) {
    const int a = active_[i];
    const double s = scale_c_[i].eval_with_gradient(p.data(), gs.data());
    shift_c_[i].eval_with_gradient(p.data(), gt.data());
    Eigen::RowVectorXd row = s * acc.row(a);
    for (std::size_t k = 0; k < np; ++k) {
      const double c = z[a] * gs[k] + gt[k];
      if (c != 0.0) row += c * acc.row(passive_[k]);
    }
    acc.row(a) = row;
    logdet += std::log(std::abs(s));
  }
  return logdet;
}

Eigen::VectorXd block_forward(const CouplingBlock& b, const Eigen::VectorXd& z) {
  if (z.size() != b.dimension()) throw InputError("block_forward: dimension mismatch");
  Eigen::VectorXd out = z;
  b.forward_inplace(out.data());
  return out;
}

Eigen::VectorXd block_inverse(const CouplingBlock& b, const Eigen::VectorXd& z) {
  if (z.size() != b.dimension()) throw InputError("block_inverse: dimension mismatch");
  Eigen::VectorXd out = z;
  b.inverse_inplace(out.data());
  return out;
}

BlockJacobian block_jacobian(const CouplingBlock& b, const Eigen::VectorXd& z) {
  if (z.size() != b.dimension()) throw InputError("block_jacobian: dimension mismatch");
  BlockJacobian out;
  out.jacobian = Eigen::MatrixXd::Identity(b.dimension(), b.dimension());
  out.log_abs_det = b.apply_jacobian(z.data(), out.jacobian);
  out.singular = !std::isfinite(out.log_abs_det);
  if (out.singular) out.log_abs_det = -std::numeric_limits<double>::infinity();
  return out;
}

std::pair<CouplingBlock, CouplingBlock> euler_step_to_blocks(const HenonSystem& sys, double eta,
                                                             long n) {
  if (!(eta > 0.0)) throw InputError("euler_step_to_blocks: step must be positive");
  const int d = sys.dimension();
  const double t = eta * static_cast<double>(n);
  const double et = eta * sys.tau;
  std::vector<bool> v_active(2 * d, false), x_active(2 * d, false);
  for (int j = 0; j < d; ++j) {
    v_active[d + j] = true;
    x_active[j] = true;
  }
  std::vector<Polynomial> v_scale, v_shift, x_scale, x_shift;
  for (int j = 0; j < d; ++j) {
    const double w2 = static_cast<double>(sys.omega[j]) * sys.omega[j];
    v_scale.push_back(Polynomial::constant(d, 1.0) - sys.G[j].freeze(t) * et);
    v_shift.push_back(Polynomial::variable(d, j) * (-eta * w2) - sys.J[j].freeze(t) * et);
    x_scale.push_back(Polynomial::constant(d, 1.0) - sys.F[j].freeze(t) * et);
    x_shift.push_back(Polynomial::variable(d, j) * eta);
  }
  return {CouplingBlock(std::move(v_active), std::move(v_scale), std::move(v_shift), t),
          CouplingBlock(std::move(x_active), std::move(x_scale), std::move(x_shift), t)};
}

void CouplingNetwork::validate() const {
  for (std::size_t i = 1; i < blocks.size(); ++i)
    if (blocks[i].dimension() != blocks[0].dimension())
      throw InputError("network block " + std::to_string(i) + " has a different dimension");
  if (!blocks.empty() && domain.dimension() != 0 && domain.dimension() != blocks[0].dimension())
    throw InputError("network domain dimension does not match its blocks");
}

namespace {

void check_dim(const CouplingNetwork& net, const Eigen::VectorXd& z) {
  if (!net.blocks.empty() && z.size() != net.blocks.front().dimension())
    throw InputError("network: state dimension mismatch");
}

}  // namespace

Eigen::VectorXd network_forward(const CouplingNetwork& net, const Eigen::VectorXd& z) {
  check_dim(net, z);
  Eigen::VectorXd out = z;
  for (const auto& b : net.blocks) b.forward_inplace(out.data());
  return out;
}

Eigen::VectorXd network_inverse(const CouplingNetwork& net, const Eigen::VectorXd& z) {
  check_dim(net, z);
  Eigen::VectorXd out = z;
  for (long i = static_cast<long>(net.blocks.size()) - 1; i >= 0; --i)
    net.blocks[static_cast<std::size_t>(i)].inverse_inplace(out.data(), i);
  return out;
}

NetworkJacobian network_jacobian(const CouplingNetwork& net, const Eigen::VectorXd& z) {
  check_dim(net, z);
  NetworkJacobian out;
  out.value = z;
  out.jacobian = Eigen::MatrixXd::Identity(z.size(), z.size());
  for (const auto& b : net.blocks) {
    out.log_abs_det += b.apply_jacobian(out.value.data(), out.jacobian);
    b.forward_inplace(out.value.data());
  }
  return out;
}

NetworkJacobian network_inverse_jacobian(const CouplingNetwork& net, const Eigen::VectorXd& z) {
  check_dim(net, z);
  NetworkJacobian out;
  out.value = z;
  out.jacobian = Eigen::MatrixXd::Identity(z.size(), z.size());
  Eigen::MatrixXd bj;
  for (long i = static_cast<long>(net.blocks.size()) - 1; i >= 0; --i) {
    const auto& b = net.blocks[static_cast<std::size_t>(i)];
    b.inverse_inplace(out.value.data(), i);
    // D(b^{-1}) at y is the inverse of Db at b^{-1}(y).
    bj = Eigen::MatrixXd::Identity(z.size(), z.size());
    const double ld = b.apply_jacobian(out.value.data(), bj);
    out.jacobian = bj.partialPivLu().solve(out.jacobian).eval();
    out.log_abs_det -= ld;
  }
  return out;
}

FlowMap network_map(const CouplingNetwork& net) {
  return [&net](const Eigen::VectorXd& z) {
    NetworkJacobian j = network_jacobian(net, z);
    return MapEvaluation{std::move(j.value), std::move(j.jacobian)};
  };
}

Eigen::MatrixXd network_pushforward(const CouplingNetwork& net, const Eigen::MatrixXd& samples,
                                    Direction direction) {
  if (!net.blocks.empty() && samples.cols() != net.blocks.front().dimension())
    throw InputError("network_pushforward: sample dimension mismatch");
  // Row-major copy so each sample is contiguous.
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> work = samples;
  const long nb = static_cast<long>(net.blocks.size());
  parallel_for(static_cast<std::size_t>(work.rows()), [&](std::size_t r) {
    double* z = work.row(static_cast<Eigen::Index>(r)).data();
    if (direction == Direction::Forward) {
      for (long i = 0; i < nb; ++i) net.blocks[static_cast<std::size_t>(i)].forward_checked(z, i);
    } else {
      for (long i = nb - 1; i >= 0; --i) net.blocks[static_cast<std::size_t>(i)].inverse_inplace(z, i);
    }
  });
  return work;
}

ConditioningReport network_conditioning(const CouplingNetwork& net, const Box& box,
                                        int per_axis) {
  const auto pts = grid_points(box, per_axis);
  std::vector<Eigen::VectorXd> sv(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    sv[i] = singular_values(network_jacobian(net, pts[i]).jacobian);
  });
  ConditioningReport rep;
  rep.observed_min = std::numeric_limits<double>::infinity();
  rep.observed_max = 0.0;
  for (const auto& s : sv) {
    const double lo = s[s.size() - 1], hi = s[0];
    rep.observed_min = std::min(rep.observed_min, lo);
    rep.observed_max = std::max(rep.observed_max, hi);
    rep.observed_condition = std::max(rep.observed_condition, lo > 0.0 ? hi / lo
                                                                       : std::numeric_limits<double>::infinity());
    ++rep.samples;
  }
  return rep;
}

InvertibilityReport certify_invertibility(const CouplingNetwork& net, const Box& box,
                                          int per_axis) {
  const auto pts = grid_points(box, per_axis);
  const std::size_t nb = net.blocks.size();
  std::vector<std::vector<double>> per_point(pts.size());
  parallel_for(pts.size(), [&](std::size_t i) {
    std::vector<double> mins(nb, std::numeric_limits<double>::infinity());
    Eigen::VectorXd z = pts[i];
    std::array<double, kMaxCouplingDim> s;
    for (std::size_t b = 0; b < nb; ++b) {
      net.blocks[b].scale_values(z.data(), s.data());
      for (std::size_t k = 0; k < net.blocks[b].active().size(); ++k)
        mins[b] = std::min(mins[b], std::abs(s[k]));
      net.blocks[b].forward_inplace(z.data());
    }
    per_point[i] = std::move(mins);
  });
  InvertibilityReport rep;
  rep.min_abs_scale.assign(nb, std::numeric_limits<double>::infinity());
  for (const auto& m : per_point)
    for (std::size_t b = 0; b < nb; ++b) rep.min_abs_scale[b] = std::min(rep.min_abs_scale[b], m[b]);
  rep.worst = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < nb; ++b) {
    if (rep.min_abs_scale[b] < rep.worst) {
      rep.worst = rep.min_abs_scale[b];
      rep.worst_block = static_cast<long>(b);
    }
  }
  return rep;
}

}  // namespace flowforge
