#pragma once

// Affine coupling blocks  z_S <- z_S (.) s(z_P) + t(z_P)  with polynomial
// scale and shift in the passive coordinates P, and networks built from them.

#include "flowforge/henon.hpp"
#include "flowforge/langevin.hpp"
#include "flowforge/multipoly.hpp"
#include "flowforge/odeflow.hpp"

#include <Eigen/Dense>

#include <utility>
#include <vector>

namespace flowforge {

inline constexpr double kSingularScale = 1e-12;
inline constexpr int kMaxCouplingDim = 64;

class CouplingBlock {
 public:
  CouplingBlock() = default;
  // scale[i], shift[i] act on the i-th active coordinate (ascending order)
  // and are polynomials in the passive coordinates (ascending order).
  CouplingBlock(std::vector<bool> active, std::vector<Polynomial> scale,
                std::vector<Polynomial> shift, double step_time = 0.0);

  int dimension() const { return static_cast<int>(mask_.size()); }
  const std::vector<bool>& mask() const { return mask_; }
  const std::vector<int>& active() const { return active_; }
  const std::vector<int>& passive() const { return passive_; }
  const std::vector<Polynomial>& scale() const { return scale_; }
  const std::vector<Polynomial>& shift() const { return shift_; }
  double step_time() const { return step_time_; }

  // In-place forward/inverse on a raw state of length dimension().
  void forward_inplace(double* z) const;
  // Forward pass that refuses a vanishing scale, since the block is then not
  // invertible at z.
  void forward_checked(double* z, long id) const;
  // Throws SingularBlockError (block index `id`) when a scale is tiny.
  void inverse_inplace(double* z, long id = 0) const;
  // Scale values at the passive part of z.
  void scale_values(const double* z, double* out) const;
  // Left-multiplies `acc` (rows = dimension()) by this block's Jacobian at z
  // (z is the block input); returns log|det|.
  double apply_jacobian(const double* z, Eigen::MatrixXd& acc) const;

 private:
  void gather(const double* z, double* p) const;

  std::vector<bool> mask_;
  std::vector<int> active_, passive_;
  std::vector<Polynomial> scale_, shift_;
  std::vector<CompiledPolynomial> scale_c_, shift_c_;
  double step_time_ = 0.0;
};

Eigen::VectorXd block_forward(const CouplingBlock& b, const Eigen::VectorXd& z);
Eigen::VectorXd block_inverse(const CouplingBlock& b, const Eigen::VectorXd& z);

struct BlockJacobian {
  Eigen::MatrixXd jacobian;
  double log_abs_det = 0.0;  // -inf when a scale vanishes
  bool singular = false;
};

BlockJacobian block_jacobian(const CouplingBlock& b, const Eigen::VectorXd& z);

// The two blocks of one alternating Euler step of approximating_field(sys)
// at time eta * n: first v given x, then x given the new v.
std::pair<CouplingBlock, CouplingBlock> euler_step_to_blocks(const HenonSystem& sys, double eta,
                                                             long n);

struct CouplingNetwork {
  std::vector<CouplingBlock> blocks;
  Box domain;

  int dimension() const { return blocks.empty() ? domain.dimension() : blocks.front().dimension(); }
  // Throws InputError if adjacent blocks disagree on dimension.
  void validate() const;
};

Eigen::VectorXd network_forward(const CouplingNetwork& net, const Eigen::VectorXd& z);
Eigen::VectorXd network_inverse(const CouplingNetwork& net, const Eigen::VectorXd& z);

struct NetworkJacobian {
  Eigen::VectorXd value;
  Eigen::MatrixXd jacobian;
  double log_abs_det = 0.0;  // sum of block log-dets
};

NetworkJacobian network_jacobian(const CouplingNetwork& net, const Eigen::VectorXd& z);
NetworkJacobian network_inverse_jacobian(const CouplingNetwork& net, const Eigen::VectorXd& z);

FlowMap network_map(const CouplingNetwork& net);

enum class Direction { Forward, Inverse };

// One sample per row.
Eigen::MatrixXd network_pushforward(const CouplingNetwork& net, const Eigen::MatrixXd& samples,
                                    Direction direction);

// Singular values of the accumulated Jacobian over the grid.  lower/upper
// are left at 1 for the caller to fill in.
ConditioningReport network_conditioning(const CouplingNetwork& net, const Box& box,
                                        int per_axis);

struct InvertibilityReport {
  std::vector<double> min_abs_scale;  // per block, over the states reached from the grid
  double worst = 0.0;
  long worst_block = -1;
};

InvertibilityReport certify_invertibility(const CouplingNetwork& net, const Box& box,
                                          int per_axis);

}  // namespace flowforge
