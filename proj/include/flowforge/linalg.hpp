#pragma once

#include <Eigen/Dense>

namespace flowforge {

// Inverse of a symmetric positive-definite matrix; throws MatrixError when
// the Cholesky factorization fails.
Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m);

// log det of a symmetric positive-definite matrix.
double spd_logdet(const Eigen::MatrixXd& m);

// Eigenvalues of the symmetric part, ascending.
Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& m);

double spectral_norm(const Eigen::MatrixXd& m);

// Singular values, descending.
Eigen::VectorXd singular_values(const Eigen::MatrixXd& m);

}  // namespace flowforge
