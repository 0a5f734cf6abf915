#include "flowforge/linalg.hpp"

#include "flowforge/errors.hpp"

namespace flowforge {

namespace {

Eigen::LLT<Eigen::MatrixXd> cholesky(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() == 0) throw MatrixError("expected a non-empty square matrix");
  if (!m.allFinite()) throw MatrixError("matrix has non-finite entries");
  Eigen::LLT<Eigen::MatrixXd> llt(0.5 * (m + m.transpose()));
  if (llt.info() != Eigen::Success) throw MatrixError("matrix is not positive definite");
  return llt;
}

}  // namespace

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m) {
  const auto llt = cholesky(m);
  Eigen::MatrixXd inv = llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
  return 0.5 * (inv + inv.transpose());
}

double spd_logdet(const Eigen::MatrixXd& m) {
  const auto llt = cholesky(m);
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

double spectral_norm(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 0.0;
  return singular_values(m)[0];
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  return svd.singularValues();
}

}  // namespace flowforge
