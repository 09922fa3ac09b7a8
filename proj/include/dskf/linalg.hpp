#pragma once

#include <Eigen/Dense>

namespace dskf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// (M + M^T)/2. Applied after every covariance-producing product.
inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Inverse principal (symmetric) square root of a symmetric PSD matrix,
/// computed via eigendecomposition. Eigenvalues below max(lambda)*rel_floor
/// are clamped to the floor, not rejected, so a rank-deficient input still
/// yields a usable (regularized) result.
///
/// Throws NumericalError if the eigensolver fails or the matrix has no
/// positive eigenvalue at all.
Matrix symmetric_inverse_sqrt(const Matrix& p, double rel_floor = 1e-12, int step = -1);

/// Returns `p` unchanged if its smallest eigenvalue is within
/// -tol_rel*max|lambda| of zero; otherwise clips negative eigenvalues at 0,
/// logs a warning to stderr, and returns the rebuilt matrix.
Matrix clip_to_psd(const Matrix& p, double tol_rel = 1e-10, int step = -1);

/// Smallest eigenvalue of a symmetric matrix (test/diagnostic helper).
double min_eigenvalue(const Matrix& m);

}  // namespace dskf
