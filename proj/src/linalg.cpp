#include "dskf/linalg.hpp"

#include <cstdio>

#include "dskf/errors.hpp"

namespace dskf {

Matrix symmetric_inverse_sqrt(const Matrix& p, double rel_floor, int step) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(p);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("eigendecomposition failed in inverse square root", step);
    }
    const Vector& lam = eig.eigenvalues();
    const double lam_max = lam.maxCoeff();
    if (!(lam_max > 0.0)) {
        throw NumericalError("matrix has no positive eigenvalue; inverse square root undefined", step);
    }
    const double floor = lam_max * rel_floor;
    Vector inv_sqrt(lam.size());
    for (Eigen::Index i = 0; i < lam.size(); ++i) {
        inv_sqrt[i] = 1.0 / std::sqrt(std::max(lam[i], floor));
    }
    Matrix out = eig.eigenvectors() * inv_sqrt.asDiagonal() * eig.eigenvectors().transpose();
    return symmetrize(out);
}

Matrix clip_to_psd(const Matrix& p, double tol_rel, int step) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(p);
    if (eig.info() != Eigen::Success) {
        throw NumericalError("eigendecomposition failed in PSD check", step);
    }
    const Vector& lam = eig.eigenvalues();
    const double scale = std::max(std::abs(lam.maxCoeff()), std::abs(lam.minCoeff()));
    if (lam.minCoeff() >= -tol_rel * scale) {
        return p;
    }
    std::fprintf(stderr,
                 "[dskf] warning: covariance lost positive semidefiniteness "
                 "(min eigenvalue %.3e, scale %.3e%s); clipping at 0\n",
                 lam.minCoeff(), scale,
                 step >= 0 ? (", step " + std::to_string(step)).c_str() : "");
    Vector clipped = lam.cwiseMax(0.0);
    Matrix out = eig.eigenvectors() * clipped.asDiagonal() * eig.eigenvectors().transpose();
    return symmetrize(out);
}

double min_eigenvalue(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
    return eig.eigenvalues().minCoeff();
}

}  // namespace dskf
