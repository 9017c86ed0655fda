#include "unibias/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "unibias/errors.hpp"

namespace unibias {

bool is_symmetric(const Matrix& m, double tol) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

bool is_positive_definite(const Matrix& m, double rel_tol) {
    if (m.rows() == 0 || m.rows() != m.cols()) return false;
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) return false;
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    return hi > 0.0 && lo > rel_tol * hi;
}

bool is_positive_semidefinite(const Matrix& m, double rel_tol) {
    if (m.rows() != m.cols()) return false;
    if (m.rows() == 0) return true;
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) return false;
    const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
    return es.eigenvalues().minCoeff() >= -rel_tol * std::max(scale, 1e-300);
}

Matrix pseudo_inverse(const Matrix& m) {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(m);
    const double scale = m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
    cod.setThreshold(1e-12 * std::max<Eigen::Index>(m.rows(), m.cols()));
    if (scale == 0.0) return Matrix::Zero(m.cols(), m.rows());
    return cod.pseudoInverse();
}

RowVector right_solve_spd(const RowVector& rhs, const Matrix& m) {
    if (rhs.size() != m.rows()) {
        throw Error(ErrorKind::DimensionMismatch, "row length does not match matrix size");
    }
    if (!is_positive_definite(m)) {
        throw Error(ErrorKind::SingularBlock, "block is not invertible");
    }
    Eigen::LLT<Matrix> llt(m);
    // rhs * m^{-1} = (m^{-1} rhs^T)^T since m is symmetric.
    return llt.solve(rhs.transpose()).transpose();
}

Matrix assemble_blocks(const Matrix& a, const Matrix& ab, const Matrix& b) {
    const auto da = a.rows();
    const auto db = b.rows();
    Matrix full(da + db, da + db);
    full.topLeftCorner(da, da) = a;
    full.topRightCorner(da, db) = ab;
    full.bottomLeftCorner(db, da) = ab.transpose();
    full.bottomRightCorner(db, db) = b;
    return full;
}

}  // namespace unibias
