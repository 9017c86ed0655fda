#pragma once

#include <Eigen/Dense>

namespace unibias {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

// Relative eigenvalue floor used for positive-definiteness decisions.
inline constexpr double kPdTolerance = 1e-12;

bool is_symmetric(const Matrix& m, double tol = 1e-12);

// True when the smallest eigenvalue exceeds kPdTolerance times the largest
// (and the largest is positive). Assumes `m` is symmetric.
bool is_positive_definite(const Matrix& m, double rel_tol = kPdTolerance);

// True when no eigenvalue is below -rel_tol times the largest magnitude.
bool is_positive_semidefinite(const Matrix& m, double rel_tol = 1e-10);

// Moore-Penrose pseudo-inverse via complete orthogonal decomposition.
Matrix pseudo_inverse(const Matrix& m);

// Returns rhs * m^{-1} for a symmetric positive-definite m. Throws
// Error(SingularBlock) when m is not PD.
RowVector right_solve_spd(const RowVector& rhs, const Matrix& m);

Matrix assemble_blocks(const Matrix& a, const Matrix& ab, const Matrix& b);

}  // namespace unibias
