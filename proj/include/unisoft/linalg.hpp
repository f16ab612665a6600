#pragma once

#include <Eigen/Dense>

namespace unisoft {

/// Orthonormal basis of the span of a set of vectors given as matrix rows.
///
/// Singular values below rank_tol * sigma_max are treated as zero, so the
/// verdict is invariant to a global rescaling of the inputs. Returns a
/// d x r matrix with orthonormal columns (r = numeric rank, possibly 0).
Eigen::MatrixXd span_basis(const Eigen::MatrixXd& rows, double rank_tol);

/// Numeric rank of a stack of row vectors under the same relative threshold.
int numeric_rank(const Eigen::MatrixXd& rows, double rank_tol);

/// Euclidean norm of v minus its orthogonal projection onto the column
/// space of `basis` (columns assumed orthonormal).
double span_residual(const Eigen::MatrixXd& basis, const Eigen::VectorXd& v);

}  // namespace unisoft
