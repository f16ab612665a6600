#include "unisoft/linalg.hpp"

namespace unisoft {

Eigen::MatrixXd span_basis(const Eigen::MatrixXd& rows, double rank_tol) {
    const Eigen::Index d = rows.cols();
    if (rows.rows() == 0) return Eigen::MatrixXd(d, 0);
    // SVD of the d x m matrix whose columns are the input vectors; the
    // left singular vectors of the kept singular values form the basis.
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(rows.transpose(), Eigen::ComputeThinU);
    const auto& sigma = svd.singularValues();
    if (sigma.size() == 0 || sigma(0) <= 0.0) return Eigen::MatrixXd(d, 0);
    const double cutoff = rank_tol * sigma(0);
    Eigen::Index r = 0;
    while (r < sigma.size() && sigma(r) > cutoff) ++r;
    return svd.matrixU().leftCols(r);
}

int numeric_rank(const Eigen::MatrixXd& rows, double rank_tol) {
    return static_cast<int>(span_basis(rows, rank_tol).cols());
}

double span_residual(const Eigen::MatrixXd& basis, const Eigen::VectorXd& v) {
    if (basis.cols() == 0) return v.norm();
    return (v - basis * (basis.transpose() * v)).norm();
}

}  // namespace unisoft
