#include "lori/linalg.hpp"

#include <Eigen/SVD>
#include <cmath>

#include "lori/errors.hpp"

namespace lori {

namespace {

void require_finite(const Matrix& m, const char* op) {
    if (!m.allFinite()) {
        throw NumericError(std::string(op) + ": input has non-finite entries");
    }
}

}  // namespace

SvdFactors svd_thin(const Matrix& m) {
    require_finite(m, "svd_thin");
    Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    SvdFactors f{svd.matrixU(), svd.singularValues(), svd.matrixV()};
    // Sign convention: largest-magnitude entry of each left singular vector
    // (lowest index on ties) made nonnegative.
    for (Index k = 0; k < f.u.cols(); ++k) {
        Index arg = 0;
        double best = -1.0;
        for (Index i = 0; i < f.u.rows(); ++i) {
            const double a = std::abs(f.u(i, k));
            if (a > best) {
                best = a;
                arg = i;
            }
        }
        if (f.u(arg, k) < 0.0) {
            f.u.col(k) = -f.u.col(k);
            f.v.col(k) = -f.v.col(k);
        }
    }
    return f;
}

double nuclear_norm(const Matrix& m) {
    require_finite(m, "nuclear_norm");
    if (m.isZero(0.0)) return 0.0;
    return svd_thin(m).s.sum();
}

double operator_norm(const Matrix& m) {
    require_finite(m, "operator_norm");
    if (m.isZero(0.0)) return 0.0;
    return svd_thin(m).s(0);
}

Matrix singular_value_soft_threshold(const Matrix& m, double lambda) {
    if (lambda < 0.0) throw ValidationError("soft-threshold level must be nonnegative");
    require_finite(m, "singular_value_soft_threshold");
    if (lambda == 0.0) return m;
    const SvdFactors f = svd_thin(m);
    const Vector shrunk = (f.s.array() - lambda).max(0.0);
    if ((shrunk.array() == 0.0).all()) return Matrix::Zero(m.rows(), m.cols());
    return f.u * shrunk.asDiagonal() * f.v.transpose();
}

Matrix interaction_projector(const Matrix& m) {
    require_finite(m, "interaction_projector");
    const Vector row_means = m.rowwise().mean();
    const Eigen::RowVectorXd col_means = m.colwise().mean();
    const double grand = m.mean();
    Matrix out = m;
    out.colwise() -= row_means;
    out.rowwise() -= col_means;
    out.array() += grand;
    return out;
}

int effective_rank(const Matrix& m, double tol) {
    if (tol <= 0.0) throw ValidationError("effective_rank tolerance must be positive");
    if (m.isZero(0.0)) return 0;
    const Vector s = svd_thin(m).s;
    return static_cast<int>((s.array() > tol).count());
}

}  // namespace lori
