#include "lori/analysis.hpp"

#include <cmath>
#include <limits>

#include "lori/linalg.hpp"

namespace lori {

Matrix impute(const CountTable& table, const FitResult& fit, const CovariateSet& cov) {
    require_dims(table, cov, fit.params);
    return build_natural_params(fit.params, cov).x.array().exp();
}

Matrix completed_table(const CountTable& table, const FitResult& fit,
                       const CovariateSet& cov) {
    Matrix out = impute(table, fit, cov);
    for (Index j = 0; j < table.cols(); ++j)
        for (Index i = 0; i < table.rows(); ++i)
            if (table.mask(i, j)) out(i, j) = table.values(i, j);
    return out;
}

MultiplicativeDecomposition multiplicative_decomposition(const FitResult& fit,
                                                         const CovariateSet& cov) {
    const Index n = fit.params.theta.rows(), p = fit.params.theta.cols();
    MultiplicativeDecomposition d;
    d.offset_factor = Matrix::Constant(n, p, std::exp(fit.params.mu));
    d.row_factor = Matrix::Ones(n, p);
    d.col_factor = Matrix::Ones(n, p);
    if (cov.k1() > 0) {
        const Vector row_effect = (cov.row_cov * fit.params.alpha).array().exp();
        d.row_factor = row_effect.replicate(1, p);
    }
    if (cov.k2() > 0) {
        const Vector col_effect = (cov.col_cov * fit.params.beta).array().exp();
        d.col_factor = col_effect.transpose().replicate(n, 1);
    }
    d.interaction_factor = fit.params.theta.array().exp();
    return d;
}

BiplotCoords biplot_coordinates(const FitResult& fit, int d) {
    const Index n = fit.params.theta.rows(), p = fit.params.theta.cols();
    if (d < 1) throw ValidationError("biplot dimension must be at least 1");
    if (d > std::min(n, p)) {
        throw ValidationError("biplot dimension " + std::to_string(d) +
                              " exceeds the matrix dimensions");
    }
    const SvdFactors f = svd_thin(fit.params.theta);
    BiplotCoords coords;
    coords.d = d;
    coords.singular_values = f.s.head(d);
    const Vector scale = coords.singular_values.array().sqrt();
    coords.row_points = f.u.leftCols(d) * scale.asDiagonal();
    coords.col_points = f.v.leftCols(d) * scale.asDiagonal();
    return coords;
}

CovariateCorrelations interaction_covariate_correlations(const FitResult& fit,
                                                         const CovariateSet& cov,
                                                         int d, double direction_tol) {
    if (cov.k1() + cov.k2() == 0) {
        throw ValidationError("covariate correlations need at least one covariate");
    }
    const BiplotCoords coords = biplot_coordinates(fit, d);
    const SvdFactors f = svd_thin(fit.params.theta);

    const auto pearson = [](const Vector& a, const Vector& b) {
        const double ma = a.mean(), mb = b.mean();
        const Vector ca = a.array() - ma, cb = b.array() - mb;
        const double denom = ca.norm() * cb.norm();
        if (denom == 0.0) return std::numeric_limits<double>::quiet_NaN();
        return ca.dot(cb) / denom;
    };

    CovariateCorrelations out;
    out.row = Matrix::Zero(cov.k1(), d);
    out.col = Matrix::Zero(cov.k2(), d);
    for (int axis = 0; axis < d; ++axis) {
        const bool undefined = coords.singular_values(axis) <= direction_tol;
        for (Index k = 0; k < cov.k1(); ++k) {
            out.row(k, axis) = undefined ? std::numeric_limits<double>::quiet_NaN()
                                         : pearson(cov.row_cov.col(k), f.u.col(axis));
        }
        for (Index k = 0; k < cov.k2(); ++k) {
            out.col(k, axis) = undefined ? std::numeric_limits<double>::quiet_NaN()
                                         : pearson(cov.col_cov.col(k), f.v.col(axis));
        }
    }
    return out;
}

}  // namespace lori
