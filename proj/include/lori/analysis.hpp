#pragma once

#include "lori/solver.hpp"
#include "lori/types.hpp"

namespace lori {

/// exp(xhat) at every cell, observed or not.
Matrix impute(const CountTable& table, const FitResult& fit, const CovariateSet& cov);

/// Observed counts where available, exp(xhat) elsewhere.
Matrix completed_table(const CountTable& table, const FitResult& fit,
                       const CovariateSet& cov);

/// Elementwise factors whose product is exp(xhat):
/// exp(mu), exp(R alpha) per row, exp(C beta) per column, exp(theta).
struct MultiplicativeDecomposition {
    Matrix offset_factor;
    Matrix row_factor;
    Matrix col_factor;
    Matrix interaction_factor;
};

MultiplicativeDecomposition multiplicative_decomposition(const FitResult& fit,
                                                         const CovariateSet& cov);

/// Joint row/column display coordinates: singular vectors of theta scaled by
/// the square root of the singular values. row_points * col_points^T equals
/// the best rank-d approximation of theta.
struct BiplotCoords {
    Matrix row_points;       // n x d
    Matrix col_points;       // p x d
    Vector singular_values;  // length d
    int d = 0;
};

BiplotCoords biplot_coordinates(const FitResult& fit, int d = 2);

/// Pearson correlations between covariate columns and the first d singular
/// directions of theta (row covariates vs left vectors, column covariates vs
/// right vectors). Axes whose singular value falls below direction_tol have
/// no defined correlation and are reported as NaN.
struct CovariateCorrelations {
    Matrix row;  // K1 x d
    Matrix col;  // K2 x d
};

CovariateCorrelations interaction_covariate_correlations(const FitResult& fit,
                                                         const CovariateSet& cov,
                                                         int d = 2,
                                                         double direction_tol = 1e-6);

}  // namespace lori
