#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "lori/errors.hpp"

namespace lori {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;
using Index = Eigen::Index;

/// Count matrix with an observation mask (true = observed).
/// Values at masked-out cells are sentinels and are never read by any loss
/// computation; they may hold arbitrary finite numbers.
struct CountTable {
    Matrix values;
    Mask mask;
    std::vector<std::string> row_names;
    std::vector<std::string> col_names;

    CountTable() = default;
    CountTable(Matrix v, Mask m,
               std::vector<std::string> rnames = {},
               std::vector<std::string> cnames = {});

    Index rows() const { return values.rows(); }
    Index cols() const { return values.cols(); }
    Index n_observed() const { return mask.count(); }
    double observed_sum() const;

    /// Indices of rows / columns with no observed cell (empty when none).
    std::vector<Index> fully_missing_rows() const;
    std::vector<Index> fully_missing_cols() const;
    void require_coverage() const;  // throws ValidationError naming offenders
};

/// Per-column centering/scaling applied to a covariate matrix.
struct Standardization {
    Vector mean;
    Vector scale;  // sample standard deviation (n-1 denominator)
};

/// Row covariates R (n x K1) and column covariates C (p x K2), standardized.
/// Either side may be empty (K = 0).
struct CovariateSet {
    Matrix row_cov;
    Matrix col_cov;
    Standardization row_std;
    Standardization col_std;
    std::vector<std::string> row_cov_names;
    std::vector<std::string> col_cov_names;

    CovariateSet() = default;
    CovariateSet(Matrix r, Matrix c);

    /// Centers and scales each column; errors on constant columns.
    static CovariateSet standardized(Matrix r_raw, Matrix c_raw,
                                     std::vector<std::string> rnames = {},
                                     std::vector<std::string> cnames = {});

    Index k1() const { return row_cov.cols(); }
    Index k2() const { return col_cov.cols(); }
    static Matrix standardize_columns(Matrix m, Standardization& record);
};

/// Offset, covariate coefficients, and the doubly centered interaction matrix.
struct ModelParams {
    double mu = 0.0;
    Vector alpha;   // length K1
    Vector beta;    // length K2
    Matrix theta;   // n x p, row and column sums 0

    static ModelParams zeros(Index n, Index p, Index k1, Index k2);
};

/// The natural-parameter matrix x with x_ij = mu + R_i.alpha + C_j.beta + theta_ij.
struct NaturalParamMatrix {
    Matrix x;
};

void require_dims(const CountTable& table, const CovariateSet& cov,
                  const ModelParams& params);

}  // namespace lori
