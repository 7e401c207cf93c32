#pragma once

#include "lori/types.hpp"

namespace lori {

/// Thin SVD m = u * diag(s) * v^T with s nonincreasing and a deterministic
/// sign convention: in each left singular vector the entry of largest
/// magnitude (lowest index on ties) is nonnegative.
struct SvdFactors {
    Matrix u;   // n x r
    Vector s;   // r, nonincreasing, nonnegative
    Matrix v;   // p x r
};

SvdFactors svd_thin(const Matrix& m);

/// Sum of singular values. 0 for the zero matrix.
double nuclear_norm(const Matrix& m);

/// Largest singular value. 0 for the zero matrix.
double operator_norm(const Matrix& m);

/// u * diag(max(s - lambda, 0)) * v^T: the proximal operator of
/// lambda * nuclear_norm.
Matrix singular_value_soft_threshold(const Matrix& m, double lambda);

/// Double centering: m_ij - rowmean_i - colmean_j + grandmean. Projects onto
/// the interaction space (all row and column sums zero).
Matrix interaction_projector(const Matrix& m);

/// Number of singular values above tol.
int effective_rank(const Matrix& m, double tol = 1e-6);

}  // namespace lori
