#include "lori/model.hpp"

#include <cmath>
#include <sstream>

#include "lori/linalg.hpp"

namespace lori {

namespace {

[[noreturn]] void throw_exp_overflow(Index i, Index j, double x, double cap) {
    std::ostringstream msg;
    msg << "natural parameter " << x << " at cell (" << i << ", " << j
        << ") exceeds the exp cap " << cap;
    throw NumericError(msg.str());
}

}  // namespace

NaturalParamMatrix build_natural_params(const ModelParams& params,
                                        const CovariateSet& cov,
                                        std::optional<double> clamp) {
    const Index n = params.theta.rows(), p = params.theta.cols();
    if (cov.row_cov.size() > 0 && cov.row_cov.rows() != n)
        throw ValidationError("row covariate rows do not match theta");
    if (cov.col_cov.size() > 0 && cov.col_cov.rows() != p)
        throw ValidationError("column covariate rows do not match theta");
    if (params.alpha.size() != cov.k1() || params.beta.size() != cov.k2())
        throw ValidationError("coefficient lengths do not match covariate counts");

    Matrix x = params.theta;
    x.array() += params.mu;
    if (cov.k1() > 0) x.colwise() += (cov.row_cov * params.alpha).eval();
    if (cov.k2() > 0) x.rowwise() += (cov.col_cov * params.beta).transpose().eval();
    if (clamp) {
        const double g = *clamp;
        x = x.array().min(g).max(-g);
    }
    if (!x.allFinite()) throw NumericError("natural parameters are not finite");
    return NaturalParamMatrix{std::move(x)};
}

double data_fit(const CountTable& table, const NaturalParamMatrix& x, double exp_cap) {
    const Index n = table.rows(), p = table.cols();
    if (x.x.rows() != n || x.x.cols() != p)
        throw ValidationError("natural parameter dimensions do not match the table");
    double total = 0.0;
    for (Index j = 0; j < p; ++j) {
        for (Index i = 0; i < n; ++i) {
            if (!table.mask(i, j)) continue;  // masked cells are never read
            const double xij = x.x(i, j);
            if (!std::isfinite(xij)) throw NumericError("non-finite natural parameter");
            if (xij > exp_cap) throw_exp_overflow(i, j, xij, exp_cap);
            total += -table.values(i, j) * xij + std::exp(xij);
        }
    }
    return total;
}

Matrix data_fit_gradient(const CountTable& table, const NaturalParamMatrix& x,
                         double exp_cap) {
    const Index n = table.rows(), p = table.cols();
    if (x.x.rows() != n || x.x.cols() != p)
        throw ValidationError("natural parameter dimensions do not match the table");
    Matrix grad = Matrix::Zero(n, p);
    for (Index j = 0; j < p; ++j) {
        for (Index i = 0; i < n; ++i) {
            if (!table.mask(i, j)) continue;
            const double xij = x.x(i, j);
            if (!std::isfinite(xij)) throw NumericError("non-finite natural parameter");
            if (xij > exp_cap) throw_exp_overflow(i, j, xij, exp_cap);
            grad(i, j) = -table.values(i, j) + std::exp(xij);
        }
    }
    return grad;
}

double penalized_objective(const CountTable& table, const ModelParams& params,
                           const CovariateSet& cov, double lambda, double exp_cap) {
    if (lambda < 0.0) throw ValidationError("lambda must be nonnegative");
    const double fit = data_fit(table, build_natural_params(params, cov), exp_cap);
    if (lambda == 0.0) return fit;
    return fit + lambda * nuclear_norm(params.theta);
}

}  // namespace lori
