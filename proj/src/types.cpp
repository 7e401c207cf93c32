#include "lori/types.hpp"

#include <cmath>
#include <sstream>

namespace lori {

namespace {

void check_names(const std::vector<std::string>& names, Index expected,
                 const char* what) {
    if (!names.empty() && static_cast<Index>(names.size()) != expected) {
        std::ostringstream msg;
        msg << what << " name count " << names.size() << " does not match dimension "
            << expected;
        throw ValidationError(msg.str());
    }
}

}  // namespace

CountTable::CountTable(Matrix v, Mask m, std::vector<std::string> rnames,
                       std::vector<std::string> cnames)
    : values(std::move(v)),
      mask(std::move(m)),
      row_names(std::move(rnames)),
      col_names(std::move(cnames)) {
    if (values.rows() < 1 || values.cols() < 1) {
        throw ValidationError("count table must have at least one row and one column");
    }
    if (mask.rows() != values.rows() || mask.cols() != values.cols()) {
        throw ValidationError("count table mask dimensions do not match values");
    }
    if (!mask.any()) {
        throw ValidationError("count table has no observed cells");
    }
    for (Index j = 0; j < values.cols(); ++j) {
        for (Index i = 0; i < values.rows(); ++i) {
            if (!mask(i, j)) continue;
            const double y = values(i, j);
            if (!(y >= 0.0) || y != std::floor(y) || !std::isfinite(y)) {
                std::ostringstream msg;
                msg << "observed count at (" << i << ", " << j
                    << ") is not a nonnegative integer: " << y;
                throw ValidationError(msg.str());
            }
        }
    }
    check_names(row_names, values.rows(), "row");
    check_names(col_names, values.cols(), "column");
}

double CountTable::observed_sum() const {
    double total = 0.0;
    for (Index j = 0; j < values.cols(); ++j)
        for (Index i = 0; i < values.rows(); ++i)
            if (mask(i, j)) total += values(i, j);
    return total;
}

std::vector<Index> CountTable::fully_missing_rows() const {
    std::vector<Index> out;
    for (Index i = 0; i < values.rows(); ++i)
        if (!mask.row(i).any()) out.push_back(i);
    return out;
}

std::vector<Index> CountTable::fully_missing_cols() const {
    std::vector<Index> out;
    for (Index j = 0; j < values.cols(); ++j)
        if (!mask.col(j).any()) out.push_back(j);
    return out;
}

void CountTable::require_coverage() const {
    const auto bad_rows = fully_missing_rows();
    if (!bad_rows.empty()) {
        const Index i = bad_rows.front();
        std::ostringstream msg;
        msg << "row " << (row_names.empty() ? std::to_string(i) : row_names[i])
            << " has no observed cells; its effects are unidentifiable";
        throw ValidationError(msg.str());
    }
    const auto bad_cols = fully_missing_cols();
    if (!bad_cols.empty()) {
        const Index j = bad_cols.front();
        std::ostringstream msg;
        msg << "column " << (col_names.empty() ? std::to_string(j) : col_names[j])
            << " has no observed cells; its effects are unidentifiable";
        throw ValidationError(msg.str());
    }
}

CovariateSet::CovariateSet(Matrix r, Matrix c)
    : row_cov(std::move(r)), col_cov(std::move(c)) {}

Matrix CovariateSet::standardize_columns(Matrix m, Standardization& record) {
    const Index n = m.rows(), k = m.cols();
    record.mean = Vector::Zero(k);
    record.scale = Vector::Ones(k);
    if (n < 2) {
        if (k > 0) throw ValidationError("cannot standardize covariates with fewer than 2 rows");
        return m;
    }
    for (Index j = 0; j < k; ++j) {
        const double mean = m.col(j).mean();
        const double ss = (m.col(j).array() - mean).square().sum();
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        if (sd <= 0.0 || !std::isfinite(sd)) {
            throw ValidationError("covariate column " + std::to_string(j) +
                                  " is constant; it cannot be standardized");
        }
        record.mean(j) = mean;
        record.scale(j) = sd;
        m.col(j) = (m.col(j).array() - mean) / sd;
    }
    return m;
}

CovariateSet CovariateSet::standardized(Matrix r_raw, Matrix c_raw,
                                        std::vector<std::string> rnames,
                                        std::vector<std::string> cnames) {
    CovariateSet out;
    out.row_cov = standardize_columns(std::move(r_raw), out.row_std);
    out.col_cov = standardize_columns(std::move(c_raw), out.col_std);
    check_names(rnames, out.row_cov.cols(), "row covariate");
    check_names(cnames, out.col_cov.cols(), "column covariate");
    out.row_cov_names = std::move(rnames);
    out.col_cov_names = std::move(cnames);
    return out;
}

ModelParams ModelParams::zeros(Index n, Index p, Index k1, Index k2) {
    ModelParams out;
    out.mu = 0.0;
    out.alpha = Vector::Zero(k1);
    out.beta = Vector::Zero(k2);
    out.theta = Matrix::Zero(n, p);
    return out;
}

void require_dims(const CountTable& table, const CovariateSet& cov,
                  const ModelParams& params) {
    const Index n = table.rows(), p = table.cols();
    if (cov.row_cov.size() > 0 && cov.row_cov.rows() != n)
        throw ValidationError("row covariates have " + std::to_string(cov.row_cov.rows()) +
                              " rows, table has " + std::to_string(n));
    if (cov.col_cov.size() > 0 && cov.col_cov.rows() != p)
        throw ValidationError("column covariates have " + std::to_string(cov.col_cov.rows()) +
                              " rows, table has " + std::to_string(p) + " columns");
    if (params.alpha.size() != cov.k1())
        throw ValidationError("alpha length does not match row covariate count");
    if (params.beta.size() != cov.k2())
        throw ValidationError("beta length does not match column covariate count");
    if (params.theta.rows() != n || params.theta.cols() != p)
        throw ValidationError("theta dimensions do not match the count table");
}

}  // namespace lori
