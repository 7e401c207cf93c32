#pragma once

#include <optional>

#include "lori/types.hpp"

namespace lori {

// Entries of the natural-parameter matrix above this are treated as numeric
// failures: exp(30) is beyond any modeled count regime and signals divergence.
inline constexpr double kDefaultExpCap = 30.0;

/// x_ij = mu + sum_k R_ik alpha_k + sum_l C_jl beta_l + theta_ij.
/// When a clamp is given, entries are saturated at +/- clamp.
NaturalParamMatrix build_natural_params(const ModelParams& params,
                                        const CovariateSet& cov,
                                        std::optional<double> clamp = std::nullopt);

/// Poisson data-fitting term: sum over observed cells of -Y_ij x_ij + exp(x_ij).
/// Masked cells contribute exactly 0 and are never read.
double data_fit(const CountTable& table, const NaturalParamMatrix& x,
                double exp_cap = kDefaultExpCap);

/// Entry (i,j) is mask_ij * (-Y_ij + exp(x_ij)); zero at masked cells.
Matrix data_fit_gradient(const CountTable& table, const NaturalParamMatrix& x,
                         double exp_cap = kDefaultExpCap);

/// data_fit at the assembled natural parameters plus lambda * nuclear_norm(theta).
double penalized_objective(const CountTable& table, const ModelParams& params,
                           const CovariateSet& cov, double lambda,
                           double exp_cap = kDefaultExpCap);

}  // namespace lori
