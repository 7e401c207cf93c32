#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lori/solver.hpp"
#include "lori/types.hpp"

namespace lori {

enum class SelectionMethod { qut, cv };

struct SelectionReport {
    SelectionMethod method = SelectionMethod::qut;
    double chosen_lambda = 0.0;
    double lambda0 = 0.0;  // null-thresholding statistic of the data
    std::vector<double> bootstrap_stats;                 // qut only, length B
    std::vector<std::pair<double, double>> cv_grid;      // cv only: (lambda, heldout error)
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    int n_failures = 0;  // bootstrap replicates that failed to fit
};

/// Main-effects-only fit (theta pinned at 0): joint damped-Newton Poisson
/// regression of the observed counts on [1 | R | C].
ModelParams fit_null_model(const CountTable& table, const CovariateSet& cov,
                           const SolverConfig& config = {});

/// Smallest lambda at which the fitted interaction matrix is exactly zero:
/// the operator norm of the double-centered data-fit gradient at the
/// main-effects-only fit.
double null_threshold_stat(const CountTable& table, const CovariateSet& cov,
                           const SolverConfig& config = {});

/// Quantile universal threshold by parametric bootstrap: B synthetic tables
/// with independent Poisson entries at the null-model means (observed mask
/// reused exactly), chosen lambda = upper-epsilon empirical quantile of their
/// null-thresholding statistics. Replicates run concurrently on streams
/// derived from (seed, replicate); results are order-independent.
SelectionReport qut_select(const CountTable& table, const CovariateSet& cov,
                           const SolverConfig& config = {}, double epsilon = 0.05,
                           int n_bootstrap = 100, std::uint64_t seed = 0);

struct IndependenceTest {
    bool reject = false;
    double lambda0 = 0.0;
    double threshold = 0.0;
};

/// Tests "no interaction beyond the main effects": rejects when the data's
/// null-thresholding statistic exceeds the bootstrap threshold.
IndependenceTest independence_test(const CountTable& table, const CovariateSet& cov,
                                   const SolverConfig& config = {},
                                   double epsilon = 0.05, int n_bootstrap = 100,
                                   std::uint64_t seed = 0);

/// Monte Carlo cross-validation: each fold hides a random fraction of the
/// observed cells (keeping every row and column covered), fits the
/// warm-started path, and scores squared error between exp(xhat) and the
/// held-out counts. Ties break toward the larger lambda.
SelectionReport cross_validate(const CountTable& table, const CovariateSet& cov,
                               const std::vector<double>& lambdas,
                               double erase_fraction = 0.2, int n_folds = 5,
                               const SolverConfig& config = {},
                               std::uint64_t seed = 0);

}  // namespace lori
