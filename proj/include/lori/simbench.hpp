#pragma once

#include <cstdint>
#include <string>
#include <tuple>
#include <vector>

#include "lori/solver.hpp"
#include "lori/types.hpp"

namespace lori {

/// Synthetic-data recipe: Gaussian covariates with block-diagonal covariance,
/// a random doubly centered rank-theta_rank interaction rescaled so that
/// ||theta*||_F / ||X0*||_F = tau_ratio, and independent Poisson counts.
struct SimSpec {
    Index n = 100;
    Index p = 20;
    Index k1 = 3;
    Index k2 = 4;
    double mu_star = 1.0;
    Vector alpha_star;  // defaults to (2, 0, ..., 0) when empty
    Vector beta_star;   // defaults to (-2, 0, ..., 0) when empty
    int theta_rank = 5;
    double tau_ratio = 0.0;
    double miss_prob = 0.0;
    std::vector<int> row_cov_blocks;  // block sizes; empty = independent columns
    std::vector<int> col_cov_blocks;
    double row_block_rho = 0.0;       // within-block correlation
    double col_block_rho = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
    Vector effective_alpha() const;
    Vector effective_beta() const;
};

struct SimulatedDataset {
    CountTable table;
    CovariateSet cov;
    ModelParams truth;
    Matrix natural_params;  // X* = mu* + R alpha* + C beta* + theta*
};

SimulatedDataset simulate_dataset(const SimSpec& spec);

/// Masks each currently observed cell independently with probability
/// miss_prob; redraws (bounded) whenever a row or column would lose all of
/// its observed cells.
CountTable apply_mcar_mask(const CountTable& table, double miss_prob,
                           std::uint64_t seed);

/// Column-mean imputation baseline: masked cells take the mean of the
/// observed cells in their column, observed cells keep their value.
Matrix baseline_column_mean(const CountTable& table);

/// Soundness facts recorded for every solver fit inside a benchmark, so the
/// acceptance suite can audit them without rerunning.
struct FitAudit {
    bool objective_monotone = true;       // within 1e-10
    double max_centering_violation = 0.0; // largest |row/col sum| of theta
    bool converged = true;
};

FitAudit audit_fit(const FitResult& fit);

struct EstimationRow {
    double tau = 0.0;
    int rep = 0;
    bool ok = true;
    std::string error;
    double coef_rmse_lori = 0.0;
    double coef_rmse_glm = 0.0;
    double rel_rmse_lori = 0.0;
    double rel_rmse_lrm = 0.0;
    double rel_rmse_glm = 0.0;
    double lambda_lori = 0.0;
    double lambda_lrm = 0.0;
    FitAudit audit_lori;
    FitAudit audit_lrm;
};

struct EstimationSummary {
    double tau = 0.0;
    int n_ok = 0;
    double mean_coef_rmse_lori = 0.0, sd_coef_rmse_lori = 0.0;
    double mean_coef_rmse_glm = 0.0, sd_coef_rmse_glm = 0.0;
    double mean_rel_rmse_lori = 0.0, sd_rel_rmse_lori = 0.0;
    double mean_rel_rmse_lrm = 0.0, sd_rel_rmse_lrm = 0.0;
    double mean_rel_rmse_glm = 0.0, sd_rel_rmse_glm = 0.0;
};

struct EstimationBenchReport {
    std::vector<EstimationRow> rows;       // sorted by (tau index, rep)
    std::vector<EstimationSummary> summary;
    int n_failures = 0;
};

/// Fits LORI (QUT lambda), the main-effects GLM, and the covariate-free
/// low-rank model on reps independent datasets per spec, reporting
/// coefficient RMSE and relative RMSE of the natural-parameter matrix.
EstimationBenchReport run_estimation_benchmark(const std::vector<SimSpec>& specs,
                                               int reps,
                                               const SolverConfig& config = {});

struct ImputationRow {
    double miss_frac = 0.0;
    int rep = 0;
    bool ok = true;
    std::string error;
    double mse_lori = 0.0;      // masked-cell average squared error
    double mse_column_mean = 0.0;
    FitAudit audit_lori;
};

struct ImputationSummary {
    double miss_frac = 0.0;
    int n_ok = 0;
    double median_mse_lori = 0.0;
    double median_mse_column_mean = 0.0;
};

struct ImputationBenchReport {
    std::vector<ImputationRow> rows;
    std::vector<ImputationSummary> summary;
    int n_failures = 0;
};

/// Erases cells at each missing fraction, imputes with LORI (QUT lambda) and
/// with column means, and reports masked-cell squared-error distributions.
ImputationBenchReport run_imputation_benchmark(const SimSpec& spec,
                                               const std::vector<double>& miss_fracs,
                                               int reps,
                                               const SolverConfig& config = {});

}  // namespace lori
