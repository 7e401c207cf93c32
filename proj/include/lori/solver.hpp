#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "lori/model.hpp"
#include "lori/types.hpp"

namespace lori {

struct SolverConfig {
    double tol = 1e-6;            // relative penalized-objective change
    int max_outer_iters = 500;
    int max_backtracks = 30;
    double glm_tol = 1e-10;       // scaled by (1 + sum of observed counts)
    int glm_max_iters = 100;
    double exp_cap = kDefaultExpCap;
    std::optional<double> clamp;  // optional box constraint, off by default

    void validate() const;
};

struct FitResult {
    ModelParams params;
    double lambda = 0.0;
    std::vector<double> objective_trace;  // penalized objective, nonincreasing
    int n_iters = 0;
    bool converged = false;
    int effective_rank = 0;

    double final_objective() const { return objective_trace.back(); }
};

/// Closed-form offset update: log( sum_obs Y / sum_obs exp(s) ) where s is the
/// natural parameter without mu. Exact stationary point of the objective in mu.
double update_offset(const CountTable& table, const CovariateSet& cov,
                     const ModelParams& params, const SolverConfig& config = {});

/// Poisson GLM update of (alpha, beta) with offset mu + theta, by damped
/// Newton. Warm-started at the incoming coefficients; the returned pair never
/// increases the objective.
std::pair<Vector, Vector> update_coefficients(const CountTable& table,
                                              const CovariateSet& cov,
                                              const ModelParams& params,
                                              const SolverConfig& config = {});

/// One proximal-gradient trial for theta at step size tau:
///   candidate = svt(theta - tau * P(grad), tau * lambda)
/// where P is the double-centering projector. accepted is true when the
/// candidate's penalized objective does not exceed the current one; rejection
/// is a normal outcome and leaves theta to be retried at a smaller tau.
std::pair<Matrix, bool> update_interaction_step(const CountTable& table,
                                                const CovariateSet& cov,
                                                const ModelParams& params,
                                                double lambda, double tau,
                                                const SolverConfig& config = {});

/// Alternating minimization: offset, coefficients, then the interaction
/// proximal step with backtracking from tau = 1, until the relative change of
/// the penalized objective drops below tol. Non-convergence is reported via
/// converged = false, not an error.
FitResult fit(const CountTable& table, const CovariateSet& cov, double lambda,
              const SolverConfig& config = {},
              const std::optional<ModelParams>& init = std::nullopt);

/// Warm-started path over a strictly descending lambda grid.
std::vector<FitResult> fit_path(const CountTable& table, const CovariateSet& cov,
                                const std::vector<double>& lambdas,
                                const SolverConfig& config = {});

}  // namespace lori
