#include "lori/solver.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>

#include "lori/linalg.hpp"

namespace lori {

namespace {

// Natural parameters without the offset contribution.
Matrix params_without_mu(const ModelParams& params, const CovariateSet& cov) {
    ModelParams shifted = params;
    shifted.mu = 0.0;
    return build_natural_params(shifted, cov).x;
}

struct GlmProblem {
    // Design rows are observed cells, columns are [R_i | C_j].
    Matrix design;   // m x (K1 + K2)
    Vector counts;   // m
    Vector offset;   // m
};

GlmProblem make_glm_problem(const CountTable& table, const CovariateSet& cov) {
    const Index n = table.rows(), p = table.cols();
    const Index k1 = cov.k1(), k2 = cov.k2();
    const Index m = table.n_observed();
    GlmProblem prob;
    prob.design.resize(m, k1 + k2);
    prob.counts.resize(m);
    prob.offset.resize(m);
    Index r = 0;
    for (Index j = 0; j < p; ++j) {
        for (Index i = 0; i < n; ++i) {
            if (!table.mask(i, j)) continue;
            if (k1 > 0) prob.design.block(r, 0, 1, k1) = cov.row_cov.row(i);
            if (k2 > 0) prob.design.block(r, k1, 1, k2) = cov.col_cov.row(j);
            prob.counts(r) = table.values(i, j);
            ++r;
        }
    }
    return prob;
}

// The design depends only on the table and covariates; the offset tracks the
// current mu and theta, so path and outer-loop callers refresh it in place.
void refresh_glm_offset(GlmProblem& prob, const CountTable& table,
                        const ModelParams& params) {
    Index r = 0;
    for (Index j = 0; j < table.cols(); ++j) {
        for (Index i = 0; i < table.rows(); ++i) {
            if (!table.mask(i, j)) continue;
            prob.offset(r) = params.mu + params.theta(i, j);
            ++r;
        }
    }
}

// Returns +inf past the exp cap so exploratory steps are rejected by the
// line search instead of aborting the fit.
double glm_objective(const GlmProblem& prob, const Vector& gamma, double exp_cap) {
    const Vector eta = prob.offset + prob.design * gamma;
    double total = 0.0;
    for (Index r = 0; r < eta.size(); ++r) {
        if (eta(r) > exp_cap) return std::numeric_limits<double>::infinity();
        total += -prob.counts(r) * eta(r) + std::exp(eta(r));
    }
    return total;
}

// Damped Newton on the Poisson log-likelihood; only improving steps are taken,
// so the returned gamma never has a larger objective than the start value.
Vector solve_poisson_glm(const GlmProblem& prob, Vector gamma,
                         const SolverConfig& config) {
    const Index k = prob.design.cols();
    if (k == 0) return gamma;
    const double grad_scale = 1.0 + prob.counts.sum();
    const double tol = config.glm_tol * grad_scale;

    double obj = glm_objective(prob, gamma, config.exp_cap);
    if (!std::isfinite(obj)) {
        throw NumericError("coefficient update started past the exp cap");
    }
    for (int iter = 0; iter < config.glm_max_iters; ++iter) {
        const Vector eta = prob.offset + prob.design * gamma;
        Vector w = eta.array().exp();
        const Vector grad = prob.design.transpose() * (w - prob.counts);
        if (grad.lpNorm<Eigen::Infinity>() <= tol) return gamma;

        const Matrix hessian =
            prob.design.transpose() * w.asDiagonal() * prob.design;
        Eigen::FullPivLU<Matrix> lu(hessian);
        if (!lu.isInvertible()) {
            throw NumericError("singular information matrix in the coefficient update; "
                               "covariate columns are linearly dependent on the observed cells");
        }
        const Vector direction = lu.solve(-grad);

        double step = 1.0;
        bool improved = false;
        for (int h = 0; h < 60; ++h) {
            const Vector trial = gamma + step * direction;
            const double trial_obj = glm_objective(prob, trial, config.exp_cap);
            if (trial_obj <= obj) {
                gamma = trial;
                obj = trial_obj;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) return gamma;  // stalled at numerical precision
    }

    // Iteration budget exhausted: accept only if the gradient is merely loose,
    // otherwise report non-convergence.
    const Vector eta = prob.offset + prob.design * gamma;
    const Vector w = eta.array().exp();
    const Vector grad = prob.design.transpose() * (w - prob.counts);
    if (grad.lpNorm<Eigen::Infinity>() <= 1e-4 * grad_scale) return gamma;
    throw NumericError("Poisson GLM did not converge within " +
                       std::to_string(config.glm_max_iters) + " iterations");
}

}  // namespace

void SolverConfig::validate() const {
    if (tol <= 0.0 || glm_tol <= 0.0) throw ValidationError("solver tolerances must be positive");
    if (max_outer_iters < 1 || max_backtracks < 1 || glm_max_iters < 1)
        throw ValidationError("solver iteration caps must be at least 1");
    if (exp_cap <= 0.0) throw ValidationError("exp cap must be positive");
}

double update_offset(const CountTable& table, const CovariateSet& cov,
                     const ModelParams& params, const SolverConfig&) {
    require_dims(table, cov, params);
    const double total = table.observed_sum();
    if (total <= 0.0) {
        throw NumericError("all observed counts are zero; the offset is degenerate");
    }
    // log(total / sum_obs exp(s)) via log-sum-exp; s alone may sit far above
    // the natural parameters when mu is negative, so it is not cap-checked
    // here (the updated x is bounded by log(total) regardless).
    const Matrix s = params_without_mu(params, cov);
    double s_max = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < table.cols(); ++j)
        for (Index i = 0; i < table.rows(); ++i)
            if (table.mask(i, j)) s_max = std::max(s_max, s(i, j));
    double scaled = 0.0;
    for (Index j = 0; j < table.cols(); ++j)
        for (Index i = 0; i < table.rows(); ++i)
            if (table.mask(i, j)) scaled += std::exp(s(i, j) - s_max);
    return std::log(total) - s_max - std::log(scaled);
}

namespace {

std::pair<Vector, Vector> update_coefficients_cached(GlmProblem& prob,
                                                     const CountTable& table,
                                                     const CovariateSet& cov,
                                                     const ModelParams& params,
                                                     const SolverConfig& config) {
    const Index k1 = cov.k1(), k2 = cov.k2();
    if (k1 + k2 >= table.n_observed()) {
        throw ValidationError("covariate count " + std::to_string(k1 + k2) +
                              " must be smaller than the number of observed cells " +
                              std::to_string(table.n_observed()));
    }
    refresh_glm_offset(prob, table, params);
    Vector gamma(k1 + k2);
    gamma << params.alpha, params.beta;
    gamma = solve_poisson_glm(prob, gamma, config);
    return {gamma.head(k1), gamma.tail(k2)};
}

}  // namespace

std::pair<Vector, Vector> update_coefficients(const CountTable& table,
                                              const CovariateSet& cov,
                                              const ModelParams& params,
                                              const SolverConfig& config) {
    require_dims(table, cov, params);
    if (cov.k1() + cov.k2() == 0) return {Vector(0), Vector(0)};
    GlmProblem prob = make_glm_problem(table, cov);
    return update_coefficients_cached(prob, table, cov, params, config);
}

namespace {

struct InteractionTrial {
    Matrix theta;
    double penalized = 0.0;  // meaningful only when feasible
    double nuclear = 0.0;
    bool feasible = false;   // candidate stayed under the exp cap
};

// Proximal step on tau * lambda * ||.||_*; the threshold scales with tau so
// every halved step still solves the same penalized problem. The projected
// gradient is constant across the backtracking loop, so the caller computes
// it once.
InteractionTrial try_interaction_step(const CountTable& table, const CovariateSet& cov,
                                      const ModelParams& params, const Matrix& proj_grad,
                                      double lambda, double tau,
                                      const SolverConfig& config) {
    InteractionTrial trial;
    const SvdFactors f = svd_thin(params.theta - tau * proj_grad);
    const Vector shrunk = (f.s.array() - tau * lambda).max(0.0);
    trial.nuclear = shrunk.sum();
    if (trial.nuclear == 0.0) {
        trial.theta = Matrix::Zero(params.theta.rows(), params.theta.cols());
    } else {
        trial.theta = f.u * shrunk.asDiagonal() * f.v.transpose();
    }
    ModelParams candidate_params = params;
    candidate_params.theta = trial.theta;
    try {
        trial.penalized =
            data_fit(table, build_natural_params(candidate_params, cov, config.clamp),
                     config.exp_cap) +
            lambda * trial.nuclear;
        trial.feasible = true;
    } catch (const NumericError&) {
        trial.feasible = false;  // broke the exp cap; caller shrinks tau
    }
    return trial;
}

}  // namespace

std::pair<Matrix, bool> update_interaction_step(const CountTable& table,
                                                const CovariateSet& cov,
                                                const ModelParams& params,
                                                double lambda, double tau,
                                                const SolverConfig& config) {
    require_dims(table, cov, params);
    if (tau <= 0.0) throw ValidationError("step size tau must be positive");
    if (lambda < 0.0) throw ValidationError("lambda must be nonnegative");

    const NaturalParamMatrix x = build_natural_params(params, cov, config.clamp);
    const Matrix proj_grad =
        interaction_projector(data_fit_gradient(table, x, config.exp_cap));
    const InteractionTrial trial =
        try_interaction_step(table, cov, params, proj_grad, lambda, tau, config);
    const double current = penalized_objective(table, params, cov, lambda, config.exp_cap);
    return {trial.theta, trial.feasible && trial.penalized <= current};
}

FitResult fit(const CountTable& table, const CovariateSet& cov, double lambda,
              const SolverConfig& config, const std::optional<ModelParams>& init) {
    config.validate();
    if (lambda < 0.0) throw ValidationError("lambda must be nonnegative");
    table.require_coverage();

    ModelParams params = init ? *init
                              : ModelParams::zeros(table.rows(), table.cols(),
                                                   cov.k1(), cov.k2());
    require_dims(table, cov, params);
    if (init) params.theta = interaction_projector(params.theta);  // keep feasible

    FitResult result;
    result.lambda = lambda;

    const auto fit_term = [&](const ModelParams& state) {
        return data_fit(table, build_natural_params(state, cov, config.clamp),
                        config.exp_cap);
    };
    double theta_nuclear = nuclear_norm(params.theta);
    double objective = fit_term(params) + lambda * theta_nuclear;
    result.objective_trace.push_back(objective);

    GlmProblem glm_problem;
    if (cov.k1() + cov.k2() > 0) glm_problem = make_glm_problem(table, cov);

    bool converged = false;
    int iter = 0;
    for (; iter < config.max_outer_iters; ++iter) {
        // Offset: closed form, but guarded so the cached objective never grows.
        {
            ModelParams trial = params;
            trial.mu = update_offset(table, cov, params, config);
            const double trial_obj = fit_term(trial) + lambda * theta_nuclear;
            if (trial_obj <= objective) {
                params = std::move(trial);
                objective = trial_obj;
            }
        }

        if (cov.k1() + cov.k2() > 0) {
            ModelParams trial = params;
            std::tie(trial.alpha, trial.beta) =
                update_coefficients_cached(glm_problem, table, cov, params, config);
            const double trial_obj = fit_term(trial) + lambda * theta_nuclear;
            if (trial_obj <= objective) {
                params = std::move(trial);
                objective = trial_obj;
            }
        }

        {
            const NaturalParamMatrix x = build_natural_params(params, cov, config.clamp);
            const Matrix proj_grad =
                interaction_projector(data_fit_gradient(table, x, config.exp_cap));
            double tau = 1.0;
            for (int bt = 0; bt <= config.max_backtracks; ++bt) {
                const InteractionTrial trial =
                    try_interaction_step(table, cov, params, proj_grad, lambda, tau, config);
                if (trial.feasible && trial.penalized <= objective) {
                    params.theta = trial.theta;
                    objective = trial.penalized;
                    theta_nuclear = trial.nuclear;
                    break;
                }
                tau *= 0.5;
            }
        }

        const double previous = result.objective_trace.back();
        result.objective_trace.push_back(objective);
        const double rel_change = (previous - objective) / (std::abs(previous) + 1.0);
        if (rel_change <= config.tol) {
            converged = true;
            ++iter;
            break;
        }
    }

    result.params = std::move(params);
    result.n_iters = iter;
    result.converged = converged;
    result.effective_rank = effective_rank(result.params.theta);
    return result;
}

std::vector<FitResult> fit_path(const CountTable& table, const CovariateSet& cov,
                                const std::vector<double>& lambdas,
                                const SolverConfig& config) {
    if (lambdas.empty()) throw ValidationError("lambda grid is empty");
    for (std::size_t i = 1; i < lambdas.size(); ++i) {
        if (!(lambdas[i] < lambdas[i - 1])) {
            throw ValidationError("lambda grid must be strictly descending");
        }
    }
    std::vector<FitResult> results;
    results.reserve(lambdas.size());
    std::optional<ModelParams> warm;
    for (const double lambda : lambdas) {
        results.push_back(fit(table, cov, lambda, config, warm));
        warm = results.back().params;
    }
    return results;
}

}  // namespace lori
