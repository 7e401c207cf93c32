#include "lori/lambda_select.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "lori/linalg.hpp"
#include "lori/parallel.hpp"
#include "lori/rng.hpp"

namespace lori {

namespace {

double glm_objective_full(const Matrix& design, const Vector& counts,
                          const Vector& gamma, double exp_cap) {
    const Vector eta = design * gamma;
    double total = 0.0;
    for (Index r = 0; r < eta.size(); ++r) {
        if (eta(r) > exp_cap) return std::numeric_limits<double>::infinity();
        total += -counts(r) * eta(r) + std::exp(eta(r));
    }
    return total;
}

// Joint damped Newton over [intercept | alpha | beta].
Vector solve_null_glm(const Matrix& design, const Vector& counts,
                      const SolverConfig& config) {
    const Index k = design.cols();
    Vector gamma = Vector::Zero(k);
    // Start the intercept at the log mean count; exact optimum when k == 1.
    const double mean = counts.mean();
    gamma(0) = mean > 0.0 ? std::log(mean) : 0.0;

    const double tol = config.glm_tol * (1.0 + counts.sum());
    double obj = glm_objective_full(design, counts, gamma, config.exp_cap);
    for (int iter = 0; iter < config.glm_max_iters; ++iter) {
        const Vector eta = design * gamma;
        const Vector w = eta.array().exp();
        const Vector grad = design.transpose() * (w - counts);
        if (grad.lpNorm<Eigen::Infinity>() <= tol) return gamma;
        const Matrix hessian = design.transpose() * w.asDiagonal() * design;
        Eigen::FullPivLU<Matrix> lu(hessian);
        if (!lu.isInvertible()) {
            throw NumericError("singular information matrix in the null-model fit");
        }
        const Vector direction = lu.solve(-grad);
        double step = 1.0;
        bool improved = false;
        for (int h = 0; h < 60; ++h) {
            const Vector trial = gamma + step * direction;
            const double trial_obj = glm_objective_full(design, counts, trial, config.exp_cap);
            if (trial_obj <= obj) {
                gamma = trial;
                obj = trial_obj;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if (!improved) return gamma;
    }
    const Vector eta = design * gamma;
    const Vector w = eta.array().exp();
    const Vector grad = design.transpose() * (w - counts);
    if (grad.lpNorm<Eigen::Infinity>() <= 1e-4 * (1.0 + counts.sum())) return gamma;
    throw NumericError("null-model fit did not converge");
}

struct NullDesign {
    Matrix design;  // m x (1 + K1 + K2)
    Vector counts;
};

NullDesign make_null_design(const CountTable& table, const CovariateSet& cov) {
    const Index n = table.rows(), p = table.cols();
    const Index k1 = cov.k1(), k2 = cov.k2();
    const Index m = table.n_observed();
    if (1 + k1 + k2 > m) {
        throw ValidationError("too few observed cells for the main-effects fit");
    }
    NullDesign nd;
    nd.design.resize(m, 1 + k1 + k2);
    nd.counts.resize(m);
    Index r = 0;
    for (Index j = 0; j < p; ++j) {
        for (Index i = 0; i < n; ++i) {
            if (!table.mask(i, j)) continue;
            nd.design(r, 0) = 1.0;
            if (k1 > 0) nd.design.block(r, 1, 1, k1) = cov.row_cov.row(i);
            if (k2 > 0) nd.design.block(r, 1 + k1, 1, k2) = cov.col_cov.row(j);
            nd.counts(r) = table.values(i, j);
            ++r;
        }
    }
    return nd;
}

double upper_quantile(std::vector<double> values, double epsilon) {
    std::sort(values.begin(), values.end());
    const auto b = static_cast<long>(values.size());
    long k = static_cast<long>(std::ceil((1.0 - epsilon) * static_cast<double>(b)));
    k = std::max<long>(1, std::min(k, b));
    return values[static_cast<std::size_t>(k - 1)];
}

}  // namespace

ModelParams fit_null_model(const CountTable& table, const CovariateSet& cov,
                           const SolverConfig& config) {
    config.validate();
    if (table.observed_sum() <= 0.0) {
        throw NumericError("all observed counts are zero; the null model is degenerate");
    }
    const NullDesign nd = make_null_design(table, cov);
    const Vector gamma = solve_null_glm(nd.design, nd.counts, config);
    ModelParams params = ModelParams::zeros(table.rows(), table.cols(), cov.k1(), cov.k2());
    params.mu = gamma(0);
    params.alpha = gamma.segment(1, cov.k1());
    params.beta = gamma.tail(cov.k2());
    return params;
}

double null_threshold_stat(const CountTable& table, const CovariateSet& cov,
                           const SolverConfig& config) {
    const ModelParams null_params = fit_null_model(table, cov, config);
    const NaturalParamMatrix x = build_natural_params(null_params, cov);
    const Matrix grad = data_fit_gradient(table, x, config.exp_cap);
    // The threshold acts on the interaction space, so the gradient is
    // double-centered before taking its operator norm; for a gradient that is
    // already doubly centered this is the plain operator norm.
    return operator_norm(interaction_projector(grad));
}

SelectionReport qut_select(const CountTable& table, const CovariateSet& cov,
                           const SolverConfig& config, double epsilon,
                           int n_bootstrap, std::uint64_t seed) {
    if (!(epsilon > 0.0 && epsilon < 1.0))
        throw ValidationError("epsilon must lie strictly between 0 and 1");
    if (n_bootstrap < 20) throw ValidationError("QUT needs at least 20 bootstrap replicates");

    const ModelParams null_params = fit_null_model(table, cov, config);
    const Matrix means = build_natural_params(null_params, cov).x.array().exp();

    std::vector<double> stats(static_cast<std::size_t>(n_bootstrap),
                              std::numeric_limits<double>::quiet_NaN());
    std::vector<std::string> failures(static_cast<std::size_t>(n_bootstrap));
    parallel_for(static_cast<std::size_t>(n_bootstrap), [&](std::size_t b) {
        Rng rng = Rng::for_stream(seed, b);
        Matrix values = Matrix::Zero(table.rows(), table.cols());
        for (Index j = 0; j < table.cols(); ++j)
            for (Index i = 0; i < table.rows(); ++i)
                if (table.mask(i, j))
                    values(i, j) = static_cast<double>(rng.poisson(means(i, j)));
        try {
            const CountTable replicate(values, table.mask);
            stats[b] = null_threshold_stat(replicate, cov, config);
        } catch (const Error& e) {
            failures[b] = e.what();
        }
    });

    SelectionReport report;
    report.method = SelectionMethod::qut;
    report.epsilon = epsilon;
    report.seed = seed;
    report.lambda0 = null_threshold_stat(table, cov, config);

    std::vector<double> ok_stats;
    ok_stats.reserve(stats.size());
    for (std::size_t b = 0; b < stats.size(); ++b) {
        if (std::isnan(stats[b])) {
            ++report.n_failures;
        } else {
            ok_stats.push_back(stats[b]);
        }
    }
    if (report.n_failures * 10 > n_bootstrap) {
        std::string first;
        for (const auto& f : failures)
            if (!f.empty()) {
                first = f;
                break;
            }
        throw NumericError("more than 10% of bootstrap replicates failed (" +
                           std::to_string(report.n_failures) + "/" +
                           std::to_string(n_bootstrap) + "); first failure: " + first);
    }
    report.bootstrap_stats = stats;  // NaN marks the failed replicates
    report.chosen_lambda = upper_quantile(std::move(ok_stats), epsilon);
    if (!(report.chosen_lambda > 0.0)) {
        throw NumericError("QUT selected a nonpositive lambda; the null distribution is degenerate");
    }
    return report;
}

IndependenceTest independence_test(const CountTable& table, const CovariateSet& cov,
                                   const SolverConfig& config, double epsilon,
                                   int n_bootstrap, std::uint64_t seed) {
    const SelectionReport report = qut_select(table, cov, config, epsilon, n_bootstrap, seed);
    IndependenceTest test;
    test.lambda0 = report.lambda0;
    test.threshold = report.chosen_lambda;
    test.reject = report.lambda0 > report.chosen_lambda;
    return test;
}

SelectionReport cross_validate(const CountTable& table, const CovariateSet& cov,
                               const std::vector<double>& lambdas,
                               double erase_fraction, int n_folds,
                               const SolverConfig& config, std::uint64_t seed) {
    if (!(erase_fraction > 0.0 && erase_fraction < 1.0))
        throw ValidationError("erase fraction must lie strictly between 0 and 1");
    if (n_folds < 1) throw ValidationError("cross-validation needs at least one fold");
    if (lambdas.empty()) throw ValidationError("lambda grid is empty");
    for (std::size_t i = 1; i < lambdas.size(); ++i)
        if (!(lambdas[i] < lambdas[i - 1]))
            throw ValidationError("lambda grid must be strictly descending");
    table.require_coverage();

    struct Cell {
        Index i, j;
    };
    std::vector<Cell> observed;
    for (Index j = 0; j < table.cols(); ++j)
        for (Index i = 0; i < table.rows(); ++i)
            if (table.mask(i, j)) observed.push_back({i, j});
    const auto n_hide = static_cast<std::size_t>(
        std::floor(erase_fraction * static_cast<double>(observed.size())));
    if (n_hide == 0)
        throw ValidationError("erase fraction hides no cells at this table size");

    Matrix errors(n_folds, static_cast<Index>(lambdas.size()));
    parallel_for(static_cast<std::size_t>(n_folds), [&](std::size_t fold) {
        Rng rng = Rng::for_stream(seed, fold);
        Mask fold_mask;
        bool feasible = false;
        // Uniform random erasure, redrawn until every row and column keeps
        // at least one observed cell.
        for (int attempt = 0; attempt < 1000 && !feasible; ++attempt) {
            std::vector<std::size_t> order(observed.size());
            for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
            for (std::size_t k = order.size(); k > 1; --k) {
                std::swap(order[k - 1], order[rng.uniform_int(k)]);
            }
            fold_mask = table.mask;
            for (std::size_t k = 0; k < n_hide; ++k) {
                const Cell c = observed[order[k]];
                fold_mask(c.i, c.j) = false;
            }
            feasible = true;
            for (Index i = 0; i < table.rows() && feasible; ++i)
                if (!fold_mask.row(i).any()) feasible = false;
            for (Index j = 0; j < table.cols() && feasible; ++j)
                if (!fold_mask.col(j).any()) feasible = false;
        }
        if (!feasible) {
            throw ValidationError("could not build a cross-validation fold keeping every "
                                  "row and column observed; lower the erase fraction");
        }
        const CountTable fold_table(table.values, fold_mask, table.row_names,
                                    table.col_names);
        const std::vector<FitResult> path = fit_path(fold_table, cov, lambdas, config);
        for (std::size_t g = 0; g < lambdas.size(); ++g) {
            const Matrix xhat = build_natural_params(path[g].params, cov).x;
            double sse = 0.0;
            std::size_t count = 0;
            for (Index j = 0; j < table.cols(); ++j) {
                for (Index i = 0; i < table.rows(); ++i) {
                    if (!table.mask(i, j) || fold_mask(i, j)) continue;
                    const double diff = std::exp(xhat(i, j)) - table.values(i, j);
                    sse += diff * diff;
                    ++count;
                }
            }
            errors(static_cast<Index>(fold), static_cast<Index>(g)) =
                sse / static_cast<double>(count);
        }
    });

    SelectionReport report;
    report.method = SelectionMethod::cv;
    report.seed = seed;
    report.epsilon = erase_fraction;
    Index best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (Index g = 0; g < errors.cols(); ++g) {
        const double mean_err = errors.col(g).mean();
        if (!std::isfinite(mean_err)) {
            throw NumericError("cross-validation produced a non-finite held-out error");
        }
        report.cv_grid.emplace_back(lambdas[static_cast<std::size_t>(g)], mean_err);
        if (mean_err < best_err) {  // ties keep the earlier, larger lambda
            best_err = mean_err;
            best = g;
        }
    }
    report.chosen_lambda = lambdas[static_cast<std::size_t>(best)];
    return report;
}

}  // namespace lori
