#include <doctest.h>

#include <cmath>

#include "lori/lambda_select.hpp"
#include "lori/linalg.hpp"
#include "lori/solver.hpp"
#include "test_util.hpp"

using namespace lori;

namespace {

CountTable table_from(const Matrix& values) {
    return CountTable(values, Mask::Constant(values.rows(), values.cols(), true));
}

SolverConfig tight_config() {
    SolverConfig config;
    config.tol = 1e-13;
    config.max_outer_iters = 5000;
    return config;
}

double offset_partial(const CountTable& table, const CovariateSet& cov,
                      const ModelParams& params) {
    const Matrix x = build_natural_params(params, cov).x;
    double g = 0.0;
    for (Index j = 0; j < table.cols(); ++j)
        for (Index i = 0; i < table.rows(); ++i)
            if (table.mask(i, j)) g += -table.values(i, j) + std::exp(x(i, j));
    return g;
}

}  // namespace

TEST_CASE("update_offset closed form") {
    Matrix y(2, 2);
    y << 1, 3, 2, 2;
    const CountTable t = table_from(y);
    const ModelParams params = ModelParams::zeros(2, 2, 0, 0);
    CHECK(update_offset(t, CovariateSet{}, params) == doctest::Approx(std::log(2.0)));

    const CountTable constant = table_from(Matrix::Constant(3, 4, 5.0));
    CHECK(update_offset(constant, CovariateSet{}, ModelParams::zeros(3, 4, 0, 0)) ==
          doctest::Approx(std::log(5.0)));
}

TEST_CASE("update_offset stationarity and degenerate input") {
    Rng rng(61);
    const CountTable t = testutil::random_table(rng, 6, 5, 1.2, 0.2);
    const CovariateSet cov = testutil::random_covariates(rng, 6, 5, 2, 1);
    ModelParams params = ModelParams::zeros(6, 5, 2, 1);
    params.alpha << 0.3, -0.2;
    params.beta << 0.4;
    params.theta = interaction_projector(testutil::random_matrix(rng, 6, 5, 0.2));
    params.mu = update_offset(t, cov, params);
    CHECK(std::abs(offset_partial(t, cov, params)) <= 1e-10 * (1.0 + t.observed_sum()));

    Matrix zeros(2, 2);
    zeros.setZero();
    const CountTable all_zero = table_from(zeros);
    CHECK_THROWS_AS(update_offset(all_zero, CovariateSet{}, ModelParams::zeros(2, 2, 0, 0)),
                    NumericError);
}

TEST_CASE("update_offset: large interaction with a negative offset stays in range") {
    // s = theta alone can sit far above the exp cap as long as mu + s does not.
    const CountTable t = table_from(Matrix::Ones(3, 3));
    ModelParams params = ModelParams::zeros(3, 3, 0, 0);
    params.theta(0, 0) = 31.0;
    const double mu = update_offset(t, CovariateSet{}, params);
    params.mu = mu;
    const Matrix x = build_natural_params(params, CovariateSet{}).x;
    CHECK(x.maxCoeff() <= 30.0);
    CHECK(std::isfinite(data_fit(t, NaturalParamMatrix{x})));
    // Stationarity still holds.
    double g = 0.0;
    for (Index j = 0; j < 3; ++j)
        for (Index i = 0; i < 3; ++i) g += -t.values(i, j) + std::exp(x(i, j));
    CHECK(std::abs(g) <= 1e-9);
}

TEST_CASE("update_coefficients: no covariates is a no-op") {
    Rng rng(67);
    const CountTable t = testutil::random_table(rng, 4, 3, 1.0);
    const auto [alpha, beta] =
        update_coefficients(t, CovariateSet{}, ModelParams::zeros(4, 3, 0, 0));
    CHECK(alpha.size() == 0);
    CHECK(beta.size() == 0);
}

TEST_CASE("update_coefficients: offset explains everything") {
    Rng rng(71);
    const double offset = 1.3;
    const Index n = 30, p = 10;
    Matrix y(n, p);
    const double rate = std::round(std::exp(offset));
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < n; ++i) y(i, j) = rate;
    const CountTable t = table_from(y);
    const CovariateSet cov = testutil::random_covariates(rng, n, p, 2, 2);
    ModelParams params = ModelParams::zeros(n, p, 2, 2);
    params.mu = std::log(rate);
    const auto [alpha, beta] = update_coefficients(t, cov, params);
    CHECK(alpha.lpNorm<Eigen::Infinity>() <= 1e-3);
    CHECK(beta.lpNorm<Eigen::Infinity>() <= 1e-3);
}

TEST_CASE("update_coefficients matches a derivative-free convex minimizer") {
    Rng rng(73);
    const Index n = 20, p = 5;
    const CovariateSet cov = testutil::random_covariates(rng, n, p, 1, 0);
    Matrix y(n, p);
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < n; ++i)
            y(i, j) = static_cast<double>(
                rng.poisson(std::exp(0.5 + 0.8 * cov.row_cov(i, 0))));
    const CountTable t(y, Mask::Constant(n, p, true));
    ModelParams params = ModelParams::zeros(n, p, 1, 0);
    params.mu = 0.5;
    const auto [alpha, beta] = update_coefficients(t, cov, params);

    const auto objective = [&](const Eigen::VectorXd& gamma) {
        ModelParams trial = params;
        trial.alpha(0) = gamma(0);
        return data_fit(t, build_natural_params(trial, cov));
    };
    const Eigen::VectorXd oracle =
        testutil::coordinate_minimize(objective, Eigen::VectorXd::Zero(1), 4.0, 60);
    CHECK(std::abs(alpha(0) - oracle(0)) <= 1e-5);
}

TEST_CASE("update_coefficients rejects too many covariates and rank deficiency") {
    Rng rng(79);
    Matrix y(2, 2);
    y << 1, 2, 3, 4;
    const CountTable t = table_from(y);
    CovariateSet wide = testutil::random_covariates(rng, 2, 2, 2, 2);
    CHECK_THROWS_AS(update_coefficients(t, wide, ModelParams::zeros(2, 2, 2, 2)),
                    ValidationError);

    // Duplicated covariate column makes the information matrix singular.
    const Index n = 10, p = 4;
    CovariateSet dup = testutil::random_covariates(rng, n, p, 1, 0);
    CovariateSet bad;
    bad.row_cov = Matrix(n, 2);
    bad.row_cov.col(0) = dup.row_cov.col(0);
    bad.row_cov.col(1) = dup.row_cov.col(0);
    const CountTable t2 = testutil::random_table(rng, n, p, 1.0);
    CHECK_THROWS_AS(update_coefficients(t2, bad, ModelParams::zeros(n, p, 2, 0)),
                    NumericError);
}

TEST_CASE("update_interaction_step: thresholding kills the step at tau=1") {
    Rng rng(83);
    const CountTable t = testutil::random_table(rng, 5, 4, 1.0);
    ModelParams params = ModelParams::zeros(5, 4, 0, 0);
    params.mu = update_offset(t, CovariateSet{}, params);
    const Matrix grad = interaction_projector(
        data_fit_gradient(t, build_natural_params(params, CovariateSet{})));
    const double lambda = operator_norm(grad) * 1.01;
    const auto [theta, accepted] =
        update_interaction_step(t, CovariateSet{}, params, lambda, 1.0);
    CHECK(theta.isZero(0.0));
    CHECK(accepted);
}

TEST_CASE("update_interaction_step never increases the objective when accepted") {
    Rng rng(89);
    for (int trial = 0; trial < 10; ++trial) {
        const CountTable t = testutil::random_table(rng, 5, 4, 1.0, 0.2);
        ModelParams params = ModelParams::zeros(5, 4, 0, 0);
        params.mu = update_offset(t, CovariateSet{}, params);
        params.theta = interaction_projector(testutil::random_matrix(rng, 5, 4, 0.3));
        const double lambda = 0.5;
        const double before = penalized_objective(t, params, CovariateSet{}, lambda);
        double tau = 1.0;
        bool accepted = false;
        SolverConfig config;
        for (int bt = 0; bt <= config.max_backtracks && !accepted; ++bt) {
            auto [theta, ok] =
                update_interaction_step(t, CovariateSet{}, params, lambda, tau);
            if (ok) {
                ModelParams next = params;
                next.theta = theta;
                CHECK(penalized_objective(t, next, CovariateSet{}, lambda) <=
                      before + 1e-10);
                accepted = true;
            }
            tau *= 0.5;
        }
        CHECK(accepted);
    }
}

TEST_CASE("fit: huge lambda reduces to the constant model without covariates") {
    Rng rng(97);
    const CountTable t = testutil::random_table(rng, 8, 5, 1.0);
    const FitResult result = fit(t, CovariateSet{}, 1e6, tight_config());
    const double mean = t.observed_sum() / static_cast<double>(t.n_observed());
    CHECK(result.params.theta.isZero(0.0));
    CHECK(result.params.mu == doctest::Approx(std::log(mean)));
    CHECK(result.converged);
}

TEST_CASE("fit at lambda above the null threshold matches the main-effects fit") {
    Rng rng(101);
    for (int trial = 0; trial < 4; ++trial) {
        const bool with_cov = trial % 2 == 0;
        const CountTable t = testutil::random_table(rng, 10, 6, 1.0, trial >= 2 ? 0.25 : 0.0);
        const CovariateSet cov = with_cov
                                     ? testutil::random_covariates(rng, 10, 6, 2, 1)
                                     : CovariateSet{};
        const SolverConfig config = tight_config();
        const double lambda0 = null_threshold_stat(t, cov, config);
        const FitResult result = fit(t, cov, lambda0 * 1.000001, config);
        CHECK(nuclear_norm(result.params.theta) <= 1e-8);
        const ModelParams null_fit = fit_null_model(t, cov, config);
        CHECK(std::abs(result.params.mu - null_fit.mu) <= 1e-6);
        if (with_cov) {
            CHECK((result.params.alpha - null_fit.alpha).lpNorm<Eigen::Infinity>() <= 1e-6);
            CHECK((result.params.beta - null_fit.beta).lpNorm<Eigen::Infinity>() <= 1e-6);
        }
    }
}

TEST_CASE("fit: null-threshold phase transition on random instances") {
    Rng rng(103);
    for (int trial = 0; trial < 8; ++trial) {
        const Index n = 5 + static_cast<Index>(rng.uniform_int(10));
        const Index p = 4 + static_cast<Index>(rng.uniform_int(5));
        const bool with_cov = rng.bernoulli(0.5);
        const double miss = rng.bernoulli(0.5) ? 0.25 : 0.0;
        const CountTable t = testutil::random_table(rng, n, p, 1.0, miss);
        const CovariateSet cov =
            with_cov ? testutil::random_covariates(rng, n, p, 2, 1) : CovariateSet{};
        const SolverConfig config = tight_config();
        const double lambda0 = null_threshold_stat(t, cov, config);
        if (lambda0 <= 1e-8) continue;  // degenerate draw, nothing to test
        const FitResult above = fit(t, cov, lambda0 * 1.000001, config);
        CHECK(nuclear_norm(above.params.theta) <= 1e-8);
        const FitResult below = fit(t, cov, lambda0 * 0.9, config);
        CHECK(nuclear_norm(below.params.theta) > 1e-6);
    }
}

TEST_CASE("fit: trace is nonincreasing and theta stays doubly centered") {
    Rng rng(107);
    const CountTable t = testutil::random_table(rng, 12, 7, 1.3, 0.3);
    const CovariateSet cov = testutil::random_covariates(rng, 12, 7, 2, 2);
    const double lambda0 = null_threshold_stat(t, cov);
    const FitResult result = fit(t, cov, 0.3 * lambda0);
    for (std::size_t k = 1; k < result.objective_trace.size(); ++k) {
        CHECK(result.objective_trace[k] <= result.objective_trace[k - 1] + 1e-10);
    }
    CHECK(result.params.theta.rowwise().sum().lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(result.params.theta.colwise().sum().lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK(nuclear_norm(result.params.theta) > 0.0);
}

TEST_CASE("fit_path: warm starts agree with cold starts and grow the interaction") {
    Rng rng(109);
    const CountTable t = testutil::random_table(rng, 12, 7, 1.3);
    const CovariateSet cov = testutil::random_covariates(rng, 12, 7, 2, 1);
    const double lambda0 = null_threshold_stat(t, cov);

    SUBCASE("single point at 1.01 * lambda0") {
        const auto path = fit_path(t, cov, {lambda0 * 1.01});
        REQUIRE(path.size() == 1);
        CHECK(path[0].params.theta.isZero(0.0));
    }

    SUBCASE("descending grid") {
        std::vector<double> grid;
        for (double f : {1.01, 0.7, 0.45, 0.25, 0.12}) grid.push_back(lambda0 * f);
        const auto path = fit_path(t, cov, grid);
        REQUIRE(path.size() == grid.size());
        for (std::size_t g = 1; g < path.size(); ++g) {
            CHECK(nuclear_norm(path[g].params.theta) >=
                  nuclear_norm(path[g - 1].params.theta) - 1e-8);
        }
        for (std::size_t g = 0; g < path.size(); ++g) {
            const FitResult cold = fit(t, cov, grid[g]);
            const double rel = std::abs(path[g].final_objective() - cold.final_objective()) /
                               (1.0 + std::abs(cold.final_objective()));
            CHECK(rel <= 1e-4);
        }
    }

    SUBCASE("unsorted grid is rejected") {
        CHECK_THROWS_AS(fit_path(t, cov, {1.0, 2.0}), ValidationError);
        CHECK_THROWS_AS(fit_path(t, cov, {}), ValidationError);
    }
}

TEST_CASE("fit rejects degenerate coverage") {
    Matrix y(2, 2);
    y << 1, 2, 3, 4;
    Mask mask(2, 2);
    mask << true, true, false, false;  // second row fully missing
    const CountTable t(y, mask);
    CHECK_THROWS_AS(fit(t, CovariateSet{}, 1.0), ValidationError);
}
