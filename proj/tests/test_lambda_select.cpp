#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "lori/lambda_select.hpp"
#include "lori/linalg.hpp"
#include "lori/simbench.hpp"
#include "test_util.hpp"

using namespace lori;

namespace {

CountTable table_from(const Matrix& values) {
    return CountTable(values, Mask::Constant(values.rows(), values.cols(), true));
}

}  // namespace

TEST_CASE("fit_null_model: constant table without covariates") {
    const CountTable t = table_from(Matrix::Constant(4, 3, 7.0));
    const ModelParams params = fit_null_model(t, CovariateSet{});
    CHECK(params.mu == doctest::Approx(std::log(7.0)));
    CHECK(params.theta.isZero(0.0));
}

TEST_CASE("fit_null_model equals fit at enormous lambda") {
    Rng rng(113);
    const CountTable t = testutil::random_table(rng, 9, 6, 1.1, 0.2);
    const CovariateSet cov = testutil::random_covariates(rng, 9, 6, 2, 1);
    SolverConfig config;
    config.tol = 1e-13;
    config.max_outer_iters = 4000;
    const ModelParams null_fit = fit_null_model(t, cov, config);
    const FitResult solver_fit = fit(t, cov, 1e9, config);
    CHECK(std::abs(null_fit.mu - solver_fit.params.mu) <= 1e-8);
    CHECK((null_fit.alpha - solver_fit.params.alpha).lpNorm<Eigen::Infinity>() <= 1e-8);
    CHECK((null_fit.beta - solver_fit.params.beta).lpNorm<Eigen::Infinity>() <= 1e-8);
}

TEST_CASE("fit_null_model matches a derivative-free convex minimizer") {
    Rng rng(127);
    const Index n = 10, p = 5;
    const CovariateSet cov = testutil::random_covariates(rng, n, p, 1, 1);
    Matrix y(n, p);
    for (Index j = 0; j < p; ++j)
        for (Index i = 0; i < n; ++i)
            y(i, j) = static_cast<double>(rng.poisson(
                std::exp(0.7 + 0.5 * cov.row_cov(i, 0) - 0.4 * cov.col_cov(j, 0))));
    const CountTable t(y, Mask::Constant(n, p, true));
    const ModelParams fitted = fit_null_model(t, cov);

    const auto objective = [&](const Eigen::VectorXd& gamma) {
        ModelParams trial = ModelParams::zeros(n, p, 1, 1);
        trial.mu = gamma(0);
        trial.alpha(0) = gamma(1);
        trial.beta(0) = gamma(2);
        return data_fit(t, build_natural_params(trial, cov));
    };
    const Eigen::VectorXd oracle =
        testutil::coordinate_minimize(objective, Eigen::VectorXd::Zero(3), 4.0, 80);
    CHECK(std::abs(fitted.mu - oracle(0)) <= 1e-5);
    CHECK(std::abs(fitted.alpha(0) - oracle(1)) <= 1e-5);
    CHECK(std::abs(fitted.beta(0) - oracle(2)) <= 1e-5);
}

TEST_CASE("null_threshold_stat: worked examples") {
    const CountTable constant = table_from(Matrix::Constant(3, 4, 6.0));
    CHECK(null_threshold_stat(constant, CovariateSet{}) <= 1e-10);

    Matrix y(2, 2);
    y << 1, 3, 3, 1;
    // Null fit is mu = log 2; the gradient is [[1,-1],[-1,1]], already doubly
    // centered, with operator norm 2.
    CHECK(null_threshold_stat(table_from(y), CovariateSet{}) == doctest::Approx(2.0));
}

TEST_CASE("null_threshold_stat formula recomputation") {
    Rng rng(131);
    const CountTable t = testutil::random_table(rng, 8, 5, 1.2, 0.25);
    const CovariateSet cov = testutil::random_covariates(rng, 8, 5, 2, 1);
    const double stat = null_threshold_stat(t, cov);
    // Independent recomputation through raw Eigen calls.
    const ModelParams null_fit = fit_null_model(t, cov);
    Matrix grad = Matrix::Zero(8, 5);
    const Matrix x = build_natural_params(null_fit, cov).x;
    for (Index j = 0; j < 5; ++j)
        for (Index i = 0; i < 8; ++i)
            if (t.mask(i, j)) grad(i, j) = -t.values(i, j) + std::exp(x(i, j));
    const Vector rm = grad.rowwise().mean();
    const Eigen::RowVectorXd cm = grad.colwise().mean();
    Matrix centered = grad;
    centered.colwise() -= rm;
    centered.rowwise() -= cm;
    centered.array() += grad.mean();
    Eigen::JacobiSVD<Matrix> svd(centered);
    CHECK(stat == doctest::Approx(svd.singularValues()(0)).epsilon(1e-9));
}

TEST_CASE("qut_select: determinism, quantile limits and validation") {
    Rng rng(137);
    const CountTable t = testutil::random_table(rng, 10, 6, 1.0, 0.2);
    const CovariateSet cov = testutil::random_covariates(rng, 10, 6, 2, 1);

    const SelectionReport a = qut_select(t, cov, {}, 0.05, 40, 99);
    const SelectionReport b = qut_select(t, cov, {}, 0.05, 40, 99);
    CHECK(a.chosen_lambda == b.chosen_lambda);
    CHECK(a.lambda0 == b.lambda0);
    REQUIRE(a.bootstrap_stats.size() == 40);
    for (std::size_t i = 0; i < a.bootstrap_stats.size(); ++i) {
        CHECK(a.bootstrap_stats[i] == b.bootstrap_stats[i]);
    }

    // epsilon -> 1 limit returns the minimum of the bootstrap statistics.
    const SelectionReport low = qut_select(t, cov, {}, 0.999, 40, 99);
    std::vector<double> stats = a.bootstrap_stats;
    CHECK(low.chosen_lambda ==
          doctest::Approx(*std::min_element(stats.begin(), stats.end())));

    CHECK_THROWS_AS(qut_select(t, cov, {}, 0.05, 10, 1), ValidationError);
    CHECK_THROWS_AS(qut_select(t, cov, {}, 0.0, 40, 1), ValidationError);
}

TEST_CASE("independence_test: power on strong interactions, determinism") {
    SimSpec spec;
    spec.n = 50;
    spec.p = 10;
    spec.k1 = 2;
    spec.k2 = 2;
    spec.theta_rank = 1;
    spec.tau_ratio = 0.8;
    spec.seed = 4242;
    const SimulatedDataset data = simulate_dataset(spec);
    const IndependenceTest strong = independence_test(data.table, data.cov, {}, 0.05, 50, 5);
    CHECK(strong.reject);
    CHECK(strong.lambda0 > strong.threshold);
    const IndependenceTest again = independence_test(data.table, data.cov, {}, 0.05, 50, 5);
    CHECK(strong.reject == again.reject);
    CHECK(strong.lambda0 == again.lambda0);
    CHECK(strong.threshold == again.threshold);
}

TEST_CASE("qut level: fresh null datasets exceed the threshold at about epsilon") {
    // One QUT threshold from a reference null dataset, then 200 fresh draws
    // from the true null model; the exceedance rate should sit near epsilon.
    SimSpec spec;
    spec.n = 30;
    spec.p = 8;
    spec.k1 = 2;
    spec.k2 = 1;
    spec.tau_ratio = 0.0;
    spec.theta_rank = 0;
    spec.seed = 777;
    const SimulatedDataset ref = simulate_dataset(spec);
    const double epsilon = 0.05;
    const SelectionReport qut = qut_select(ref.table, ref.cov, {}, epsilon, 200, 31);

    int exceed = 0;
    const int n_fresh = 200;
    for (int rep = 0; rep < n_fresh; ++rep) {
        Rng rng = Rng::for_stream(555, static_cast<std::uint64_t>(rep));
        Matrix values(spec.n, spec.p);
        const Matrix means = ref.natural_params.array().exp();
        for (Index j = 0; j < spec.p; ++j)
            for (Index i = 0; i < spec.n; ++i)
                values(i, j) = static_cast<double>(rng.poisson(means(i, j)));
        const CountTable fresh(values, ref.table.mask);
        if (null_threshold_stat(fresh, ref.cov) > qut.chosen_lambda) ++exceed;
    }
    const double rate = static_cast<double>(exceed) / n_fresh;
    const double sigma = std::sqrt(epsilon * (1 - epsilon) / n_fresh);
    CHECK(rate >= epsilon - 3 * sigma - 1e-12);
    CHECK(rate <= epsilon + 3 * sigma);
}

TEST_CASE("cross_validate: selection behavior") {
    Rng rng(139);

    SUBCASE("single lambda grid returns that lambda") {
        const CountTable t = testutil::random_table(rng, 10, 6, 1.2);
        const SelectionReport report =
            cross_validate(t, CovariateSet{}, {0.7}, 0.2, 3, {}, 5);
        CHECK(report.chosen_lambda == doctest::Approx(0.7));
        REQUIRE(report.cv_grid.size() == 1);
        CHECK(std::isfinite(report.cv_grid[0].second));
    }

    SUBCASE("strong interactions prefer the smaller lambda") {
        SimSpec spec;
        spec.n = 50;
        spec.p = 10;
        spec.k1 = 2;
        spec.k2 = 1;
        spec.mu_star = 1.2;
        spec.alpha_star = Vector::Zero(2);
        spec.alpha_star << 0.7, 0.0;
        spec.beta_star = Vector::Zero(1);
        spec.beta_star << -0.7;
        spec.theta_rank = 1;
        spec.tau_ratio = 0.6;
        spec.seed = 321;
        const SimulatedDataset data = simulate_dataset(spec);
        const double lambda0 = null_threshold_stat(data.table, data.cov);
        const SelectionReport report = cross_validate(
            data.table, data.cov, {lambda0 * 1.01, lambda0 / 10.0}, 0.2, 3, {}, 17);
        CHECK(report.chosen_lambda == doctest::Approx(lambda0 / 10.0));
        for (const auto& [lambda, err] : report.cv_grid) CHECK(std::isfinite(err));
    }

    SUBCASE("invalid arguments") {
        const CountTable t = testutil::random_table(rng, 6, 4, 1.0);
        CHECK_THROWS_AS(cross_validate(t, CovariateSet{}, {1.0, 2.0}, 0.2, 3, {}, 1),
                        ValidationError);
        CHECK_THROWS_AS(cross_validate(t, CovariateSet{}, {1.0}, 1.5, 3, {}, 1),
                        ValidationError);
    }
}
