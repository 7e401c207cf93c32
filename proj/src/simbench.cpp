#include "lori/simbench.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "lori/lambda_select.hpp"
#include "lori/linalg.hpp"
#include "lori/parallel.hpp"
#include "lori/rng.hpp"

namespace lori {

namespace {

Matrix draw_block_gaussian(Index rows, Index cols, const std::vector<int>& blocks,
                           double rho, Rng& rng) {
    Matrix raw(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index j = 0; j < cols; ++j) raw(i, j) = rng.normal();
    if (blocks.empty() || rho == 0.0) return raw;

    const int total = std::accumulate(blocks.begin(), blocks.end(), 0);
    if (total != static_cast<int>(cols)) {
        throw ValidationError("covariance block sizes must sum to the covariate count");
    }
    if (!(rho > -1.0 && rho < 1.0)) {
        throw ValidationError("within-block correlation must lie in (-1, 1)");
    }
    Matrix out(rows, cols);
    Index offset = 0;
    for (const int b : blocks) {
        Matrix sigma = Matrix::Constant(b, b, rho);
        sigma.diagonal().setOnes();
        const Eigen::LLT<Matrix> llt(sigma);
        if (llt.info() != Eigen::Success) {
            throw ValidationError("covariance block is not positive definite");
        }
        out.middleCols(offset, b) =
            raw.middleCols(offset, b) * llt.matrixL().transpose();
        offset += b;
    }
    return out;
}

double frob(const Matrix& m) { return m.norm(); }

std::vector<std::string> index_names(const char* prefix, Index count) {
    std::vector<std::string> names;
    names.reserve(count);
    for (Index i = 0; i < count; ++i) names.push_back(prefix + std::to_string(i + 1));
    return names;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (const double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t mid = v.size() / 2;
    if (v.size() % 2 == 1) return v[mid];
    return 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace

void SimSpec::validate() const {
    if (n < 1 || p < 1) throw ValidationError("simulation dimensions must be positive");
    if (k1 < 0 || k2 < 0) throw ValidationError("covariate counts must be nonnegative");
    if (!(miss_prob >= 0.0 && miss_prob < 1.0))
        throw ValidationError("missing probability must lie in [0, 1)");
    if (tau_ratio < 0.0) throw ValidationError("tau ratio must be nonnegative");
    if (theta_rank < 0 || (tau_ratio > 0.0 &&
                           theta_rank > static_cast<int>(std::min(n - 1, p - 1)))) {
        throw ValidationError("theta rank must be at most min(n-1, p-1)");
    }
    if (tau_ratio > 0.0 && theta_rank == 0)
        throw ValidationError("a nonzero tau ratio needs a positive theta rank");
}

Vector SimSpec::effective_alpha() const {
    if (alpha_star.size() > 0) {
        if (alpha_star.size() != k1)
            throw ValidationError("alpha_star length does not match k1");
        return alpha_star;
    }
    Vector a = Vector::Zero(k1);
    if (k1 > 0) a(0) = 2.0;
    return a;
}

Vector SimSpec::effective_beta() const {
    if (beta_star.size() > 0) {
        if (beta_star.size() != k2)
            throw ValidationError("beta_star length does not match k2");
        return beta_star;
    }
    Vector b = Vector::Zero(k2);
    if (k2 > 0) b(0) = -2.0;
    return b;
}

SimulatedDataset simulate_dataset(const SimSpec& spec) {
    spec.validate();
    Rng rng = Rng::for_stream(spec.seed, 0x51u);

    CovariateSet cov;
    if (spec.k1 > 0) {
        Matrix r_raw = draw_block_gaussian(spec.n, spec.k1, spec.row_cov_blocks,
                                           spec.row_block_rho, rng);
        cov.row_cov = CovariateSet::standardize_columns(std::move(r_raw), cov.row_std);
        cov.row_cov_names = index_names("R", spec.k1);
    }
    if (spec.k2 > 0) {
        Matrix c_raw = draw_block_gaussian(spec.p, spec.k2, spec.col_cov_blocks,
                                           spec.col_block_rho, rng);
        cov.col_cov = CovariateSet::standardize_columns(std::move(c_raw), cov.col_std);
        cov.col_cov_names = index_names("C", spec.k2);
    }

    ModelParams truth = ModelParams::zeros(spec.n, spec.p, spec.k1, spec.k2);
    truth.mu = spec.mu_star;
    truth.alpha = spec.effective_alpha();
    truth.beta = spec.effective_beta();

    const Matrix x0 = build_natural_params(truth, cov).x;
    if (spec.tau_ratio > 0.0) {
        Matrix left(spec.n, spec.theta_rank), right(spec.p, spec.theta_rank);
        for (Index j = 0; j < left.cols(); ++j)
            for (Index i = 0; i < left.rows(); ++i) left(i, j) = rng.normal();
        for (Index j = 0; j < right.cols(); ++j)
            for (Index i = 0; i < right.rows(); ++i) right(i, j) = rng.normal();
        Matrix theta = interaction_projector(left * right.transpose());
        const double norm = frob(theta);
        if (norm <= 0.0) throw NumericError("degenerate random interaction draw");
        theta *= spec.tau_ratio * frob(x0) / norm;
        truth.theta = std::move(theta);
    }

    const Matrix x_star = build_natural_params(truth, cov).x;
    const double cap = kDefaultExpCap;
    if ((x_star.array() > cap).any()) {
        throw NumericError("simulated natural parameters exceed the exp cap; "
                           "shrink mu_star, the coefficients, or tau_ratio");
    }

    Matrix values(spec.n, spec.p);
    for (Index j = 0; j < spec.p; ++j)
        for (Index i = 0; i < spec.n; ++i)
            values(i, j) = static_cast<double>(rng.poisson(std::exp(x_star(i, j))));

    CountTable table(std::move(values), Mask::Constant(spec.n, spec.p, true),
                     index_names("row", spec.n), index_names("col", spec.p));

    SimulatedDataset out{std::move(table), std::move(cov), std::move(truth), x_star};
    if (spec.miss_prob > 0.0) {
        out.table = apply_mcar_mask(out.table, spec.miss_prob, rng.uniform_int(1u << 30));
    }
    return out;
}

CountTable apply_mcar_mask(const CountTable& table, double miss_prob,
                           std::uint64_t seed) {
    if (!(miss_prob >= 0.0 && miss_prob < 1.0))
        throw ValidationError("missing probability must lie in [0, 1)");
    if (miss_prob == 0.0) return table;

    Rng rng = Rng::for_stream(seed, 0xacu);
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Mask mask = table.mask;
        for (Index j = 0; j < table.cols(); ++j)
            for (Index i = 0; i < table.rows(); ++i)
                if (mask(i, j) && rng.bernoulli(miss_prob)) mask(i, j) = false;
        bool feasible = mask.any();
        for (Index i = 0; i < table.rows() && feasible; ++i)
            if (!mask.row(i).any()) feasible = false;
        for (Index j = 0; j < table.cols() && feasible; ++j)
            if (!mask.col(j).any()) feasible = false;
        if (feasible) {
            return CountTable(table.values, std::move(mask), table.row_names,
                              table.col_names);
        }
    }
    throw ValidationError("could not draw a missingness mask keeping every row and "
                          "column observed; the missing probability is too high");
}

Matrix baseline_column_mean(const CountTable& table) {
    Matrix out = table.values;
    for (Index j = 0; j < table.cols(); ++j) {
        double sum = 0.0;
        Index count = 0;
        for (Index i = 0; i < table.rows(); ++i) {
            if (table.mask(i, j)) {
                sum += table.values(i, j);
                ++count;
            }
        }
        const double mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
        for (Index i = 0; i < table.rows(); ++i)
            if (!table.mask(i, j)) out(i, j) = mean;
    }
    return out;
}

FitAudit audit_fit(const FitResult& fit) {
    FitAudit audit;
    audit.converged = fit.converged;
    for (std::size_t t = 1; t < fit.objective_trace.size(); ++t) {
        if (fit.objective_trace[t] > fit.objective_trace[t - 1] + 1e-10) {
            audit.objective_monotone = false;
        }
    }
    const Vector row_sums = fit.params.theta.rowwise().sum();
    const Vector col_sums = fit.params.theta.colwise().sum();
    audit.max_centering_violation =
        std::max(row_sums.lpNorm<Eigen::Infinity>(), col_sums.lpNorm<Eigen::Infinity>());
    return audit;
}

EstimationBenchReport run_estimation_benchmark(const std::vector<SimSpec>& specs,
                                               int reps, const SolverConfig& config) {
    if (reps < 1) throw ValidationError("benchmark needs at least one repetition");
    if (specs.empty()) throw ValidationError("benchmark needs at least one spec");

    const std::size_t total = specs.size() * static_cast<std::size_t>(reps);
    std::vector<EstimationRow> rows(total);

    parallel_for(total, [&](std::size_t task) {
        const std::size_t spec_idx = task / static_cast<std::size_t>(reps);
        const int rep = static_cast<int>(task % static_cast<std::size_t>(reps));
        SimSpec spec = specs[spec_idx];
        spec.seed = Rng::for_stream(spec.seed, static_cast<std::uint64_t>(rep) + 1)
                        .uniform_int(1ull << 62);

        EstimationRow row;
        row.tau = spec.tau_ratio;
        row.rep = rep;
        try {
            const SimulatedDataset data = simulate_dataset(spec);
            const double x_norm = frob(data.natural_params);

            // LORI: lambda from QUT, then one fit.
            const SelectionReport qut =
                qut_select(data.table, data.cov, config, 0.05, 100, spec.seed);
            const FitResult lori =
                fit(data.table, data.cov, qut.chosen_lambda, config);
            row.lambda_lori = qut.chosen_lambda;
            row.audit_lori = audit_fit(lori);
            const Matrix x_lori = build_natural_params(lori.params, data.cov).x;
            row.rel_rmse_lori = frob(x_lori - data.natural_params) / x_norm;
            row.coef_rmse_lori =
                std::sqrt((lori.params.alpha - data.truth.alpha).squaredNorm() +
                          (lori.params.beta - data.truth.beta).squaredNorm());

            // Main-effects GLM (theta pinned at zero).
            const ModelParams glm = fit_null_model(data.table, data.cov, config);
            const Matrix x_glm = build_natural_params(glm, data.cov).x;
            row.rel_rmse_glm = frob(x_glm - data.natural_params) / x_norm;
            row.coef_rmse_glm =
                std::sqrt((glm.alpha - data.truth.alpha).squaredNorm() +
                          (glm.beta - data.truth.beta).squaredNorm());

            // Covariate-free low-rank fit, lambda from its own QUT.
            const CovariateSet no_cov;
            const SelectionReport qut_lrm =
                qut_select(data.table, no_cov, config, 0.05, 100, spec.seed + 1);
            const FitResult lrm =
                fit(data.table, no_cov, qut_lrm.chosen_lambda, config);
            row.lambda_lrm = qut_lrm.chosen_lambda;
            row.audit_lrm = audit_fit(lrm);
            const Matrix x_lrm = build_natural_params(lrm.params, no_cov).x;
            row.rel_rmse_lrm = frob(x_lrm - data.natural_params) / x_norm;
        } catch (const Error& e) {
            row.ok = false;
            row.error = e.what();
        }
        rows[task] = std::move(row);
    });

    EstimationBenchReport report;
    report.rows = std::move(rows);
    for (std::size_t s = 0; s < specs.size(); ++s) {
        EstimationSummary sum;
        sum.tau = specs[s].tau_ratio;
        std::vector<double> c_lori, c_glm, r_lori, r_lrm, r_glm;
        for (int rep = 0; rep < reps; ++rep) {
            const EstimationRow& row = report.rows[s * reps + rep];
            if (!row.ok) {
                ++report.n_failures;
                continue;
            }
            c_lori.push_back(row.coef_rmse_lori);
            c_glm.push_back(row.coef_rmse_glm);
            r_lori.push_back(row.rel_rmse_lori);
            r_lrm.push_back(row.rel_rmse_lrm);
            r_glm.push_back(row.rel_rmse_glm);
        }
        sum.n_ok = static_cast<int>(c_lori.size());
        sum.mean_coef_rmse_lori = mean_of(c_lori);
        sum.sd_coef_rmse_lori = sd_of(c_lori);
        sum.mean_coef_rmse_glm = mean_of(c_glm);
        sum.sd_coef_rmse_glm = sd_of(c_glm);
        sum.mean_rel_rmse_lori = mean_of(r_lori);
        sum.sd_rel_rmse_lori = sd_of(r_lori);
        sum.mean_rel_rmse_lrm = mean_of(r_lrm);
        sum.sd_rel_rmse_lrm = sd_of(r_lrm);
        sum.mean_rel_rmse_glm = mean_of(r_glm);
        sum.sd_rel_rmse_glm = sd_of(r_glm);
        report.summary.push_back(sum);
    }
    return report;
}

ImputationBenchReport run_imputation_benchmark(const SimSpec& spec,
                                               const std::vector<double>& miss_fracs,
                                               int reps, const SolverConfig& config) {
    if (reps < 1) throw ValidationError("benchmark needs at least one repetition");
    if (miss_fracs.empty()) throw ValidationError("benchmark needs missing fractions");
    for (const double f : miss_fracs)
        if (!(f > 0.0 && f < 1.0))
            throw ValidationError("missing fractions must lie strictly between 0 and 1");

    const std::size_t total = miss_fracs.size() * static_cast<std::size_t>(reps);
    std::vector<ImputationRow> rows(total);

    parallel_for(total, [&](std::size_t task) {
        const std::size_t frac_idx = task / static_cast<std::size_t>(reps);
        const int rep = static_cast<int>(task % static_cast<std::size_t>(reps));

        SimSpec rep_spec = spec;
        rep_spec.miss_prob = 0.0;  // complete table first, then erase
        rep_spec.seed = Rng::for_stream(spec.seed, static_cast<std::uint64_t>(rep) + 1)
                            .uniform_int(1ull << 62);

        ImputationRow row;
        row.miss_frac = miss_fracs[frac_idx];
        row.rep = rep;
        try {
            const SimulatedDataset data = simulate_dataset(rep_spec);
            const CountTable masked = apply_mcar_mask(
                data.table, row.miss_frac,
                Rng::for_stream(rep_spec.seed, frac_idx + 7).uniform_int(1ull << 62));

            const SelectionReport qut =
                qut_select(masked, data.cov, config, 0.05, 100, rep_spec.seed);
            const FitResult lori = fit(masked, data.cov, qut.chosen_lambda, config);
            row.audit_lori = audit_fit(lori);
            const Matrix lori_hat = build_natural_params(lori.params, data.cov)
                                        .x.array()
                                        .exp();
            const Matrix moy_hat = baseline_column_mean(masked);

            double sse_lori = 0.0, sse_moy = 0.0;
            std::size_t hidden = 0;
            for (Index j = 0; j < masked.cols(); ++j) {
                for (Index i = 0; i < masked.rows(); ++i) {
                    if (masked.mask(i, j)) continue;  // erased cells only
                    const double truth = data.table.values(i, j);
                    sse_lori += (lori_hat(i, j) - truth) * (lori_hat(i, j) - truth);
                    sse_moy += (moy_hat(i, j) - truth) * (moy_hat(i, j) - truth);
                    ++hidden;
                }
            }
            if (hidden == 0) throw NumericError("mask hid no cells");
            row.mse_lori = sse_lori / static_cast<double>(hidden);
            row.mse_column_mean = sse_moy / static_cast<double>(hidden);
        } catch (const Error& e) {
            row.ok = false;
            row.error = e.what();
        }
        rows[task] = std::move(row);
    });

    ImputationBenchReport report;
    report.rows = std::move(rows);
    for (std::size_t f = 0; f < miss_fracs.size(); ++f) {
        ImputationSummary sum;
        sum.miss_frac = miss_fracs[f];
        std::vector<double> lori_err, moy_err;
        for (int rep = 0; rep < reps; ++rep) {
            const ImputationRow& row = report.rows[f * reps + rep];
            if (!row.ok) {
                ++report.n_failures;
                continue;
            }
            lori_err.push_back(row.mse_lori);
            moy_err.push_back(row.mse_column_mean);
        }
        sum.n_ok = static_cast<int>(lori_err.size());
        sum.median_mse_lori = median_of(lori_err);
        sum.median_mse_column_mean = median_of(moy_err);
        report.summary.push_back(sum);
    }
    return report;
}

}  // namespace lori
