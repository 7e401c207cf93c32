#include <cmath>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lori/io.hpp"

namespace lori {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct CommonOpts {
    std::string counts_path;
    std::string row_cov_path;
    std::string col_cov_path;
    std::string lambda_mode = "qut";  // "qut", "cv", or a number
    double epsilon = 0.05;
    int n_bootstrap = 100;
    int n_folds = 5;
    double erase_frac = 0.2;
    int grid_size = 10;
    double grid_min_ratio = 0.01;
    double tol = 1e-6;
    int max_iters = 500;
    std::uint64_t seed = 0;
    std::string out_dir;
};

void add_common_flags(CLI::App* cmd, CommonOpts& opts, bool need_out) {
    cmd->add_option("--counts", opts.counts_path, "count table CSV")->required();
    cmd->add_option("--row-cov", opts.row_cov_path, "row covariate CSV");
    cmd->add_option("--col-cov", opts.col_cov_path, "column covariate CSV");
    cmd->add_option("--lambda", opts.lambda_mode,
                    "regularization: a number, 'qut', or 'cv'");
    cmd->add_option("--epsilon", opts.epsilon, "QUT quantile level");
    cmd->add_option("--nboot", opts.n_bootstrap, "QUT bootstrap replicates");
    cmd->add_option("--folds", opts.n_folds, "cross-validation folds");
    cmd->add_option("--erase-frac", opts.erase_frac, "fraction of observed cells erased per fold");
    cmd->add_option("--grid-size", opts.grid_size, "lambda grid size for cv");
    cmd->add_option("--grid-min-ratio", opts.grid_min_ratio,
                    "smallest grid lambda as a fraction of lambda0");
    cmd->add_option("--tol", opts.tol, "solver relative-objective tolerance");
    cmd->add_option("--max-iters", opts.max_iters, "solver outer iteration cap");
    cmd->add_option("--seed", opts.seed, "random seed");
    auto* out = cmd->add_option("--out", opts.out_dir, "output directory");
    if (need_out) out->required();
}

struct LoadedData {
    CountTable table;
    CovariateSet cov;
};

LoadedData load_data(const CommonOpts& opts) {
    LoadedData data{read_count_csv(opts.counts_path), CovariateSet{}};
    if (!opts.row_cov_path.empty()) {
        CovariateMatrix m = read_covariate_csv(opts.row_cov_path, data.table.row_names);
        data.cov.row_cov = std::move(m.values);
        data.cov.row_std = std::move(m.std_record);
        data.cov.row_cov_names = std::move(m.col_names);
    }
    if (!opts.col_cov_path.empty()) {
        CovariateMatrix m = read_covariate_csv(opts.col_cov_path, data.table.col_names);
        data.cov.col_cov = std::move(m.values);
        data.cov.col_std = std::move(m.std_record);
        data.cov.col_cov_names = std::move(m.col_names);
    }
    return data;
}

SolverConfig make_config(const CommonOpts& opts) {
    SolverConfig config;
    config.tol = opts.tol;
    config.max_outer_iters = opts.max_iters;
    return config;
}

std::vector<double> geometric_grid(double lambda0, int size, double min_ratio) {
    if (size < 1) throw ValidationError("grid size must be at least 1");
    if (!(min_ratio > 0.0 && min_ratio < 1.0))
        throw ValidationError("grid min ratio must lie strictly between 0 and 1");
    std::vector<double> grid;
    if (size == 1) return {lambda0};
    const double step = std::pow(min_ratio, 1.0 / (size - 1));
    double lambda = lambda0;
    for (int g = 0; g < size; ++g) {
        grid.push_back(lambda);
        lambda *= step;
    }
    return grid;
}

struct Selected {
    double lambda = 0.0;
    std::optional<SelectionReport> report;
};

Selected select_lambda(const LoadedData& data, const CommonOpts& opts,
                       const SolverConfig& config) {
    Selected out;
    if (opts.lambda_mode == "qut") {
        out.report = qut_select(data.table, data.cov, config, opts.epsilon,
                                opts.n_bootstrap, opts.seed);
        out.lambda = out.report->chosen_lambda;
    } else if (opts.lambda_mode == "cv") {
        const double lambda0 = null_threshold_stat(data.table, data.cov, config);
        const auto grid = geometric_grid(lambda0, opts.grid_size, opts.grid_min_ratio);
        out.report = cross_validate(data.table, data.cov, grid, opts.erase_frac,
                                    opts.n_folds, config, opts.seed);
        out.report->lambda0 = lambda0;
        out.lambda = out.report->chosen_lambda;
    } else {
        char* end = nullptr;
        const double v = std::strtod(opts.lambda_mode.c_str(), &end);
        if (end == opts.lambda_mode.c_str() || *end != '\0' || !(v >= 0.0) ||
            !std::isfinite(v)) {
            throw ValidationError("--lambda must be a nonnegative number, 'qut', or 'cv'");
        }
        out.lambda = v;
    }
    return out;
}

int run_fit_like(const CommonOpts& opts) {
    const LoadedData data = load_data(opts);
    const SolverConfig config = make_config(opts);
    const Selected sel = select_lambda(data, opts, config);
    const FitResult result = fit(data.table, data.cov, sel.lambda, config);
    const FileManifest manifest =
        write_results(data.table, data.cov, result, sel.report, opts.out_dir);
    std::cout << "lambda " << format_double(sel.lambda) << "\n";
    std::cout << "converged " << (result.converged ? "yes" : "no") << " after "
              << result.n_iters << " iterations\n";
    std::cout << "effective rank " << result.effective_rank << "\n";
    for (const auto& entry : manifest.entries) {
        std::cout << entry.filename << " " << entry.bytes << " bytes\n";
    }
    return 0;
}

int run_test(const CommonOpts& opts) {
    const LoadedData data = load_data(opts);
    const SolverConfig config = make_config(opts);
    const IndependenceTest result = independence_test(
        data.table, data.cov, config, opts.epsilon, opts.n_bootstrap, opts.seed);
    std::cout << "lambda0 " << format_double(result.lambda0) << "\n";
    std::cout << "threshold " << format_double(result.threshold) << "\n";
    std::cout << "reject " << (result.reject ? "true" : "false") << "\n";
    if (!opts.out_dir.empty()) {
        fs::create_directories(opts.out_dir);
        json j;
        j["lambda0"] = result.lambda0;
        j["threshold"] = result.threshold;
        j["reject"] = result.reject;
        j["epsilon"] = opts.epsilon;
        j["n_bootstrap"] = opts.n_bootstrap;
        j["seed"] = opts.seed;
        std::ofstream out(fs::path(opts.out_dir) / "test.json");
        out << j.dump(2) << "\n";
    }
    return 0;
}

int run_cv(const CommonOpts& opts) {
    const LoadedData data = load_data(opts);
    const SolverConfig config = make_config(opts);
    const double lambda0 = null_threshold_stat(data.table, data.cov, config);
    const auto grid = geometric_grid(lambda0, opts.grid_size, opts.grid_min_ratio);
    SelectionReport report = cross_validate(data.table, data.cov, grid, opts.erase_frac,
                                            opts.n_folds, config, opts.seed);
    report.lambda0 = lambda0;
    std::cout << "lambda0 " << format_double(lambda0) << "\n";
    for (const auto& [lambda, err] : report.cv_grid) {
        std::cout << "lambda " << format_double(lambda) << " heldout_error "
                  << format_double(err) << "\n";
    }
    std::cout << "chosen " << format_double(report.chosen_lambda) << "\n";
    if (!opts.out_dir.empty()) {
        fs::create_directories(opts.out_dir);
        json j;
        j["method"] = "cv";
        j["chosen_lambda"] = report.chosen_lambda;
        j["lambda0"] = report.lambda0;
        j["erase_fraction"] = opts.erase_frac;
        j["n_folds"] = opts.n_folds;
        j["seed"] = opts.seed;
        json grid_json = json::array();
        for (const auto& [lambda, err] : report.cv_grid) grid_json.push_back({lambda, err});
        j["cv_grid"] = std::move(grid_json);
        std::ofstream out(fs::path(opts.out_dir) / "selection.json");
        out << j.dump(2) << "\n";
    }
    return 0;
}

std::vector<double> parse_double_list(const std::string& csv, const char* what) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string token;
    while (std::getline(ss, token, ',')) {
        char* end = nullptr;
        const double v = std::strtod(token.c_str(), &end);
        if (end == token.c_str() || *end != '\0') {
            throw ValidationError(std::string(what) + ": cannot parse '" + token + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) throw ValidationError(std::string(what) + ": empty list");
    return out;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"lori: low-rank-plus-covariates Poisson models for count tables"};
    app.require_subcommand(1);

    CommonOpts fit_opts, impute_opts, test_opts, cv_opts;
    auto* fit_cmd = app.add_subcommand("fit", "fit the model and write all outputs");
    add_common_flags(fit_cmd, fit_opts, true);
    auto* impute_cmd = app.add_subcommand("impute", "fit and write imputed/completed tables");
    add_common_flags(impute_cmd, impute_opts, true);
    auto* test_cmd = app.add_subcommand("test", "test for interactions beyond the main effects");
    add_common_flags(test_cmd, test_opts, false);
    auto* cv_cmd = app.add_subcommand("cv", "select lambda by cross-validation");
    add_common_flags(cv_cmd, cv_opts, false);

    auto* sim_cmd = app.add_subcommand("simulate", "write a synthetic dataset");
    SimSpec sim_spec;
    std::string sim_out;
    double sim_tau = 0.0;
    long long sim_n = 100, sim_p = 20, sim_k1 = 3, sim_k2 = 4, sim_rank = 5;
    double sim_miss = 0.0, sim_mu = 1.0;
    std::uint64_t sim_seed = 0;
    sim_cmd->add_option("--n", sim_n, "rows");
    sim_cmd->add_option("--p", sim_p, "columns");
    sim_cmd->add_option("--k1", sim_k1, "row covariates");
    sim_cmd->add_option("--k2", sim_k2, "column covariates");
    sim_cmd->add_option("--mu", sim_mu, "offset");
    sim_cmd->add_option("--tau", sim_tau, "interaction-to-main-effect Frobenius ratio");
    sim_cmd->add_option("--theta-rank", sim_rank, "interaction rank");
    sim_cmd->add_option("--miss-prob", sim_miss, "MCAR missingness probability");
    sim_cmd->add_option("--seed", sim_seed, "random seed");
    sim_cmd->add_option("--out", sim_out, "output directory")->required();

    auto* be_cmd = app.add_subcommand("bench-estimation", "estimation benchmark");
    std::string be_taus = "0,0.1,0.25,0.5,1";
    long long be_reps = 20, be_n = 100, be_p = 20, be_max_iters = 2000;
    double be_tol = 1e-8;
    std::uint64_t be_seed = 0;
    std::string be_out;
    be_cmd->add_option("--taus", be_taus, "comma-separated tau ratios");
    be_cmd->add_option("--reps", be_reps, "repetitions per tau");
    be_cmd->add_option("--n", be_n, "rows");
    be_cmd->add_option("--p", be_p, "columns");
    be_cmd->add_option("--tol", be_tol, "solver relative-objective tolerance");
    be_cmd->add_option("--max-iters", be_max_iters, "solver outer iteration cap");
    be_cmd->add_option("--seed", be_seed, "random seed");
    be_cmd->add_option("--out", be_out, "output directory")->required();

    auto* bi_cmd = app.add_subcommand("bench-imputation", "imputation benchmark");
    std::string bi_fracs = "0.2,0.4,0.6,0.8";
    long long bi_reps = 20, bi_n = 100, bi_p = 20;
    double bi_tau = 0.5;
    std::uint64_t bi_seed = 0;
    std::string bi_out;
    bi_cmd->add_option("--miss-fracs", bi_fracs, "comma-separated missing fractions");
    bi_cmd->add_option("--reps", bi_reps, "repetitions per fraction");
    bi_cmd->add_option("--n", bi_n, "rows");
    bi_cmd->add_option("--p", bi_p, "columns");
    bi_cmd->add_option("--tau", bi_tau, "interaction-to-main-effect Frobenius ratio");
    bi_cmd->add_option("--seed", bi_seed, "random seed");
    bi_cmd->add_option("--out", bi_out, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n" << app.help();
        return 1;
    }

    try {
        if (fit_cmd->parsed()) return run_fit_like(fit_opts);
        if (impute_cmd->parsed()) return run_fit_like(impute_opts);
        if (test_cmd->parsed()) return run_test(test_opts);
        if (cv_cmd->parsed()) return run_cv(cv_opts);
        if (sim_cmd->parsed()) {
            sim_spec.n = sim_n;
            sim_spec.p = sim_p;
            sim_spec.k1 = sim_k1;
            sim_spec.k2 = sim_k2;
            sim_spec.mu_star = sim_mu;
            sim_spec.tau_ratio = sim_tau;
            sim_spec.theta_rank = static_cast<int>(sim_rank);
            sim_spec.miss_prob = sim_miss;
            sim_spec.seed = sim_seed;
            const SimulatedDataset data = simulate_dataset(sim_spec);
            fs::create_directories(sim_out);
            write_count_csv(fs::path(sim_out) / "counts.csv", data.table);
            if (data.cov.k1() > 0) {
                std::ofstream out(fs::path(sim_out) / "row_cov.csv");
                out << "";
                for (const auto& name : data.cov.row_cov_names) out << ',' << name;
                out << '\n';
                for (Index i = 0; i < data.cov.row_cov.rows(); ++i) {
                    out << data.table.row_names[i];
                    for (Index k = 0; k < data.cov.k1(); ++k)
                        out << ',' << format_double(data.cov.row_cov(i, k));
                    out << '\n';
                }
            }
            if (data.cov.k2() > 0) {
                std::ofstream out(fs::path(sim_out) / "col_cov.csv");
                out << "";
                for (const auto& name : data.cov.col_cov_names) out << ',' << name;
                out << '\n';
                for (Index j = 0; j < data.cov.col_cov.rows(); ++j) {
                    out << data.table.col_names[j];
                    for (Index k = 0; k < data.cov.k2(); ++k)
                        out << ',' << format_double(data.cov.col_cov(j, k));
                    out << '\n';
                }
            }
            {
                json truth;
                truth["mu"] = data.truth.mu;
                json alpha = json::array(), beta = json::array();
                for (Index k = 0; k < data.truth.alpha.size(); ++k)
                    alpha.push_back(data.truth.alpha(k));
                for (Index k = 0; k < data.truth.beta.size(); ++k)
                    beta.push_back(data.truth.beta(k));
                truth["alpha"] = std::move(alpha);
                truth["beta"] = std::move(beta);
                json theta = json::array();
                for (Index i = 0; i < data.truth.theta.rows(); ++i) {
                    json row = json::array();
                    for (Index j = 0; j < data.truth.theta.cols(); ++j)
                        row.push_back(data.truth.theta(i, j));
                    theta.push_back(std::move(row));
                }
                truth["theta"] = std::move(theta);
                std::ofstream out(fs::path(sim_out) / "truth.json");
                out << truth.dump(2) << "\n";
            }
            std::cout << "wrote dataset to " << sim_out << "\n";
            return 0;
        }
        if (be_cmd->parsed()) {
            std::vector<SimSpec> specs;
            for (const double tau : parse_double_list(be_taus, "--taus")) {
                SimSpec spec;
                spec.n = be_n;
                spec.p = be_p;
                spec.tau_ratio = tau;
                spec.seed = be_seed;
                specs.push_back(spec);
            }
            SolverConfig bench_config;
            bench_config.tol = be_tol;
            bench_config.max_outer_iters = static_cast<int>(be_max_iters);
            const EstimationBenchReport report =
                run_estimation_benchmark(specs, static_cast<int>(be_reps), bench_config);
            write_estimation_report(report, be_out);
            for (const auto& s : report.summary) {
                std::cout << "tau " << format_double(s.tau) << ": coef RMSE lori "
                          << format_double(s.mean_coef_rmse_lori) << " glm "
                          << format_double(s.mean_coef_rmse_glm) << ", rel RMSE lori "
                          << format_double(s.mean_rel_rmse_lori) << " lrm "
                          << format_double(s.mean_rel_rmse_lrm) << "\n";
            }
            return 0;
        }
        if (bi_cmd->parsed()) {
            SimSpec spec;
            spec.n = bi_n;
            spec.p = bi_p;
            spec.tau_ratio = bi_tau;
            spec.seed = bi_seed;
            const ImputationBenchReport report = run_imputation_benchmark(
                spec, parse_double_list(bi_fracs, "--miss-fracs"),
                static_cast<int>(bi_reps));
            write_imputation_report(report, bi_out);
            for (const auto& s : report.summary) {
                std::cout << "miss " << format_double(s.miss_frac) << ": median MSE lori "
                          << format_double(s.median_mse_lori) << " column-mean "
                          << format_double(s.median_mse_column_mean) << "\n";
            }
            return 0;
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace lori
