#include "lori/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

namespace lori {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::vector<std::vector<std::string>> read_csv_rows(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() && in.peek() == EOF) break;
        rows.push_back(split_csv_line(line));
    }
    if (rows.size() < 2) throw ValidationError(path.string() + ": needs a header row and at least one data row");
    return rows;
}

bool is_missing_token(const std::string& cell) { return cell.empty() || cell == "NA"; }

double parse_count_cell(const std::string& cell, const std::string& row_name,
                        const std::string& col_name) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    const bool consumed = end != nullptr && *end == '\0' && end != cell.c_str();
    if (!consumed || errno != 0 || !std::isfinite(v) || v < 0.0 || v != std::floor(v)) {
        throw ValidationError("cell at row '" + row_name + "', column '" + col_name +
                              "' is not a nonnegative integer: '" + cell + "'");
    }
    return v;
}

double parse_numeric_cell(const std::string& cell, const std::string& row_name,
                          const std::string& col_name) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    const bool consumed = end != nullptr && *end == '\0' && end != cell.c_str();
    if (!consumed || errno != 0 || !std::isfinite(v)) {
        throw ValidationError("cell at row '" + row_name + "', column '" + col_name +
                              "' is not numeric: '" + cell + "'");
    }
    return v;
}

void write_named_matrix_csv(const fs::path& path, const Matrix& m,
                            const std::vector<std::string>& row_names,
                            const std::vector<std::string>& col_names) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << "";
    for (Index j = 0; j < m.cols(); ++j) {
        out << ',' << (col_names.empty() ? "col" + std::to_string(j + 1) : col_names[j]);
    }
    out << '\n';
    for (Index i = 0; i < m.rows(); ++i) {
        out << (row_names.empty() ? "row" + std::to_string(i + 1) : row_names[i]);
        for (Index j = 0; j < m.cols(); ++j) out << ',' << format_double(m(i, j));
        out << '\n';
    }
}

json vector_to_json(const Vector& v) {
    json arr = json::array();
    for (Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

json matrix_to_json(const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Vector vector_from_json(const json& arr) {
    Vector v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) v(static_cast<Index>(i)) = arr[i].get<double>();
    return v;
}

Matrix matrix_from_json(const json& rows) {
    if (rows.empty()) return Matrix(0, 0);
    Matrix m(rows.size(), rows[0].size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size())
            throw ValidationError("ragged matrix in JSON");
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j].get<double>();
    }
    return m;
}

void write_text_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << content;
}

}  // namespace

CountTable read_count_csv(const fs::path& path) {
    const auto rows = read_csv_rows(path);
    const auto& header = rows.front();
    if (header.size() < 2)
        throw ValidationError(path.string() + ": header needs at least one column name");
    const std::vector<std::string> col_names(header.begin() + 1, header.end());
    const Index p = static_cast<Index>(col_names.size());
    const Index n = static_cast<Index>(rows.size()) - 1;

    Matrix values = Matrix::Zero(n, p);
    Mask mask = Mask::Constant(n, p, false);
    std::vector<std::string> row_names;
    row_names.reserve(n);
    for (Index i = 0; i < n; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i) + 1];
        if (static_cast<Index>(row.size()) != p + 1) {
            throw ValidationError(path.string() + ": line " + std::to_string(i + 2) +
                                  " has " + std::to_string(row.size() - 1) +
                                  " cells, expected " + std::to_string(p));
        }
        row_names.push_back(row[0]);
        for (Index j = 0; j < p; ++j) {
            const std::string& cell = row[static_cast<std::size_t>(j) + 1];
            if (is_missing_token(cell)) continue;
            values(i, j) = parse_count_cell(cell, row[0], col_names[static_cast<std::size_t>(j)]);
            mask(i, j) = true;
        }
    }
    CountTable table(std::move(values), std::move(mask), std::move(row_names),
                     std::move(col_names));
    table.require_coverage();
    return table;
}

void write_count_csv(const fs::path& path, const CountTable& table) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path.string());
    out << "";
    for (Index j = 0; j < table.cols(); ++j) {
        out << ',' << (table.col_names.empty() ? "col" + std::to_string(j + 1)
                                               : table.col_names[j]);
    }
    out << '\n';
    for (Index i = 0; i < table.rows(); ++i) {
        out << (table.row_names.empty() ? "row" + std::to_string(i + 1)
                                        : table.row_names[i]);
        for (Index j = 0; j < table.cols(); ++j) {
            out << ',';
            if (table.mask(i, j)) {
                out << static_cast<long long>(table.values(i, j));
            } else {
                out << "NA";
            }
        }
        out << '\n';
    }
}

CovariateMatrix read_covariate_csv(const fs::path& path,
                                   const std::vector<std::string>& expected_ids) {
    const auto rows = read_csv_rows(path);
    const auto& header = rows.front();
    if (header.size() < 2)
        throw ValidationError(path.string() + ": header needs at least one covariate name");
    CovariateMatrix out;
    out.col_names.assign(header.begin() + 1, header.end());
    const Index k = static_cast<Index>(out.col_names.size());

    std::map<std::string, std::size_t> position;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (static_cast<Index>(rows[r].size()) != k + 1) {
            throw ValidationError(path.string() + ": line " + std::to_string(r + 1) +
                                  " has " + std::to_string(rows[r].size() - 1) +
                                  " cells, expected " + std::to_string(k));
        }
        if (!position.emplace(rows[r][0], r).second) {
            throw ValidationError(path.string() + ": duplicate id '" + rows[r][0] + "'");
        }
    }

    const Index n = static_cast<Index>(expected_ids.size());
    Matrix raw(n, k);
    for (Index i = 0; i < n; ++i) {
        const auto it = position.find(expected_ids[static_cast<std::size_t>(i)]);
        if (it == position.end()) {
            throw ValidationError(path.string() + ": no covariate row for id '" +
                                  expected_ids[static_cast<std::size_t>(i)] + "'");
        }
        const auto& row = rows[it->second];
        for (Index j = 0; j < k; ++j) {
            const std::string& cell = row[static_cast<std::size_t>(j) + 1];
            if (is_missing_token(cell)) {
                throw ValidationError(path.string() + ": missing covariate value at id '" +
                                      row[0] + "', column '" +
                                      out.col_names[static_cast<std::size_t>(j)] + "'");
            }
            raw(i, j) = parse_numeric_cell(cell, row[0],
                                           out.col_names[static_cast<std::size_t>(j)]);
        }
    }
    out.values = CovariateSet::standardize_columns(std::move(raw), out.std_record);
    return out;
}

std::uint64_t fnv1a_checksum(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + path.string());
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            hash ^= static_cast<unsigned char>(buf[i]);
            hash *= 0x100000001b3ULL;
        }
    }
    return hash;
}

namespace {

json selection_to_json(const SelectionReport& report) {
    json j;
    const bool is_qut = report.method == SelectionMethod::qut;
    j["method"] = is_qut ? "qut" : "cv";
    j["chosen_lambda"] = report.chosen_lambda;
    j["lambda0"] = report.lambda0;
    // The epsilon slot carries the quantile level for QUT and the per-fold
    // erase fraction for CV.
    j[is_qut ? "epsilon" : "erase_fraction"] = report.epsilon;
    j["seed"] = report.seed;
    j["n_failures"] = report.n_failures;
    if (!report.bootstrap_stats.empty()) {
        json stats = json::array();
        for (const double s : report.bootstrap_stats) {
            if (std::isnan(s)) {
                stats.push_back(nullptr);
            } else {
                stats.push_back(s);
            }
        }
        j["bootstrap_stats"] = std::move(stats);
    }
    if (!report.cv_grid.empty()) {
        json grid = json::array();
        for (const auto& [lambda, err] : report.cv_grid) grid.push_back({lambda, err});
        j["cv_grid"] = std::move(grid);
    }
    return j;
}

json standardization_to_json(const Standardization& s, const std::vector<std::string>& names) {
    json j;
    j["names"] = names;
    j["mean"] = vector_to_json(s.mean);
    j["scale"] = vector_to_json(s.scale);
    return j;
}

}  // namespace

FileManifest write_results(const CountTable& table, const CovariateSet& cov,
                           const FitResult& fit,
                           const std::optional<SelectionReport>& selection,
                           const fs::path& out_dir) {
    fs::create_directories(out_dir);
    std::vector<std::string> written;

    // Coefficients on the original covariate scale: alpha_std / scale, with the
    // centering terms folded into the intercept. Covariate sets built without a
    // standardization record count as already being on the original scale.
    Vector alpha_orig = fit.params.alpha, beta_orig = fit.params.beta;
    double intercept_orig = fit.params.mu;
    if (cov.row_std.scale.size() == cov.k1()) {
        for (Index k = 0; k < alpha_orig.size(); ++k) {
            alpha_orig(k) = fit.params.alpha(k) / cov.row_std.scale(k);
            intercept_orig -= alpha_orig(k) * cov.row_std.mean(k);
        }
    }
    if (cov.col_std.scale.size() == cov.k2()) {
        for (Index k = 0; k < beta_orig.size(); ++k) {
            beta_orig(k) = fit.params.beta(k) / cov.col_std.scale(k);
            intercept_orig -= beta_orig(k) * cov.col_std.mean(k);
        }
    }

    json params;
    params["mu"] = fit.params.mu;
    params["alpha"] = vector_to_json(fit.params.alpha);
    params["beta"] = vector_to_json(fit.params.beta);
    params["alpha_original_scale"] = vector_to_json(alpha_orig);
    params["beta_original_scale"] = vector_to_json(beta_orig);
    params["intercept_original_scale"] = intercept_orig;
    params["lambda"] = fit.lambda;
    params["converged"] = fit.converged;
    params["n_iters"] = fit.n_iters;
    params["effective_rank"] = fit.effective_rank;
    params["final_objective"] = fit.objective_trace.back();
    params["objective_trace"] = fit.objective_trace;
    params["theta"] = matrix_to_json(fit.params.theta);
    params["row_names"] = table.row_names;
    params["col_names"] = table.col_names;
    params["row_covariates"] = standardization_to_json(cov.row_std, cov.row_cov_names);
    params["col_covariates"] = standardization_to_json(cov.col_std, cov.col_cov_names);
    write_text_file(out_dir / "params.json", params.dump(2) + "\n");
    written.push_back("params.json");

    write_named_matrix_csv(out_dir / "theta.csv", fit.params.theta, table.row_names,
                           table.col_names);
    written.push_back("theta.csv");

    const Matrix imputed = impute(table, fit, cov);
    write_named_matrix_csv(out_dir / "imputed.csv", imputed, table.row_names,
                           table.col_names);
    written.push_back("imputed.csv");

    write_named_matrix_csv(out_dir / "completed.csv", completed_table(table, fit, cov),
                           table.row_names, table.col_names);
    written.push_back("completed.csv");

    const int max_d = static_cast<int>(std::min(table.rows(), table.cols()));
    const int d = std::min(2, max_d);
    const BiplotCoords coords = biplot_coordinates(fit, d);
    {
        std::ofstream out(out_dir / "biplot.csv");
        out << "id,kind";
        for (int a = 1; a <= coords.d; ++a) out << ",axis_" << a;
        out << '\n';
        for (Index i = 0; i < coords.row_points.rows(); ++i) {
            out << (table.row_names.empty() ? "row" + std::to_string(i + 1)
                                            : table.row_names[i])
                << ",row";
            for (int a = 0; a < coords.d; ++a)
                out << ',' << format_double(coords.row_points(i, a));
            out << '\n';
        }
        for (Index j = 0; j < coords.col_points.rows(); ++j) {
            out << (table.col_names.empty() ? "col" + std::to_string(j + 1)
                                            : table.col_names[j])
                << ",col";
            for (int a = 0; a < coords.d; ++a)
                out << ',' << format_double(coords.col_points(j, a));
            out << '\n';
        }
    }
    written.push_back("biplot.csv");

    {
        std::ofstream out(out_dir / "correlations.csv");
        out << "covariate,side";
        for (int a = 1; a <= d; ++a) out << ",axis_" << a;
        out << '\n';
        if (cov.k1() + cov.k2() > 0) {
            const CovariateCorrelations corr =
                interaction_covariate_correlations(fit, cov, d);
            for (Index k = 0; k < cov.k1(); ++k) {
                out << (cov.row_cov_names.empty() ? "R" + std::to_string(k + 1)
                                                  : cov.row_cov_names[k])
                    << ",row";
                for (int a = 0; a < d; ++a) {
                    out << ',';
                    if (std::isnan(corr.row(k, a))) {
                        out << "NA";
                    } else {
                        out << format_double(corr.row(k, a));
                    }
                }
                out << '\n';
            }
            for (Index k = 0; k < cov.k2(); ++k) {
                out << (cov.col_cov_names.empty() ? "C" + std::to_string(k + 1)
                                                  : cov.col_cov_names[k])
                    << ",col";
                for (int a = 0; a < d; ++a) {
                    out << ',';
                    if (std::isnan(corr.col(k, a))) {
                        out << "NA";
                    } else {
                        out << format_double(corr.col(k, a));
                    }
                }
                out << '\n';
            }
        }
    }
    written.push_back("correlations.csv");

    const MultiplicativeDecomposition decomp = multiplicative_decomposition(fit, cov);
    const std::pair<const char*, const Matrix*> factors[] = {
        {"decomposition_offset.csv", &decomp.offset_factor},
        {"decomposition_row.csv", &decomp.row_factor},
        {"decomposition_col.csv", &decomp.col_factor},
        {"decomposition_interaction.csv", &decomp.interaction_factor},
    };
    for (const auto& [name, matrix] : factors) {
        write_named_matrix_csv(out_dir / name, *matrix, table.row_names, table.col_names);
        written.push_back(name);
    }

    if (selection) {
        write_text_file(out_dir / "selection.json", selection_to_json(*selection).dump(2) + "\n");
        written.push_back("selection.json");
    }

    FileManifest manifest;
    json mj;
    mj["generated_at"] = []() {
        char buf[64];
        const std::time_t now = std::time(nullptr);
        std::tm tm_utc{};
        gmtime_r(&now, &tm_utc);
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
        return std::string(buf);
    }();
    json files = json::array();
    for (const auto& name : written) {
        ManifestEntry entry;
        entry.filename = name;
        entry.checksum = fnv1a_checksum(out_dir / name);
        entry.bytes = fs::file_size(out_dir / name);
        char hex[32];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(entry.checksum));
        files.push_back({{"name", entry.filename},
                         {"fnv1a64", std::string(hex)},
                         {"bytes", entry.bytes}});
        manifest.entries.push_back(std::move(entry));
    }
    mj["files"] = std::move(files);
    write_text_file(out_dir / "manifest.json", mj.dump(2) + "\n");
    return manifest;
}

ModelParams read_params_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    json j;
    in >> j;
    ModelParams params;
    params.mu = j.at("mu").get<double>();
    params.alpha = vector_from_json(j.at("alpha"));
    params.beta = vector_from_json(j.at("beta"));
    params.theta = matrix_from_json(j.at("theta"));
    return params;
}

void write_estimation_report(const EstimationBenchReport& report,
                             const fs::path& out_dir) {
    fs::create_directories(out_dir);
    {
        std::ofstream out(out_dir / "estimation_rows.csv");
        out << "tau,rep,ok,coef_rmse_lori,coef_rmse_glm,rel_rmse_lori,rel_rmse_lrm,"
               "rel_rmse_glm,lambda_lori,lambda_lrm,error\n";
        for (const auto& r : report.rows) {
            out << format_double(r.tau) << ',' << r.rep << ',' << (r.ok ? 1 : 0) << ','
                << format_double(r.coef_rmse_lori) << ',' << format_double(r.coef_rmse_glm)
                << ',' << format_double(r.rel_rmse_lori) << ','
                << format_double(r.rel_rmse_lrm) << ',' << format_double(r.rel_rmse_glm)
                << ',' << format_double(r.lambda_lori) << ','
                << format_double(r.lambda_lrm) << ',' << r.error << '\n';
        }
    }
    json j;
    j["n_failures"] = report.n_failures;
    json summary = json::array();
    for (const auto& s : report.summary) {
        summary.push_back({{"tau", s.tau},
                           {"n_ok", s.n_ok},
                           {"mean_coef_rmse_lori", s.mean_coef_rmse_lori},
                           {"sd_coef_rmse_lori", s.sd_coef_rmse_lori},
                           {"mean_coef_rmse_glm", s.mean_coef_rmse_glm},
                           {"sd_coef_rmse_glm", s.sd_coef_rmse_glm},
                           {"mean_rel_rmse_lori", s.mean_rel_rmse_lori},
                           {"sd_rel_rmse_lori", s.sd_rel_rmse_lori},
                           {"mean_rel_rmse_lrm", s.mean_rel_rmse_lrm},
                           {"sd_rel_rmse_lrm", s.sd_rel_rmse_lrm},
                           {"mean_rel_rmse_glm", s.mean_rel_rmse_glm},
                           {"sd_rel_rmse_glm", s.sd_rel_rmse_glm}});
    }
    j["summary"] = std::move(summary);
    write_text_file(out_dir / "estimation_summary.json", j.dump(2) + "\n");
}

void write_imputation_report(const ImputationBenchReport& report,
                             const fs::path& out_dir) {
    fs::create_directories(out_dir);
    {
        std::ofstream out(out_dir / "imputation_rows.csv");
        out << "miss_frac,rep,ok,mse_lori,mse_column_mean,error\n";
        for (const auto& r : report.rows) {
            out << format_double(r.miss_frac) << ',' << r.rep << ',' << (r.ok ? 1 : 0)
                << ',' << format_double(r.mse_lori) << ','
                << format_double(r.mse_column_mean) << ',' << r.error << '\n';
        }
    }
    json j;
    j["n_failures"] = report.n_failures;
    json summary = json::array();
    for (const auto& s : report.summary) {
        summary.push_back({{"miss_frac", s.miss_frac},
                           {"n_ok", s.n_ok},
                           {"median_mse_lori", s.median_mse_lori},
                           {"median_mse_column_mean", s.median_mse_column_mean}});
    }
    j["summary"] = std::move(summary);
    write_text_file(out_dir / "imputation_summary.json", j.dump(2) + "\n");
}

}  // namespace lori
