#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lori/analysis.hpp"
#include "lori/lambda_select.hpp"
#include "lori/simbench.hpp"
#include "lori/solver.hpp"
#include "lori/types.hpp"

namespace lori {

/// Reads a count CSV: first row column names, first column row names, empty
/// cells or the literal NA are missing, everything else must parse as a
/// nonnegative integer. Rejects ragged rows and fully missing rows/columns,
/// naming the offending cell or line.
CountTable read_count_csv(const std::filesystem::path& path);

void write_count_csv(const std::filesystem::path& path, const CountTable& table);

/// Reads a covariate CSV, aligns rows to expected_ids (reordering allowed),
/// and standardizes the columns. Missing values and constant columns are
/// rejected.
struct CovariateMatrix {
    Matrix values;  // standardized, rows in expected_ids order
    Standardization std_record;
    std::vector<std::string> col_names;
};

CovariateMatrix read_covariate_csv(const std::filesystem::path& path,
                                   const std::vector<std::string>& expected_ids);

struct ManifestEntry {
    std::string filename;
    std::uint64_t checksum = 0;  // FNV-1a 64 of the file bytes
    std::uint64_t bytes = 0;
};

struct FileManifest {
    std::vector<ManifestEntry> entries;
};

/// Serializes a fit and its companions into out_dir: params.json, theta.csv,
/// imputed.csv, completed.csv, biplot.csv, correlations.csv, the four
/// multiplicative-decomposition factors, the selection report when present,
/// and manifest.json listing every file with its checksum.
FileManifest write_results(const CountTable& table, const CovariateSet& cov,
                           const FitResult& fit,
                           const std::optional<SelectionReport>& selection,
                           const std::filesystem::path& out_dir);

/// Round-trips the parameters emitted by write_results.
ModelParams read_params_json(const std::filesystem::path& path);

std::uint64_t fnv1a_checksum(const std::filesystem::path& path);

void write_estimation_report(const EstimationBenchReport& report,
                             const std::filesystem::path& out_dir);
void write_imputation_report(const ImputationBenchReport& report,
                             const std::filesystem::path& out_dir);

/// Formats a double so that parsing it back recovers the exact value.
std::string format_double(double v);

int run_cli(int argc, char** argv);

}  // namespace lori
