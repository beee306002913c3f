#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "supercent/backtest.hpp"
#include "supercent/harness.hpp"
#include "supercent/inference.hpp"
#include "supercent/model.hpp"
#include "supercent/solver.hpp"
#include "supercent/two_stage.hpp"

namespace supercent {

// Shortest decimal that round-trips, always with '.' as separator.
std::string format_double(double x);

// Whole-cell parse; row and col are 1-based and only used in the message.
double parse_double(std::string_view cell, std::size_t row, std::size_t col);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

/// Headerless comma-separated numbers, one matrix row per line. Blank trailing
/// lines are ignored; ragged rows raise ParseError naming the row.
Eigen::MatrixXd parse_csv_matrix(std::string_view text, std::string_view source = "csv");
std::string format_csv_matrix(const Eigen::MatrixXd& m);

Eigen::MatrixXd read_csv_matrix(const std::filesystem::path& path);
void write_csv_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m);

struct DatasetFiles {
  Dataset data;
  std::optional<UnifiedModelParams> truth;
  std::uint64_t seed = 0;
};

/// A.csv, X.csv, y.csv and manifest.json {n, p, seed, params}. params holds
/// the generating truth (including u and v) when known, otherwise null.
void write_dataset(const std::filesystem::path& dir, const Dataset& data,
                   const UnifiedModelParams* truth, std::uint64_t seed);
DatasetFiles read_dataset(const std::filesystem::path& dir);

std::string fit_to_json(const FitResult& fit);
FitResult fit_from_json(std::string_view text);

// lambda, fold, sse, status (ok or failed).
std::string format_cv_table(const CvOutcome& outcome);
std::string selection_to_json(const CvOutcome& outcome, const LambdaSelection& selection);

std::string inference_report_json(CiVariant variant, double alpha,
                                  const std::vector<CoefficientInference>& coefficients,
                                  const std::optional<std::string>& network_se_csv_path);

std::string format_metrics_csv(const MetricsTable& table);

/// One SVG line chart per call: median of `metric` against log₂ σ_a, one
/// series per (estimator, σ_y, β_u).
std::string metrics_svg(const MetricsTable& table, const std::string& metric);

// period, asset, score, next_return with a header row.
std::vector<BacktestRecord> parse_backtest_csv(std::string_view text);
std::string format_backtest_csv(const BacktestResult& result);
std::string backtest_summary_json(const BacktestResult& result);

}  // namespace supercent
