#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "supercent/inference.hpp"
#include "supercent/model.hpp"

namespace supercent {

/// Squared sine of the angle between ẑ and z: 1 − (ẑᵀz)²/(‖ẑ‖²‖z‖²).
double loss_subspace(const Eigen::VectorXd& z_hat, const Eigen::VectorXd& z);

/// ‖Â − A₀‖²_F / ‖A₀‖²_F.
double loss_network(const Eigen::MatrixXd& a_hat, const Eigen::MatrixXd& a0);

/// (b̂ − b)²/b². Throws DegenerateError for b = 0.
double loss_coef(double b_hat, double b);

enum class Estimator { two_stage, sc_oracle, sc_plugin, sc_cv };

std::string to_string(Estimator e);
Estimator estimator_from_string(const std::string& s);

struct ExperimentSpec {
  SimulationConfig base;
  std::vector<double> sigma_a{0.25};
  std::vector<double> sigma_y{0.25};
  std::vector<double> beta_u{1.0};
  std::vector<Estimator> estimators{Estimator::two_stage, Estimator::sc_oracle,
                                    Estimator::sc_plugin, Estimator::sc_cv};
  std::vector<CiVariant> ci_variants{CiVariant::ts_adhoc, CiVariant::ts_oracle, CiVariant::ts,
                                     CiVariant::sc_oracle, CiVariant::sc_cv};
  int replications = 200;
  double alpha = 0.05;
  std::uint64_t master_seed = 20210101;
  int parallelism = 1;

  bool network_inference = true;  // per-entry CIs for A₀
  bool theory_overlay = true;     // closed-form rate rows per config
  double solver_tol = 1e-4;
  int solver_max_iter = 1000;
  int k_folds = 10;

  void validate() const;
};

struct ConfigPoint {
  double sigma_a = 0.0;
  double sigma_y = 0.0;
  double beta_u = 0.0;
};

// Sweep order: sigma_a outermost, then sigma_y, then beta_u.
std::vector<ConfigPoint> sweep_points(const ExperimentSpec& spec);

struct MetricKey {
  std::string estimator;
  std::string metric;
};

/// Per-replication values, one slot per entry of PanelRaw::keys; NaN marks a
/// failed estimator or an undefined metric.
struct PanelRaw {
  std::vector<ConfigPoint> configs;
  std::vector<MetricKey> keys;
  std::vector<std::vector<std::vector<double>>> values;  // [config][replication][key]

  // Values of one key across replications of a config, NaNs included.
  std::vector<double> series(std::size_t config, const std::string& estimator,
                             const std::string& metric) const;
};

struct MetricRow {
  double sigma_a = 0.0;
  double sigma_y = 0.0;
  double beta_u = 0.0;
  std::string estimator;
  std::string metric;
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;
  double q05 = 0.0;
  double q95 = 0.0;
  int n_ok = 0;
  int n_fail = 0;
};

struct MetricsTable {
  std::vector<MetricRow> rows;

  // Throws InputError when absent.
  const MetricRow& at(const ConfigPoint& config, const std::string& estimator,
                      const std::string& metric) const;
};

/// Generates and fits every replication; deterministic in master_seed for any
/// parallelism.
PanelRaw run_panel_raw(const ExperimentSpec& spec);

/// Ordered reduction of the raw values. Coverage metrics gain a companion
/// "<metric>_mcse" row holding √(p̂(1−p̂)/R); theory rows carry n_ok = 0.
MetricsTable aggregate(const ExperimentSpec& spec, const PanelRaw& raw);

MetricsTable run_panel(const ExperimentSpec& spec);

// Sample summary used for every row: mean, median, sd (n−1), 5% and 95%
// quantiles by linear interpolation. Ignores NaNs.
MetricRow summarize(std::vector<double> values);

std::vector<double> toy_sigma_a_grid();

ExperimentSpec toy_spec(const std::vector<double>& sigma_a_grid, int replications,
                        std::uint64_t seed);

/// Introductory toy experiment: two-stage against cross-validated SuperCENT
/// over a network-noise grid.
MetricsTable toy_experiment(const std::vector<double>& sigma_a_grid, int replications,
                            std::uint64_t seed, int parallelism = 1);

/// Named panels: "toy", "consistent" (σ_a ∈ 2^{−4,−2}) and "inconsistent"
/// (σ_a ∈ 2^{0,2}), both crossing σ_y ∈ 2^{−4,−2,0} and β_u ∈ 2^{0,2,4}.
ExperimentSpec preset_spec(const std::string& name, int replications, std::uint64_t seed,
                           int parallelism);

}  // namespace supercent
