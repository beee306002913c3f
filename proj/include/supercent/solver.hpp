#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "supercent/model.hpp"
#include "supercent/two_stage.hpp"

namespace supercent {

struct SolverSettings {
  double lambda = 1.0;
  double tol = 1e-4;  // on max(‖P_u(t) − P_u(t−1)‖₂, ‖P_v(t) − P_v(t−1)‖₂)
  int max_iter = 1000;
  bool record_trace = false;
  SvdOptions svd;

  void validate() const;
};

/// (1/n)‖y − Xβ_x − uβ_u − vβ_v‖² + (λ/n²)‖A − d·u·vᵀ‖²_F.
double supercent_objective(const Dataset& data, double d, const Eigen::VectorXd& u,
                           const Eigen::VectorXd& v, const Eigen::VectorXd& beta_x, double beta_u,
                           double beta_v, double lambda);

// Objective at a fit; symmetric fits use the undirected form with v = u, β_v = 0.
double supercent_objective(const Dataset& data, const FitResult& fit, double lambda);

/// Block-coordinate solver for the joint objective. Each sweep refits β by
/// OLS on (X, u, v), sets d = uᵀAv/n², then updates u and v in closed form
/// and renormalizes them to √n. Starts from the rank-one SVD of A unless an
/// initial fit is supplied. Exhausting max_iter returns converged = false.
FitResult fit_supercent(const Dataset& data, const SolverSettings& settings);
FitResult fit_supercent(const Dataset& data, const SolverSettings& settings,
                        const FitResult& init);

/// Undirected variant: A symmetric, v ≡ u, and the u-step solves
/// (β_u² + 2λd² − 2λd·A/n) u = β_u (y − Xβ_x), the stationarity condition of the
/// undirected objective under ‖u‖² = n.
FitResult fit_supercent_symmetric(const Dataset& data, const SolverSettings& settings);

double lambda_oracle(const UnifiedModelParams& params);
double lambda_plugin(const FitResult& ts_fit);

double delta_ts_sc(const UnifiedModelParams& params, double lambda);

struct SupercentRates {
  double mse_u;
  double mse_v;
  double mse_a_rel;
};

SupercentRates supercent_rate_oracle(const UnifiedModelParams& params, double lambda);

enum class LambdaMethod { oracle, plugin, cv, fixed };

std::string to_string(LambdaMethod m);

struct CvCell {
  double lambda = 0.0;
  int fold = 0;
  double sse = 0.0;
  bool ok = false;
};

struct LambdaSelection {
  LambdaMethod method = LambdaMethod::cv;
  std::vector<double> grid;
  int k_folds = 10;

  void validate() const;
};

struct CvOutcome {
  double lambda_min = 0.0;
  std::vector<double> total_sse;  // per grid point; NaN when any fold failed
  std::vector<CvCell> table;
};

/// λ̂·2^k for k = −5, −4.5, …, 5 (21 points).
std::vector<double> default_lambda_grid(double anchor);

struct CrossSectionSplit {
  std::vector<int> fold_of;  // per node, in [0, K)

  std::vector<Eigen::Index> train(int fold) const;
  std::vector<Eigen::Index> validation(int fold) const;
};

/// Uniform random partition: nodes are shuffled and dealt round-robin.
CrossSectionSplit make_split(Eigen::Index n, int k_folds, Rng& rng);

/// K-fold cross-validation over selection.grid. Each training fold is fit on its
/// induced sub-network; validation centralities come from the SVD of the full
/// network, aligned to the training fit and rescaled.
CvOutcome cross_validate_lambda(const Dataset& data, const LambdaSelection& selection,
                                const SolverSettings& settings, Rng& rng);

// Same with an explicit split.
CvOutcome cross_validate_lambda(const Dataset& data, const LambdaSelection& selection,
                                const SolverSettings& settings, const CrossSectionSplit& split);

}  // namespace supercent
