#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "supercent/model.hpp"
#include "supercent/numeric.hpp"

namespace supercent {

enum class Method { two_stage, supercent };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

/// Estimates produced by either estimator. Centralities are scaled to norm √n
/// and signs are canonical (see align_signs).
struct FitResult {
  Method method = Method::two_stage;
  double d_hat = 0.0;
  Eigen::VectorXd u_hat;
  Eigen::VectorXd v_hat;
  Eigen::VectorXd beta_x_hat;
  double beta_u_hat = 0.0;
  double beta_v_hat = 0.0;
  double sigma_y_hat_sq = 0.0;
  double sigma_a_hat_sq = 0.0;
  int iterations = 0;
  bool converged = true;

  // Not part of the serialized schema.
  double lambda = 0.0;
  bool symmetric = false;
  std::vector<double> objective_trace;

  Eigen::Index n() const { return u_hat.size(); }
  Eigen::MatrixXd a_hat() const { return d_hat * u_hat * v_hat.transpose(); }
  Eigen::VectorXd fitted(const Eigen::MatrixXd& x) const;
};

struct SvdOptions {
  double tol = 1e-12;
  int max_iter = 20000;
};

/// SVD of A for the centralities, then OLS of y on [X û v̂].
FitResult fit_two_stage(const Dataset& data, const SvdOptions& svd = {});

// Same, from a leading triple of data.a() computed elsewhere.
FitResult fit_two_stage(const Dataset& data, const SingularTriple<double>& leading);

// Rank-one first stage only: d̂ = σ₁/n and û, v̂ rescaled to √n.
FitResult first_stage(const SingularTriple<double>& leading);

/// Canonical signs: d̂ > 0 and the largest-magnitude entry of û positive,
/// with β̂_u and β̂_v flipped so that ûβ̂_u and v̂β̂_v are unchanged.
FitResult align_signs(FitResult fit);

// Fills sigma_y_hat_sq (RSS/(n−p−2)) and sigma_a_hat_sq (‖Â−A‖²_F/n²).
void fill_noise_estimates(FitResult& fit, const Dataset& data);

struct PlimBias {
  double beta_u;
  double beta_v;
};

/// Probability limits of the two-stage coefficients under measurement error in
/// the estimated centralities, for noise-to-signal κ and cor(u, v) = ρ.
PlimBias plim_bias(double beta_u, double beta_v, double rho, double kappa);

struct TwoStageRates {
  double mse_u;      // E‖û − u‖²/n
  double mse_v;
  double mse_a_rel;  // E‖Â − A₀‖²_F / ‖A₀‖²_F
  double var_bu;
  double var_bv;
};

/// Leading-order two-stage rates. Coefficient variances need the design X.
TwoStageRates two_stage_rate_oracle(const UnifiedModelParams& params, const Eigen::MatrixXd& x);

}  // namespace supercent
