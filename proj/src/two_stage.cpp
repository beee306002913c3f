#include "supercent/two_stage.hpp"

#include <cmath>

#include "supercent/errors.hpp"
#include "supercent/inference.hpp"

namespace supercent {

std::string to_string(Method m) { return m == Method::two_stage ? "two-stage" : "supercent"; }

Method method_from_string(const std::string& s) {
  if (s == "two-stage") return Method::two_stage;
  if (s == "supercent") return Method::supercent;
  throw InputError("unknown method '" + s + "'");
}

Eigen::VectorXd FitResult::fitted(const Eigen::MatrixXd& x) const {
  return x * beta_x_hat + u_hat * beta_u_hat + v_hat * beta_v_hat;
}

FitResult first_stage(const SingularTriple<double>& leading) {
  const auto n = leading.u.size();
  if (leading.v.size() != n) throw InputError("first_stage: expected a square network");
  if (!(leading.d > 0)) throw DegenerateError("two-stage: network is numerically zero");
  const double nd = static_cast<double>(n);
  FitResult fit;
  fit.method = Method::two_stage;
  fit.d_hat = leading.d / nd;
  fit.u_hat = leading.u * std::sqrt(nd);
  fit.v_hat = leading.v * std::sqrt(nd);
  fit.iterations = leading.iterations;
  fit.converged = true;
  return fit;
}

void fill_noise_estimates(FitResult& fit, const Dataset& data) {
  const double n = static_cast<double>(data.n());
  const double dof = n - static_cast<double>(data.p()) - (fit.symmetric ? 1.0 : 2.0);
  fit.sigma_y_hat_sq = (data.y() - fit.fitted(data.x())).squaredNorm() / dof;
  fit.sigma_a_hat_sq = (fit.a_hat() - data.a()).squaredNorm() / (n * n);
}

FitResult fit_two_stage(const Dataset& data, const SingularTriple<double>& leading) {
  if (leading.u.size() != data.n()) throw InputError("fit_two_stage: triple does not match data");
  FitResult fit = first_stage(leading);
  const auto n = data.n();
  const auto p = data.p();
  Eigen::MatrixXd w(n, p + 2);
  w << data.x(), fit.u_hat, fit.v_hat;
  const Eigen::VectorXd beta = ols_fit(w, data.y());
  fit.beta_x_hat = beta.head(p);
  fit.beta_u_hat = beta(p);
  fit.beta_v_hat = beta(p + 1);
  fit = align_signs(std::move(fit));
  fill_noise_estimates(fit, data);
  return fit;
}

FitResult fit_two_stage(const Dataset& data, const SvdOptions& svd) {
  return fit_two_stage(data, leading_singular_triple(data.a(), svd.tol, svd.max_iter));
}

FitResult align_signs(FitResult fit) {
  if (fit.u_hat.size() == 0) return fit;
  if (!fit.symmetric && fit.d_hat < 0) {
    fit.d_hat = -fit.d_hat;
    fit.v_hat = -fit.v_hat;
    fit.beta_v_hat = -fit.beta_v_hat;
  }
  Eigen::Index k = 0;
  fit.u_hat.cwiseAbs().maxCoeff(&k);
  if (fit.u_hat(k) < 0) {
    fit.u_hat = -fit.u_hat;
    fit.beta_u_hat = -fit.beta_u_hat;
    if (fit.symmetric) {
      fit.v_hat = fit.u_hat;
    } else {
      fit.v_hat = -fit.v_hat;
      fit.beta_v_hat = -fit.beta_v_hat;
    }
  }
  return fit;
}

PlimBias plim_bias(double beta_u, double beta_v, double rho, double kappa) {
  if (!(kappa >= 0)) throw InputError("plim_bias: kappa must be >= 0");
  if (!(std::abs(rho) < 1)) throw InputError("plim_bias: |rho| must be < 1");
  const double denom = (1 + kappa) * (1 + kappa) - rho * rho;
  if (denom == 0) throw DegenerateError("plim_bias: (1+kappa)^2 = rho^2");
  const double shrink = 1 + kappa - rho * rho;
  return {(shrink * beta_u + kappa * rho * beta_v) / denom,
          (shrink * beta_v + kappa * rho * beta_u) / denom};
}

TwoStageRates two_stage_rate_oracle(const UnifiedModelParams& params, const Eigen::MatrixXd& x) {
  const double n = static_cast<double>(params.n());
  const double noise = params.sigma_a * params.sigma_a / (params.d * params.d * n * n);
  TwoStageRates r;
  r.mse_u = noise * (n - 1);
  r.mse_v = r.mse_u;
  r.mse_a_rel = noise * (2 * n - 1);
  const auto se = se_beta_closed_form(params.u, params.v, x, params.beta_u, params.beta_v, params.d,
                                      params.sigma_y * params.sigma_y,
                                      params.sigma_a * params.sigma_a);
  r.var_bu = se.se_bu * se.se_bu;
  r.var_bv = se.se_bv * se.se_bv;
  return r;
}

}  // namespace supercent
