#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "supercent/model.hpp"
#include "supercent/two_stage.hpp"

namespace supercent {

/// Inverse standard normal CDF. Acklam's rational approximation refined by one
/// Halley step against std::erfc; absolute error below 1e-9 on (0, 1).
double normal_quantile(double prob);

enum class CiVariant { ts_adhoc, ts_oracle, ts, sc_oracle, sc_cv };

std::string to_string(CiVariant v);
CiVariant ci_variant_from_string(const std::string& s);

struct CoefficientInference {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double alpha = 0.05;
  CiVariant variant = CiVariant::ts;

  double width() const { return ci_hi - ci_lo; }
  bool covers(double truth) const { return ci_lo <= truth && truth <= ci_hi; }
};

// Interval estimate ± z_{1−α/2}·se.
CoefficientInference make_interval(std::string name, double estimate, double se, double alpha,
                                   CiVariant variant);

struct BetaStandardErrors {
  double se_bu = 0.0;
  double se_bv = 0.0;
  Eigen::MatrixXd cov_bx;
};

/// Asymptotic standard errors of (β̂_u, β̂_v) and covariance of β̂_x for the
/// two-stage estimator, which also serve the joint estimator. With ũ, ṽ the
/// centralities projected off X and c = ũᵀũ·ṽᵀṽ − (ũᵀṽ)²:
///
///   Var β̂_u = σ_y² ṽᵀṽ / c
///           + σ_a² / (c² d² n) · [β_v² (ṽᵀṽ)² ũᵀ(I−P_v)ũ + β_u² (ũᵀṽ)² ṽᵀ(I−P_u)ṽ]
///
/// and symmetrically for β̂_v.
BetaStandardErrors se_beta_closed_form(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                                       const Eigen::MatrixXd& x, double beta_u, double beta_v,
                                       double d, double sigma_y_sq, double sigma_a_sq);

/// Parameter values at which the closed forms are evaluated: truth for the
/// oracle variants, estimates for the plug-in ones.
struct InferencePoint {
  Eigen::VectorXd u;
  Eigen::VectorXd v;
  double d = 1.0;
  double beta_u = 0.0;
  double beta_v = 0.0;
  double sigma_y_sq = 0.0;
  double sigma_a_sq = 0.0;
};

InferencePoint point_from_truth(const UnifiedModelParams& params);
InferencePoint point_from_fit(const FitResult& fit);

/// Intervals for β_u, β_v and each β_x component under the chosen variant.
/// Oracle variants require `truth`; SuperCENT variants require `sc_fit`.
std::vector<CoefficientInference> ci_beta(const Dataset& data, const FitResult& ts_fit,
                                          const FitResult* sc_fit, const UnifiedModelParams* truth,
                                          CiVariant variant, double alpha);

struct NetworkEntryInference {
  Eigen::MatrixXd se;
  double alpha = 0.05;
};

/// Two-stage: Var(Â_ij) = σ_a²(h_i + g_j − h_i g_j), h_i = u_i²/n, g_j = v_j²/n.
NetworkEntryInference se_network_entries_two_stage(const Eigen::VectorXd& u,
                                                   const Eigen::VectorXd& v, double sigma_a_sq,
                                                   double alpha = 0.05);

/// Joint estimator at tuning parameter λ. Assembled from the first-order
/// expansion Â − A₀ ≈ d·δu·vᵀ + d·u·δvᵀ + P_u E P_v with explicit
/// projector algebra; the only n×n work is I − P_(X,u,v).
NetworkEntryInference se_network_entries_supercent(const InferencePoint& point,
                                                   const Eigen::MatrixXd& x, double lambda,
                                                   double alpha = 0.05);

struct CentralityStandardErrors {
  Eigen::VectorXd se_u;
  Eigen::VectorXd se_v;
};

CentralityStandardErrors se_centrality_entries_two_stage(const Eigen::VectorXd& u,
                                                         const Eigen::VectorXd& v, double d,
                                                         double sigma_a_sq);

CentralityStandardErrors se_centrality_entries_supercent(const InferencePoint& point,
                                                         const Eigen::MatrixXd& x, double lambda);

struct NetworkCoverage {
  double coverage = 0.0;    // fraction of entries whose interval holds A₀
  double mean_width = 0.0;  // average interval width
};

NetworkCoverage network_coverage(const Eigen::MatrixXd& a_hat, const Eigen::MatrixXd& a0,
                                 const NetworkEntryInference& se);

}  // namespace supercent
