#include "supercent/inference.hpp"

#include <array>
#include <cmath>
#include <numbers>

#include "supercent/errors.hpp"
#include "supercent/numeric.hpp"

namespace supercent {

double normal_quantile(double prob) {
  if (!(prob > 0.0 && prob < 1.0)) throw InputError("normal_quantile: probability must be in (0,1)");
  static constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                           -2.759285104469687e+02, 1.383577518672690e+02,
                                           -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                           -1.556989798598866e+02, 6.680131188771972e+01,
                                           -1.328068155288572e+01};
  static constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                           -2.400758277161838e+00, -2.549732539343734e+00,
                                           4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                           2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (prob < p_low) {
    const double q = std::sqrt(-2 * std::log(prob));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else if (prob <= 1 - p_low) {
    const double q = prob - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  } else {
    const double q = std::sqrt(-2 * std::log1p(-prob));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  // Halley refinement.
  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - prob;
  const double u = e * std::sqrt(2 * std::numbers::pi) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

std::string to_string(CiVariant v) {
  switch (v) {
    case CiVariant::ts_adhoc:
      return "ts-adhoc";
    case CiVariant::ts_oracle:
      return "ts-oracle";
    case CiVariant::ts:
      return "ts";
    case CiVariant::sc_oracle:
      return "sc-oracle";
    case CiVariant::sc_cv:
      return "sc-cv";
  }
  return "unknown";
}

CiVariant ci_variant_from_string(const std::string& s) {
  for (CiVariant v : {CiVariant::ts_adhoc, CiVariant::ts_oracle, CiVariant::ts,
                      CiVariant::sc_oracle, CiVariant::sc_cv})
    if (to_string(v) == s) return v;
  throw InputError("unknown CI variant '" + s + "'");
}

CoefficientInference make_interval(std::string name, double estimate, double se, double alpha,
                                   CiVariant variant) {
  if (!(alpha > 0 && alpha < 1)) throw InputError("alpha must be in (0,1)");
  const double half = normal_quantile(1 - alpha / 2) * se;
  return {std::move(name), estimate, se, estimate - half, estimate + half, alpha, variant};
}

BetaStandardErrors se_beta_closed_form(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                                       const Eigen::MatrixXd& x, double beta_u, double beta_v,
                                       double d, double sigma_y_sq, double sigma_a_sq) {
  const double n = static_cast<double>(u.size());
  if (v.size() != u.size() || x.rows() != u.size())
    throw InputError("se_beta_closed_form: dimension mismatch");
  const Eigen::VectorXd ut = project_complement(x, u);
  const Eigen::VectorXd vt = project_complement(x, v);
  const double uu = ut.squaredNorm();
  const double vv = vt.squaredNorm();
  const double uv = ut.dot(vt);
  const double c = uu * vv - uv * uv;
  if (!(c > 1e-14 * uu * vv))
    throw DegenerateError("se_beta_closed_form: projected centralities are collinear");

  // ũᵀ(I − P_v)ũ and ṽᵀ(I − P_u)ṽ.
  const double ut_perp_v = uu - std::pow(ut.dot(v), 2) / v.squaredNorm();
  const double vt_perp_u = vv - std::pow(vt.dot(u), 2) / u.squaredNorm();
  const double bu2 = beta_u * beta_u;
  const double bv2 = beta_v * beta_v;
  const double net = sigma_a_sq / (c * c * d * d * n);

  BetaStandardErrors out;
  const double var_bu =
      sigma_y_sq * vv / c + net * (bv2 * vv * vv * ut_perp_v + bu2 * uv * uv * vt_perp_u);
  const double var_bv =
      sigma_y_sq * uu / c + net * (bu2 * uu * uu * vt_perp_u + bv2 * uv * uv * ut_perp_v);
  out.se_bu = std::sqrt(std::max(0.0, var_bu));
  out.se_bv = std::sqrt(std::max(0.0, var_bv));

  const Eigen::MatrixXd xtx = x.transpose() * x;
  const Eigen::MatrixXd g = xtx.llt().solve(Eigen::MatrixXd::Identity(x.cols(), x.cols()));
  Eigen::MatrixXd xt_uv(x.cols(), 2);
  xt_uv << x.transpose() * u, x.transpose() * v;
  Eigen::Matrix2d c_uv;
  c_uv << uu, uv, uv, vv;
  const Eigen::Matrix2d c_inv = c_uv.inverse();
  const Eigen::Matrix2d extra = Eigen::Vector2d(bv2 * ut_perp_v, bu2 * vt_perp_u).asDiagonal();

  const Eigen::MatrixXd xt_perp_u = xtx - xt_uv.col(0) * xt_uv.col(0).transpose() / u.squaredNorm();
  const Eigen::MatrixXd xt_perp_v = xtx - xt_uv.col(1) * xt_uv.col(1).transpose() / v.squaredNorm();

  const Eigen::MatrixXd part1 = g + g * xt_uv * c_inv * xt_uv.transpose() * g;
  const Eigen::MatrixXd inner =
      bu2 * xt_perp_u + bv2 * xt_perp_v + xt_uv * c_inv * extra * c_inv * xt_uv.transpose();
  out.cov_bx = sigma_y_sq * part1 + sigma_a_sq / (d * d * n) * (g * inner * g);
  return out;
}

InferencePoint point_from_truth(const UnifiedModelParams& params) {
  return {params.u,      params.v,
          params.d,      params.beta_u,
          params.beta_v, params.sigma_y * params.sigma_y,
          params.sigma_a * params.sigma_a};
}

InferencePoint point_from_fit(const FitResult& fit) {
  return {fit.u_hat,       fit.v_hat,          fit.d_hat,         fit.beta_u_hat,
          fit.beta_v_hat, fit.sigma_y_hat_sq, fit.sigma_a_hat_sq};
}

namespace {

std::vector<CoefficientInference> closed_form_intervals(const FitResult& center,
                                                        const InferencePoint& at,
                                                        const Eigen::MatrixXd& x,
                                                        CiVariant variant, double alpha) {
  const auto se = se_beta_closed_form(at.u, at.v, x, at.beta_u, at.beta_v, at.d, at.sigma_y_sq,
                                      at.sigma_a_sq);
  std::vector<CoefficientInference> out;
  out.push_back(make_interval("beta_u", center.beta_u_hat, se.se_bu, alpha, variant));
  out.push_back(make_interval("beta_v", center.beta_v_hat, se.se_bv, alpha, variant));
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    out.push_back(make_interval("beta_x[" + std::to_string(j) + "]", center.beta_x_hat(j),
                                std::sqrt(std::max(0.0, se.cov_bx(j, j))), alpha, variant));
  return out;
}

}  // namespace

std::vector<CoefficientInference> ci_beta(const Dataset& data, const FitResult& ts_fit,
                                          const FitResult* sc_fit, const UnifiedModelParams* truth,
                                          CiVariant variant, double alpha) {
  const bool needs_truth = variant == CiVariant::ts_oracle || variant == CiVariant::sc_oracle;
  const bool needs_sc = variant == CiVariant::sc_oracle || variant == CiVariant::sc_cv;
  if (needs_truth && truth == nullptr)
    throw InputError("ci_beta: variant " + to_string(variant) + " needs the true parameters");
  if (needs_sc && sc_fit == nullptr)
    throw InputError("ci_beta: variant " + to_string(variant) + " needs a SuperCENT fit");

  switch (variant) {
    case CiVariant::ts_adhoc: {
      const auto n = data.n();
      const auto p = data.p();
      Eigen::MatrixXd w(n, p + 2);
      w << data.x(), ts_fit.u_hat, ts_fit.v_hat;
      const Eigen::MatrixXd gram = w.transpose() * w;
      const Eigen::VectorXd var =
          ts_fit.sigma_y_hat_sq *
          gram.llt().solve(Eigen::MatrixXd::Identity(p + 2, p + 2)).diagonal();
      std::vector<CoefficientInference> out;
      out.push_back(make_interval("beta_u", ts_fit.beta_u_hat, std::sqrt(var(p)), alpha, variant));
      out.push_back(
          make_interval("beta_v", ts_fit.beta_v_hat, std::sqrt(var(p + 1)), alpha, variant));
      for (Eigen::Index j = 0; j < p; ++j)
        out.push_back(make_interval("beta_x[" + std::to_string(j) + "]", ts_fit.beta_x_hat(j),
                                    std::sqrt(var(j)), alpha, variant));
      return out;
    }
    case CiVariant::ts_oracle:
      return closed_form_intervals(ts_fit, point_from_truth(*truth), data.x(), variant, alpha);
    case CiVariant::ts:
      return closed_form_intervals(ts_fit, point_from_fit(ts_fit), data.x(), variant, alpha);
    case CiVariant::sc_oracle:
      return closed_form_intervals(*sc_fit, point_from_truth(*truth), data.x(), variant, alpha);
    case CiVariant::sc_cv:
      return closed_form_intervals(*sc_fit, point_from_fit(*sc_fit), data.x(), variant, alpha);
  }
  throw InputError("ci_beta: unknown variant");
}

NetworkEntryInference se_network_entries_two_stage(const Eigen::VectorXd& u,
                                                   const Eigen::VectorXd& v, double sigma_a_sq,
                                                   double alpha) {
  if (u.size() != v.size()) throw InputError("se_network_entries: u and v lengths differ");
  const Eigen::ArrayXd h = u.array().square() / u.squaredNorm();
  const Eigen::ArrayXd g = v.array().square() / v.squaredNorm();
  NetworkEntryInference out;
  out.alpha = alpha;
  out.se.resize(u.size(), v.size());
  for (Eigen::Index j = 0; j < v.size(); ++j)
    out.se.col(j) = (sigma_a_sq * (h + g(j) - h * g(j))).max(0.0).sqrt().matrix();
  return out;
}

namespace {

// I − P_(X,u,v), the residual maker of the augmented design.
Eigen::MatrixXd residual_maker(const Eigen::MatrixXd& x, const Eigen::VectorXd& u,
                               const Eigen::VectorXd& v) {
  const auto n = x.rows();
  Eigen::MatrixXd w(n, x.cols() + 2);
  w << x, u, v;
  require_full_column_rank(w, "supercent inference");
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(w);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, w.cols());
  Eigen::MatrixXd m = -q * q.transpose();
  m.diagonal().array() += 1.0;
  return m;
}

struct SupervisionWeights {
  double s;      // λd² + β_u² + β_v²
  double a_u;    // β_u² / s
  double a_v;    // β_v² / s
  double gamma;  // β_u β_v / s
};

SupervisionWeights supervision_weights(const InferencePoint& pt, double lambda) {
  if (!(lambda > 0)) throw InputError("supercent inference: lambda must be positive");
  const double s = lambda * pt.d * pt.d + pt.beta_u * pt.beta_u + pt.beta_v * pt.beta_v;
  if (!(s > 0)) throw DegenerateError("supercent inference: lambda d^2 + beta^2 vanished");
  return {s, pt.beta_u * pt.beta_u / s, pt.beta_v * pt.beta_v / s, pt.beta_u * pt.beta_v / s};
}

}  // namespace

NetworkEntryInference se_network_entries_supercent(const InferencePoint& pt,
                                                   const Eigen::MatrixXd& x, double lambda,
                                                   double alpha) {
  const auto n = pt.u.size();
  if (pt.v.size() != n || x.rows() != n) throw InputError("se_network_entries: dimension mismatch");
  const double nd = static_cast<double>(n);
  const auto w = supervision_weights(pt, lambda);
  const Eigen::MatrixXd m = residual_maker(x, pt.u, pt.v);
  const Eigen::ArrayXd md = m.diagonal().array();

  const Eigen::ArrayXd h = pt.u.array().square() / nd;
  const Eigen::ArrayXd g = pt.v.array().square() / nd;
  // Diagonals of R_u² and R_v², R_u = (I − P_u) − (β_u²/s)·M.
  const Eigen::ArrayXd ru2 = 1.0 - h - w.a_u * (2.0 - w.a_u) * md;
  const Eigen::ArrayXd rv2 = 1.0 - g - w.a_v * (2.0 - w.a_v) * md;
  const double gamma2 = w.gamma * w.gamma;
  const double cross = 2.0 * w.gamma * (2.0 - w.a_u - w.a_v) / nd;
  const double reg = pt.sigma_y_sq * std::pow(pt.d / w.s, 2);
  const double bu2 = pt.beta_u * pt.beta_u;
  const double bv2 = pt.beta_v * pt.beta_v;
  const double buv2 = 2.0 * pt.beta_u * pt.beta_v;
  const Eigen::ArrayXd ua = pt.u.array();

  NetworkEntryInference out;
  out.alpha = alpha;
  out.se.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double vj = pt.v(j);
    const Eigen::ArrayXd mcol = m.col(j).array();
    const Eigen::ArrayXd net = g(j) * ru2 + h * rv2(j) + h * g(j) +
                               gamma2 * (h * md(j) + g(j) * md) - cross * ua * vj * mcol;
    const Eigen::ArrayXd resp =
        bu2 * vj * vj * md + bv2 * ua.square() * md(j) + buv2 * ua * vj * mcol;
    out.se.col(j) = (pt.sigma_a_sq * net + reg * resp).max(0.0).sqrt().matrix();
  }
  return out;
}

CentralityStandardErrors se_centrality_entries_two_stage(const Eigen::VectorXd& u,
                                                         const Eigen::VectorXd& v, double d,
                                                         double sigma_a_sq) {
  const double n = static_cast<double>(u.size());
  const double scale = sigma_a_sq / (d * d * n);
  return {(scale * (1.0 - u.array().square() / n)).max(0.0).sqrt().matrix(),
          (scale * (1.0 - v.array().square() / n)).max(0.0).sqrt().matrix()};
}

CentralityStandardErrors se_centrality_entries_supercent(const InferencePoint& pt,
                                                         const Eigen::MatrixXd& x, double lambda) {
  const auto n = pt.u.size();
  const double nd = static_cast<double>(n);
  const auto w = supervision_weights(pt, lambda);
  Eigen::MatrixXd design(n, x.cols() + 2);
  design << x, pt.u, pt.v;
  require_full_column_rank(design, "supercent inference");
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, design.cols());
  const Eigen::ArrayXd md = 1.0 - q.rowwise().squaredNorm().array();

  const double net = pt.sigma_a_sq / (pt.d * pt.d * nd);
  const double gamma2 = w.gamma * w.gamma;
  const Eigen::ArrayXd ru2 = 1.0 - pt.u.array().square() / nd - w.a_u * (2.0 - w.a_u) * md;
  const Eigen::ArrayXd rv2 = 1.0 - pt.v.array().square() / nd - w.a_v * (2.0 - w.a_v) * md;
  const double reg_u = pt.sigma_y_sq * std::pow(pt.beta_u / w.s, 2);
  const double reg_v = pt.sigma_y_sq * std::pow(pt.beta_v / w.s, 2);
  return {(reg_u * md + net * (ru2 + gamma2 * md)).max(0.0).sqrt().matrix(),
          (reg_v * md + net * (rv2 + gamma2 * md)).max(0.0).sqrt().matrix()};
}

NetworkCoverage network_coverage(const Eigen::MatrixXd& a_hat, const Eigen::MatrixXd& a0,
                                 const NetworkEntryInference& se) {
  if (a_hat.rows() != a0.rows() || a_hat.cols() != a0.cols() || se.se.rows() != a0.rows() ||
      se.se.cols() != a0.cols())
    throw InputError("network_coverage: shape mismatch");
  const double z = normal_quantile(1 - se.alpha / 2);
  const Eigen::ArrayXXd half = z * se.se.array();
  const double covered = ((a_hat - a0).array().abs() <= half).cast<double>().sum();
  const double count = static_cast<double>(a0.size());
  return {covered / count, 2.0 * half.sum() / count};
}

}  // namespace supercent
