#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "supercent/errors.hpp"
#include "supercent/inference.hpp"
#include "supercent/solver.hpp"

using namespace supercent;
using testing_support::max_abs;

namespace {

double normal_cdf(double q) { return 0.5 * std::erfc(-q / std::sqrt(2.0)); }

Eigen::MatrixXd projector(const Eigen::MatrixXd& z) {
  return z * (z.transpose() * z).inverse() * z.transpose();
}

// The closed form written out with explicit n×n projectors.
std::pair<double, double> brute_se_beta(const Eigen::VectorXd& u, const Eigen::VectorXd& v,
                                        const Eigen::MatrixXd& x, double bu, double bv, double d,
                                        double sy2, double sa2) {
  const Eigen::Index n = u.size();
  const Eigen::MatrixXd i = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd mx = i - projector(x);
  const Eigen::VectorXd ut = mx * u, vt = mx * v;
  const double uu = ut.squaredNorm(), vv = vt.squaredNorm(), uv = ut.dot(vt);
  const double c = uu * vv - uv * uv;
  const double ut_pv = ut.dot((i - projector(v)) * ut);
  const double vt_pu = vt.dot((i - projector(u)) * vt);
  const double k = sa2 / (c * c * d * d * double(n));
  const double var_u = sy2 * vv / c + k * (bv * bv * vv * vv * ut_pv + bu * bu * uv * uv * vt_pu);
  const double var_v = sy2 * uu / c + k * (bu * bu * uu * uu * vt_pu + bv * bv * uv * uv * ut_pv);
  return {std::sqrt(var_u), std::sqrt(var_v)};
}

struct Fixture {
  UnifiedModelParams truth;
  Eigen::MatrixXd x;
};

Fixture fixture(Eigen::Index n, double sa, double sy, std::uint64_t seed) {
  Rng rng = make_stream(seed);
  auto cfg = testing_support::small_config(sa, sy, n);
  auto [truth, data] = simulate(cfg, rng);
  return {truth, data.x()};
}

Dataset redraw(const Fixture& f, Rng& rng) {
  const auto& t = f.truth;
  const Eigen::Index n = t.n();
  const Eigen::MatrixXd a =
      t.d * t.u * t.v.transpose() + t.sigma_a * testing_support::gaussian(n, n, rng);
  const Eigen::VectorXd y = f.x * t.beta_x + t.u * t.beta_u + t.v * t.beta_v +
                            t.sigma_y * testing_support::gaussian(n, 1, rng).col(0);
  return Dataset(a, f.x, y);
}

}  // namespace

TEST_CASE("normal quantile") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(normal_quantile(0.5) == doctest::Approx(0.0));
  for (double p : {1e-10, 1e-4, 0.02, 0.3, 0.7, 0.99, 1 - 1e-9}) {
    CHECK(std::abs(normal_cdf(normal_quantile(p)) - p) < 1e-12 * std::max(1.0, 1 / p) * p + 1e-15);
    CHECK(normal_quantile(p) == doctest::Approx(-normal_quantile(1 - p)).epsilon(1e-8));
  }
  CHECK_THROWS_AS(normal_quantile(0.0), InputError);
  CHECK_THROWS_AS(normal_quantile(1.0), InputError);
}

TEST_CASE("interval construction") {
  const auto ci = make_interval("beta_u", 2.0, 0.5, 0.05, CiVariant::ts);
  CHECK(ci.width() == doctest::Approx(2 * 1.959963984540054 * 0.5));
  CHECK(ci.covers(2.9));
  CHECK_FALSE(ci.covers(3.0));
  CHECK_THROWS_AS(make_interval("b", 0, 1, 1.5, CiVariant::ts), InputError);
  for (auto v : {CiVariant::ts_adhoc, CiVariant::ts_oracle, CiVariant::ts, CiVariant::sc_oracle,
                 CiVariant::sc_cv})
    CHECK(ci_variant_from_string(to_string(v)) == v);
  CHECK(to_string(CiVariant::sc_cv) == "sc-cv");
  CHECK_THROWS_AS(ci_variant_from_string("bogus"), InputError);
}

TEST_CASE("coefficient standard errors match explicit projector algebra") {
  for (int rep = 0; rep < 5; ++rep) {
    const auto f = fixture(24, 0.7, 0.4, 60 + rep);
    const auto& t = f.truth;
    const auto se = se_beta_closed_form(t.u, t.v, f.x, t.beta_u, t.beta_v, t.d, 0.16, 0.49);
    const auto [bu, bv] = brute_se_beta(t.u, t.v, f.x, t.beta_u, t.beta_v, t.d, 0.16, 0.49);
    CHECK(se.se_bu == doctest::Approx(bu).epsilon(1e-10));
    CHECK(se.se_bv == doctest::Approx(bv).epsilon(1e-10));
    CHECK(se.cov_bx.rows() == 3);
    CHECK(se.cov_bx.isApprox(se.cov_bx.transpose()));
  }
}

TEST_CASE("coefficient standard errors without network noise") {
  const auto f = fixture(32, 0.0, 0.5, 61);
  const auto& t = f.truth;
  const auto se = se_beta_closed_form(t.u, t.v, f.x, t.beta_u, t.beta_v, t.d, 0.25, 0.0);
  Eigen::MatrixXd w(32, 5);
  w << f.x, t.u, t.v;
  const Eigen::MatrixXd cov = 0.25 * (w.transpose() * w).inverse();
  CHECK(se.se_bu == doctest::Approx(std::sqrt(cov(3, 3))).epsilon(1e-10));
  CHECK(se.se_bv == doctest::Approx(std::sqrt(cov(4, 4))).epsilon(1e-10));
  CHECK(max_abs(se.cov_bx - cov.topLeftCorner(3, 3)) < 1e-10);
}

TEST_CASE("coefficient standard errors are symmetric under swapping u and v") {
  const auto f = fixture(20, 0.5, 0.5, 62);
  const auto& t = f.truth;
  const auto a = se_beta_closed_form(t.u, t.v, f.x, 4.0, 1.5, 1.0, 0.3, 0.2);
  const auto b = se_beta_closed_form(t.v, t.u, f.x, 1.5, 4.0, 1.0, 0.3, 0.2);
  CHECK(a.se_bu == doctest::Approx(b.se_bv).epsilon(1e-12));
  CHECK(a.se_bv == doctest::Approx(b.se_bu).epsilon(1e-12));
  CHECK(max_abs(a.cov_bx - b.cov_bx) < 1e-12);
  CHECK_THROWS_AS(se_beta_closed_form(t.u, t.u, f.x, 1, 1, 1, 0.3, 0.2), DegenerateError);
}

TEST_CASE("two-stage coefficient spread matches its standard error") {
  const auto f = fixture(64, 0.5, 0.5, 63);
  const auto& t = f.truth;
  const auto se = se_beta_closed_form(t.u, t.v, f.x, t.beta_u, t.beta_v, t.d,
                                      t.sigma_y * t.sigma_y, t.sigma_a * t.sigma_a);
  const int reps = 10000;
  double su = 0, su2 = 0, sv = 0, sv2 = 0;
  Rng rng = make_stream(64);
  for (int r = 0; r < reps; ++r) {
    auto fit = fit_two_stage(redraw(f, rng));
    const double a = testing_support::sign_to(fit.u_hat, t.u) * fit.beta_u_hat;
    const double b = testing_support::sign_to(fit.v_hat, t.v) * fit.beta_v_hat;
    su += a, su2 += a * a, sv += b, sv2 += b * b;
  }
  const double sd_u = std::sqrt((su2 - su * su / reps) / (reps - 1));
  const double sd_v = std::sqrt((sv2 - sv * sv / reps) / (reps - 1));
  MESSAGE("sd/se: " << sd_u / se.se_bu << " " << sd_v / se.se_bv);
  CHECK(sd_u / se.se_bu == doctest::Approx(1.0).epsilon(0.1));
  CHECK(sd_v / se.se_bv == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("coefficient intervals by variant") {
  Rng rng = make_stream(65);
  const auto [truth, data] = simulate(testing_support::small_config(0.5, 0.5), rng);
  const auto ts = align_signs(fit_two_stage(data));
  SolverSettings s;
  s.lambda = lambda_oracle(truth);
  const auto sc = fit_supercent(data, s, ts);
  for (auto v : {CiVariant::ts_adhoc, CiVariant::ts_oracle, CiVariant::ts, CiVariant::sc_oracle,
                 CiVariant::sc_cv}) {
    const auto cis = ci_beta(data, ts, &sc, &truth, v, 0.1);
    REQUIRE(cis.size() == 5);
    CHECK(cis[0].name == "beta_u");
    CHECK(cis[1].name == "beta_v");
    CHECK(cis[4].name == "beta_x[2]");
    for (const auto& ci : cis) {
      CHECK(ci.width() == doctest::Approx(2 * normal_quantile(0.95) * ci.se));
      CHECK(ci.variant == v);
    }
  }
  const auto sc_ci = ci_beta(data, ts, &sc, &truth, CiVariant::sc_cv, 0.05);
  CHECK(sc_ci[0].estimate == sc.beta_u_hat);
  CHECK_THROWS_AS(ci_beta(data, ts, &sc, nullptr, CiVariant::ts_oracle, 0.05), InputError);
  CHECK_THROWS_AS(ci_beta(data, ts, nullptr, &truth, CiVariant::sc_cv, 0.05), InputError);
}

TEST_CASE("ad hoc intervals are narrower than corrected ones on average") {
  double adhoc = 0, corrected = 0;
  for (int rep = 0; rep < 200; ++rep) {
    Rng rng = make_stream(66, 0, rep);
    auto cfg = toy_config();
    cfg.sigma_a = 0.25;
    const auto [truth, data] = simulate(cfg, rng);
    const auto ts = fit_two_stage(data);
    adhoc += ci_beta(data, ts, nullptr, nullptr, CiVariant::ts_adhoc, 0.05)[0].width();
    corrected += ci_beta(data, ts, nullptr, nullptr, CiVariant::ts, 0.05)[0].width();
  }
  CHECK(adhoc <= corrected);
}

TEST_CASE("two-stage network standard errors") {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(4);
  u(0) = 2;
  const Eigen::VectorXd v = Eigen::VectorXd::Ones(4);
  const auto se = se_network_entries_two_stage(u, v, 1.0);
  CHECK(se.se(0, 0) == doctest::Approx(1.0));
  CHECK(se.se(1, 0) == doctest::Approx(0.5));

  const auto f = fixture(16, 1.0, 0.5, 67);
  const auto full = se_network_entries_two_stage(f.truth.u, f.truth.v, 2.0);
  CHECK(full.se.array().square().sum() == doctest::Approx(2.0 * (2 * 16 - 1)).epsilon(1e-12));
  CHECK(se_network_entries_two_stage(f.truth.u, f.truth.v, 0.0).se.isZero());
}

TEST_CASE("joint network standard errors reduce to two-stage") {
  const auto f = fixture(24, 0.5, 0.5, 68);
  InferencePoint pt = point_from_truth(f.truth);
  const auto ts = se_network_entries_two_stage(pt.u, pt.v, pt.sigma_a_sq);
  const auto big = se_network_entries_supercent(pt, f.x, 1e9);
  CHECK(max_abs(big.se - ts.se) < 1e-3 * ts.se.maxCoeff());

  pt.beta_u = pt.beta_v = 0;
  CHECK(max_abs(se_network_entries_supercent(pt, f.x, 3.0).se - ts.se) < 1e-12);

  pt = point_from_truth(f.truth);
  pt.sigma_a_sq = 0;
  pt.sigma_y_sq = 0;
  CHECK(se_network_entries_supercent(pt, f.x, 3.0).se.isZero());
}

TEST_CASE("joint network standard errors do not exceed two-stage at the oracle penalty") {
  const auto f = fixture(32, 1.0, 0.25, 69);
  const InferencePoint pt = point_from_truth(f.truth);
  const auto ts = se_network_entries_two_stage(pt.u, pt.v, pt.sigma_a_sq);
  const auto sc = se_network_entries_supercent(pt, f.x, lambda_oracle(f.truth));
  CHECK(sc.se.array().square().sum() < ts.se.array().square().sum());
}

TEST_CASE("centrality standard errors") {
  Eigen::VectorXd u = Eigen::VectorXd::Zero(9);
  u(0) = 3;
  const Eigen::VectorXd v = Eigen::VectorXd::Ones(9);
  const auto se = se_centrality_entries_two_stage(u, v, 1.0, 1.0);
  CHECK(se.se_u(0) == doctest::Approx(0.0));
  CHECK(se.se_u(1) == doctest::Approx(1.0 / 3.0));

  const auto f = fixture(32, 1.0, 0.5, 70);
  const auto& t = f.truth;
  const auto full = se_centrality_entries_two_stage(t.u, t.v, t.d, 1.0);
  CHECK(full.se_u.squaredNorm() / 32 == doctest::Approx(31.0 / (32.0 * 32.0)).epsilon(1e-12));

  InferencePoint pt = point_from_truth(t);
  const auto big = se_centrality_entries_supercent(pt, f.x, 1e9);
  CHECK(max_abs(big.se_u - full.se_u) < 1e-3 * full.se_u.maxCoeff());
  pt.beta_u = pt.beta_v = 0;
  CHECK(max_abs(se_centrality_entries_supercent(pt, f.x, 2.0).se_u - full.se_u) < 1e-12);
}

TEST_CASE("two-stage centrality spread matches its standard error") {
  const auto f = fixture(32, 1.0, 0.5, 71);
  const auto& t = f.truth;
  const auto se = se_centrality_entries_two_stage(t.u, t.v, t.d, t.sigma_a * t.sigma_a);
  const int reps = 4000;
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(32), s2 = Eigen::VectorXd::Zero(32);
  Rng rng = make_stream(72);
  for (int r = 0; r < reps; ++r) {
    const auto fit = fit_two_stage(redraw(f, rng));
    const Eigen::VectorXd uh = testing_support::sign_to(fit.u_hat, t.u) * fit.u_hat;
    s1 += uh;
    s2 += uh.cwiseProduct(uh);
  }
  const Eigen::ArrayXd sd = ((s2.array() - s1.array().square() / reps) / (reps - 1)).sqrt();
  const Eigen::ArrayXd ratio = sd / se.se_u.array();
  MESSAGE("centrality sd/se range: " << ratio.minCoeff() << " " << ratio.maxCoeff());
  CHECK((ratio - 1).abs().maxCoeff() < 0.15);
}

TEST_CASE("network coverage summary") {
  const Eigen::MatrixXd a0 = Eigen::MatrixXd::Ones(2, 2);
  NetworkEntryInference se{Eigen::MatrixXd::Constant(2, 2, 0.5), 0.05};
  Eigen::MatrixXd a_hat = a0;
  a_hat(0, 0) = 3;
  const auto c = network_coverage(a_hat, a0, se);
  CHECK(c.coverage == doctest::Approx(0.75));
  CHECK(c.mean_width == doctest::Approx(2 * 1.959963984540054 * 0.5));
}
