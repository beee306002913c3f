#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "supercent/errors.hpp"
#include "supercent/two_stage.hpp"

using namespace supercent;
using testing_support::max_abs;

TEST_CASE("two-stage recovers noiseless truth") {
  Rng rng = make_stream(21);
  const auto [truth, data] = simulate(testing_support::small_config(0.0, 0.0), rng);
  const auto fit = align_signs(fit_two_stage(data));
  const double s = testing_support::sign_to(fit.u_hat, truth.u);
  CHECK(max_abs(s * fit.u_hat - truth.u) < 1e-8);
  CHECK(max_abs(s * fit.v_hat - truth.v) < 1e-8);
  CHECK(std::abs(fit.d_hat - truth.d) < 1e-8);
  CHECK(std::abs(s * fit.beta_u_hat - truth.beta_u) < 1e-8);
  CHECK(std::abs(s * fit.beta_v_hat - truth.beta_v) < 1e-8);
  CHECK(max_abs(fit.beta_x_hat - truth.beta_x) < 1e-8);
  CHECK(fit.method == Method::two_stage);
}

TEST_CASE("two-stage fit satisfies its defining equations") {
  Rng rng = make_stream(22);
  const auto [truth, data] = simulate(testing_support::small_config(1.0, 1.0), rng);
  const auto fit = fit_two_stage(data);
  const double n = double(data.n());
  CHECK(fit.u_hat.norm() == doctest::Approx(std::sqrt(n)).epsilon(1e-12));
  CHECK(fit.v_hat.norm() == doctest::Approx(std::sqrt(n)).epsilon(1e-12));
  CHECK(fit.d_hat == doctest::Approx(fit.u_hat.dot(data.a() * fit.v_hat) / (n * n)).epsilon(1e-10));

  Eigen::MatrixXd w(data.n(), data.p() + 2);
  w << data.x(), fit.u_hat, fit.v_hat;
  Eigen::VectorXd b(data.p() + 2);
  b << fit.beta_x_hat, fit.beta_u_hat, fit.beta_v_hat;
  const Eigen::VectorXd r = data.y() - w * b;
  CHECK(max_abs(w.transpose() * r) < 1e-8 * data.y().norm());
  CHECK(fit.sigma_y_hat_sq == doctest::Approx(r.squaredNorm() / (n - data.p() - 2)).epsilon(1e-12));
  CHECK(fit.sigma_a_hat_sq ==
        doctest::Approx((data.a() - fit.a_hat()).squaredNorm() / (n * n)).epsilon(1e-12));
}

TEST_CASE("sign alignment is canonical and preserves products") {
  Rng rng = make_stream(23);
  for (int rep = 0; rep < 100; ++rep) {
    const auto [truth, data] = simulate(testing_support::small_config(1.0, 1.0, 16), rng);
    const auto base = fit_two_stage(data);
    auto flipped = base;
    flipped.u_hat = -flipped.u_hat;
    flipped.beta_u_hat = -flipped.beta_u_hat;
    flipped.v_hat = -flipped.v_hat;
    flipped.beta_v_hat = -flipped.beta_v_hat;
    const auto a1 = align_signs(base);
    const auto a2 = align_signs(flipped);
    CHECK(a1.u_hat == a2.u_hat);
    CHECK(a1.beta_u_hat == a2.beta_u_hat);
    CHECK(a1.v_hat == a2.v_hat);
    CHECK(a1.d_hat > 0);
    Eigen::Index k = 0;
    a1.u_hat.cwiseAbs().maxCoeff(&k);
    CHECK(a1.u_hat(k) > 0);
    CHECK(max_abs(a1.u_hat * a1.beta_u_hat - base.u_hat * base.beta_u_hat) < 1e-12);
    CHECK(max_abs(a1.a_hat() - base.a_hat()) < 1e-12);
  }
}

TEST_CASE("two-stage rejects an empty network") {
  Rng rng = make_stream(24);
  const auto [truth, data] = simulate(testing_support::small_config(0.0, 1.0, 16), rng);
  const Dataset zero(Eigen::MatrixXd::Zero(16, 16), data.x(), data.y());
  CHECK_THROWS_AS(fit_two_stage(zero), DegenerateError);
}

TEST_CASE("attenuation limits") {
  const auto none = plim_bias(16, 1, 0.4, 0.0);
  CHECK(none.beta_u == doctest::Approx(16));
  CHECK(none.beta_v == doctest::Approx(1));

  const auto indep = plim_bias(16, 1, 0.0, 0.25);
  CHECK(indep.beta_u == doctest::Approx(16 / 1.25));
  CHECK(indep.beta_v == doctest::Approx(1 / 1.25));

  // Toy configuration at sigma_a = 4: kappa = 1/16, rho = 1/sqrt(5).
  const double rho = 1 / std::sqrt(5.0);
  const double kappa = 1.0 / 16;
  const auto toy = plim_bias(16, 1, rho, kappa);
  const double det = (1 + kappa) * (1 + kappa) - rho * rho;
  const double m00 = (1 + kappa) / det;
  const double m01 = -rho / det;
  // Regress (u β_u + v β_v) on the noisy pair: Σ_noisy⁻¹ Σ_cross β.
  const double c0 = 16 + rho * 1;
  const double c1 = rho * 16 + 1;
  CHECK(toy.beta_u == doctest::Approx(m00 * c0 + m01 * c1).epsilon(1e-12));
  CHECK(toy.beta_u == doctest::Approx(14.886).epsilon(1e-4));
  CHECK(toy.beta_v > 1.0);
  CHECK_THROWS_AS(plim_bias(1, 1, 1.0, 0.1), InputError);
}

TEST_CASE("two-stage rate oracle") {
  Rng rng = make_stream(25);
  auto cfg = toy_config();
  cfg.sigma_a = 0.25;
  const auto [truth, data] = simulate(cfg, rng);
  const auto r = two_stage_rate_oracle(truth, data.x());
  CHECK(r.mse_u == doctest::Approx(0.0625 * 255 / 65536.0).epsilon(1e-12));
  CHECK(r.mse_u == doctest::Approx(2.43e-4).epsilon(1e-2));
  CHECK(r.mse_a_rel == doctest::Approx(0.0625 * 511 / 65536.0).epsilon(1e-12));

  auto quiet = truth;
  quiet.sigma_a = 0;
  const auto z = two_stage_rate_oracle(quiet, data.x());
  CHECK(z.mse_u == 0.0);
  CHECK(z.mse_a_rel == 0.0);
}

TEST_CASE("two-stage centrality error matches the rate oracle") {
  auto cfg = toy_config();
  cfg.sigma_a = 0.25;
  double sum = 0;
  const int reps = 300;
  double oracle = 0;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng = make_stream(26, 0, rep);
    const auto [truth, data] = simulate(cfg, rng);
    sum += testing_support::mse(fit_two_stage(data).u_hat, truth.u);
    oracle = two_stage_rate_oracle(truth, data.x()).mse_u;
  }
  CHECK(sum / reps == doctest::Approx(oracle).epsilon(0.1));
}

TEST_CASE("two-stage coefficient attenuates in the noisy regime") {
  auto cfg = toy_config();
  cfg.sigma_a = 4.0;
  double bu = 0, sy = 0;
  const int reps = 200;
  for (int rep = 0; rep < reps; ++rep) {
    Rng rng = make_stream(27, 0, rep);
    const auto [truth, data] = simulate(cfg, rng);
    auto fit = fit_two_stage(data);
    bu += testing_support::sign_to(fit.u_hat, truth.u) * fit.beta_u_hat;
    sy += fit.sigma_y_hat_sq;
  }
  CHECK(bu / reps < 16.0);
  CHECK(sy / reps > cfg.sigma_y * cfg.sigma_y);
}

TEST_CASE("subspace identity for two-stage estimates") {
  Rng rng = make_stream(28);
  for (int rep = 0; rep < 20; ++rep) {
    const auto [truth, data] = simulate(testing_support::small_config(2.0, 1.0, 32), rng);
    const auto fit = fit_two_stage(data);
    const double n = 32;
    const double l = (fit.u_hat * fit.u_hat.transpose() - truth.u * truth.u.transpose()).squaredNorm() /
                     (2 * n * n);
    const double m = testing_support::mse(fit.u_hat, truth.u);
    CHECK(l == doctest::Approx(m * (1 - m / 4)).epsilon(1e-10));
  }
}

TEST_CASE("method names") {
  CHECK(to_string(Method::two_stage) == "two-stage");
  CHECK(method_from_string("supercent") == Method::supercent);
  CHECK_THROWS_AS(method_from_string("nope"), InputError);
}
