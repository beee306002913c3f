#include <Eigen/Dense>
#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "supercent/errors.hpp"
#include "supercent/model.hpp"

using namespace supercent;

namespace {

double correlation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const Eigen::VectorXd ac = a.array() - a.mean();
  const Eigen::VectorXd bc = b.array() - b.mean();
  return ac.dot(bc) / (ac.norm() * bc.norm());
}

}  // namespace

TEST_CASE("centrality pair has norm sqrt(n)") {
  Rng rng = make_stream(11);
  for (Eigen::Index n : {2, 17, 256}) {
    const auto [u, v] = make_centrality_pair(n, 0.5, rng);
    CHECK(u.norm() == doctest::Approx(std::sqrt(double(n))).epsilon(1e-12));
    CHECK(v.norm() == doctest::Approx(std::sqrt(double(n))).epsilon(1e-12));
  }
  CHECK_THROWS_AS(make_centrality_pair(1, 0.5, rng), InputError);
}

TEST_CASE("centrality correlation follows the mixing weight") {
  const double target = 0.5 / std::sqrt(1.25);
  for (int s = 0; s < 20; ++s) {
    Rng rng = make_stream(12, 0, s);
    const auto [u, v] = make_centrality_pair(4096, 0.5, rng);
    CHECK(std::abs(correlation(u, v) - target) < 0.05);
  }
  int small = 0;
  for (int s = 0; s < 500; ++s) {
    Rng rng = make_stream(13, 0, s);
    const auto [u, v] = make_centrality_pair(4096, 0.0, rng);
    if (std::abs(correlation(u, v)) < 0.1) ++small;
  }
  CHECK(small >= 475);
}

TEST_CASE("rescaling to sqrt(n)") {
  Eigen::Vector2d z(3, 4);
  const Eigen::VectorXd r = rescale_to_sqrt_n(z);
  CHECK(r(0) == doctest::Approx(3 * std::sqrt(2.0) / 5));
  CHECK(r(1) == doctest::Approx(4 * std::sqrt(2.0) / 5));
  CHECK(rescale_to_sqrt_n(Eigen::VectorXd::Ones(4))(0) == doctest::Approx(1.0));
  CHECK_THROWS_AS(rescale_to_sqrt_n(Eigen::VectorXd::Zero(3)), DegenerateError);
}

TEST_CASE("noiseless data is exactly the structural model") {
  Rng rng = make_stream(14);
  const auto [truth, data] = simulate(testing_support::small_config(0.0, 0.0), rng);
  const Eigen::MatrixXd a0 = truth.d * truth.u * truth.v.transpose();
  CHECK(testing_support::max_abs(data.a() - a0) == 0.0);
  const Eigen::VectorXd mean = data.x() * truth.beta_x + truth.u * truth.beta_u + truth.v * truth.beta_v;
  CHECK(testing_support::max_abs(data.y() - mean) < 1e-12);
  CHECK((data.x().col(0).array() == 1.0).all());
  CHECK(data.p() == 3);
}

TEST_CASE("network noise has the requested scale") {
  Rng rng = make_stream(15);
  auto cfg = testing_support::small_config(2.0, 0.0, 256);
  const auto [truth, data] = simulate(cfg, rng);
  const Eigen::MatrixXd e = data.a() - truth.d * truth.u * truth.v.transpose();
  const double n2 = double(e.size());
  CHECK(std::abs(e.mean()) < 4 * 2.0 / std::sqrt(n2));
  CHECK(e.squaredNorm() / n2 == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("simulation is deterministic per seed") {
  const auto cfg = testing_support::small_config(0.5, 0.5);
  Rng r1 = make_stream(16, 2, 3);
  Rng r2 = make_stream(16, 2, 3);
  Rng r3 = make_stream(16, 2, 4);
  const auto a = simulate(cfg, r1);
  const auto b = simulate(cfg, r2);
  const auto c = simulate(cfg, r3);
  CHECK(a.second.a() == b.second.a());
  CHECK(a.second.y() == b.second.y());
  CHECK(a.second.a() != c.second.a());
  CHECK(stream_seed(1, 0, 0) != stream_seed(1, 0, 1));
  CHECK(stream_seed(1, 0, 1) != stream_seed(1, 1, 0));
  CHECK(stream_seed(1, 2, 3) == stream_seed(1, 2, 3));
}

TEST_CASE("toy configuration") {
  const auto c = toy_config();
  CHECK(c.n == 256);
  CHECK(c.p == 3);
  CHECK(c.d == 1.0);
  CHECK(c.beta_x == Eigen::Vector3d(1, 3, 5));
  CHECK(c.beta_u == 16.0);
  CHECK(c.beta_v == 1.0);
  CHECK(c.sigma_y * c.sigma_y == doctest::Approx(1.0 / 16));
  CHECK(c.v_mixing == 0.5);
}

TEST_CASE("dataset validation") {
  Eigen::MatrixXd x(4, 2);
  x << 1, 1, 1, 1, 1, 1, 1, 1;
  CHECK_THROWS_AS(Dataset(Eigen::MatrixXd::Ones(4, 4), x, Eigen::VectorXd::Ones(4)),
                  SingularDesignError);
  CHECK_THROWS_AS(Dataset(Eigen::MatrixXd::Ones(3, 4), Eigen::MatrixXd::Ones(4, 1),
                          Eigen::VectorXd::Ones(4)),
                  InputError);
  Eigen::MatrixXd a = Eigen::MatrixXd::Ones(4, 4);
  a(1, 2) = std::nan("");
  CHECK_THROWS_AS(Dataset(a, Eigen::MatrixXd::Ones(4, 1), Eigen::VectorXd::Ones(4)), InputError);

  SimulationConfig bad = testing_support::small_config(0, 0);
  bad.sigma_a = -1;
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("subset keeps the induced network") {
  Rng rng = make_stream(17);
  const auto [truth, data] = simulate(testing_support::small_config(1.0, 1.0, 12), rng);
  const auto sub = data.subset({0, 3, 7, 8, 11});
  CHECK(sub.n() == 5);
  CHECK(sub.a()(1, 2) == data.a()(3, 7));
  CHECK(sub.y()(4) == data.y()(11));
  CHECK(sub.x().row(2) == data.x().row(7));
}

TEST_CASE("params invariants") {
  Rng rng = make_stream(18);
  auto [truth, data] = simulate(testing_support::small_config(1.0, 1.0, 16), rng);
  CHECK_NOTHROW(truth.validate());
  CHECK(truth.kappa() == doctest::Approx(1.0 / 16));
  truth.u *= 2;
  CHECK_THROWS_AS(truth.validate(), InputError);
}
