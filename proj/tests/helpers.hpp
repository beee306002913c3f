#pragma once

#include <Eigen/Dense>
#include <random>

#include "supercent/model.hpp"
#include "supercent/two_stage.hpp"

namespace testing_support {

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, supercent::Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = z(rng);
  return m;
}

// Sign of a against b, for comparing vectors up to a global flip.
inline double sign_to(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return a.dot(b) < 0 ? -1.0 : 1.0;
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

inline supercent::SimulationConfig small_config(double sigma_a, double sigma_y, Eigen::Index n = 64) {
  supercent::SimulationConfig c;
  c.n = n;
  c.sigma_a = sigma_a;
  c.sigma_y = sigma_y;
  c.beta_u = 4.0;
  return c;
}

// ‖û − u‖²/n after matching the sign of û to u.
inline double mse(const Eigen::VectorXd& est, const Eigen::VectorXd& truth) {
  return (sign_to(est, truth) * est - truth).squaredNorm() / static_cast<double>(truth.size());
}

}  // namespace testing_support
