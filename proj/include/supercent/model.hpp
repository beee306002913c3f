#pragma once

#include <Eigen/Dense>
#include <vector>
#include <cstdint>
#include <random>
#include <utility>

namespace supercent {

// Random streams are std::mt19937_64 engines seeded through a SplitMix64
// mix of (master seed, config index, replication index). Each replication
// owns its engine, so draws never depend on scheduling.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t config_index,
                          std::uint64_t replication);
Rng make_stream(std::uint64_t master, std::uint64_t config_index = 0,
                std::uint64_t replication = 0);

/// Ground truth for A = d·u·vᵀ + E and y = Xβ_x + uβ_u + vβ_v + ε.
struct UnifiedModelParams {
  double d = 1.0;
  Eigen::VectorXd u;
  Eigen::VectorXd v;
  Eigen::VectorXd beta_x;
  double beta_u = 0.0;
  double beta_v = 0.0;
  double sigma_a = 0.0;
  double sigma_y = 0.0;

  Eigen::Index n() const { return u.size(); }
  Eigen::Index p() const { return beta_x.size(); }
  double kappa() const { return sigma_a * sigma_a / (d * d * static_cast<double>(n())); }

  // Throws InputError when the norm or dimension invariants fail.
  void validate() const;
};

/// Observed (A, X, y). Construction validates shapes, finiteness and that
/// XᵀX is invertible.
class Dataset {
 public:
  Dataset(Eigen::MatrixXd a, Eigen::MatrixXd x, Eigen::VectorXd y);

  const Eigen::MatrixXd& a() const { return a_; }
  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }
  Eigen::Index n() const { return y_.size(); }
  Eigen::Index p() const { return x_.cols(); }

  bool is_symmetric(double tol = 1e-10) const;

  // Induced sub-network and matching (X, y) rows; `nodes` indexes into 0..n-1.
  Dataset subset(const std::vector<Eigen::Index>& nodes) const;

 private:
  Eigen::MatrixXd a_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
};

struct SimulationConfig {
  Eigen::Index n = 256;
  Eigen::Index p = 3;
  double d = 1.0;
  Eigen::VectorXd beta_x = Eigen::Vector3d(1.0, 3.0, 5.0);
  double beta_u = 1.0;
  double beta_v = 1.0;
  double sigma_a = 0.0;
  double sigma_y = 0.0;
  double v_mixing = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Returns z·√n/‖z‖₂.
Eigen::VectorXd rescale_to_sqrt_n(const Eigen::VectorXd& z);

/// u ~ N(0, I) and v = v_mixing·u + N(0, I), each rescaled to norm √n.
std::pair<Eigen::VectorXd, Eigen::VectorXd> make_centrality_pair(Eigen::Index n, double v_mixing,
                                                                 Rng& rng);

// Draws the centralities for a config and packs the ground truth.
UnifiedModelParams draw_params(const SimulationConfig& config, Rng& rng);

/// Draws X (intercept plus p−1 standard-normal columns), then E, then ε.
Dataset generate_dataset(const UnifiedModelParams& params, Rng& rng);

// Convenience: draw_params followed by generate_dataset on one stream.
std::pair<UnifiedModelParams, Dataset> simulate(const SimulationConfig& config, Rng& rng);

/// Configuration behind the introductory toy experiment. sigma_a is left at 0
/// and is meant to be swept by the caller.
SimulationConfig toy_config();

}  // namespace supercent
