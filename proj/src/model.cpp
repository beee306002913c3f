#include "supercent/model.hpp"

#include <cmath>
#include <string>

#include "supercent/errors.hpp"
#include "supercent/numeric.hpp"

namespace supercent {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t config_index,
                          std::uint64_t replication) {
  std::uint64_t h = splitmix64(master);
  h = splitmix64(h ^ config_index);
  return splitmix64(h ^ replication);
}

Rng make_stream(std::uint64_t master, std::uint64_t config_index, std::uint64_t replication) {
  return Rng(stream_seed(master, config_index, replication));
}

namespace {

Eigen::VectorXd standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Eigen::VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = dist(rng);
  return z;
}

}  // namespace

void UnifiedModelParams::validate() const {
  const auto n_ = n();
  const double root_n = std::sqrt(static_cast<double>(n_));
  if (v.size() != n_) throw InputError("params: u and v lengths differ");
  if (n_ <= p() + 2) throw InputError("params: need n > p + 2");
  if (std::abs(u.norm() - root_n) > 1e-8 || std::abs(v.norm() - root_n) > 1e-8)
    throw InputError("params: centralities must have norm sqrt(n)");
  if (!(sigma_a >= 0) || !(sigma_y >= 0)) throw InputError("params: noise sd must be >= 0");
  if (!(d > 0)) throw InputError("params: d must be positive");
}

Dataset::Dataset(Eigen::MatrixXd a, Eigen::MatrixXd x, Eigen::VectorXd y)
    : a_(std::move(a)), x_(std::move(x)), y_(std::move(y)) {
  const auto n = y_.size();
  if (n < 1 || x_.cols() < 1) throw InputError("dataset: empty input");
  if (a_.rows() != n || a_.cols() != n)
    throw InputError("dataset: A must be n x n with n = " + std::to_string(n));
  if (x_.rows() != n) throw InputError("dataset: X must have n = " + std::to_string(n) + " rows");
  if (!a_.allFinite() || !x_.allFinite() || !y_.allFinite())
    throw InputError("dataset: non-finite entries");
  if (n <= x_.cols()) throw SingularDesignError("dataset: X has more columns than rows");
  require_full_column_rank(x_, "dataset");
}

bool Dataset::is_symmetric(double tol) const {
  return (a_ - a_.transpose()).cwiseAbs().maxCoeff() <= tol;
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& nodes) const {
  const auto m = static_cast<Eigen::Index>(nodes.size());
  Eigen::MatrixXd a(m, m);
  Eigen::MatrixXd x(m, p());
  Eigen::VectorXd y(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) a(i, j) = a_(nodes[i], nodes[j]);
    x.row(i) = x_.row(nodes[i]);
    y(i) = y_(nodes[i]);
  }
  return Dataset(std::move(a), std::move(x), std::move(y));
}

void SimulationConfig::validate() const {
  if (beta_x.size() != p) throw InputError("config: beta_x must have length p");
  if (p < 1) throw InputError("config: p must be >= 1 (intercept column)");
  if (n <= p + 2) throw InputError("config: need n > p + 2");
  if (!(sigma_a >= 0) || !(sigma_y >= 0)) throw InputError("config: noise sd must be >= 0");
  if (!(d > 0)) throw InputError("config: d must be positive");
}

Eigen::VectorXd rescale_to_sqrt_n(const Eigen::VectorXd& z) {
  const double norm = z.norm();
  if (!(norm > 0)) throw DegenerateError("rescale_to_sqrt_n: zero vector");
  return z * (std::sqrt(static_cast<double>(z.size())) / norm);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> make_centrality_pair(Eigen::Index n, double v_mixing,
                                                                 Rng& rng) {
  if (n < 2) throw InputError("make_centrality_pair: n must be >= 2");
  Eigen::VectorXd u = rescale_to_sqrt_n(standard_normal(n, rng));
  Eigen::VectorXd v = rescale_to_sqrt_n(v_mixing * u + standard_normal(n, rng));
  return {std::move(u), std::move(v)};
}

UnifiedModelParams draw_params(const SimulationConfig& config, Rng& rng) {
  config.validate();
  auto [u, v] = make_centrality_pair(config.n, config.v_mixing, rng);
  UnifiedModelParams params;
  params.d = config.d;
  params.u = std::move(u);
  params.v = std::move(v);
  params.beta_x = config.beta_x;
  params.beta_u = config.beta_u;
  params.beta_v = config.beta_v;
  params.sigma_a = config.sigma_a;
  params.sigma_y = config.sigma_y;
  return params;
}

Dataset generate_dataset(const UnifiedModelParams& params, Rng& rng) {
  params.validate();
  const auto n = params.n();
  const auto p = params.p();
  std::normal_distribution<double> dist(0.0, 1.0);

  Eigen::MatrixXd x(n, p);
  x.col(0).setOnes();
  for (Eigen::Index j = 1; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) x(i, j) = dist(rng);

  Eigen::MatrixXd a = params.d * params.u * params.v.transpose();
  if (params.sigma_a > 0) {
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i) a(i, j) += params.sigma_a * dist(rng);
  }

  Eigen::VectorXd y = x * params.beta_x + params.u * params.beta_u + params.v * params.beta_v;
  if (params.sigma_y > 0) {
    for (Eigen::Index i = 0; i < n; ++i) y(i) += params.sigma_y * dist(rng);
  }
  return Dataset(std::move(a), std::move(x), std::move(y));
}

std::pair<UnifiedModelParams, Dataset> simulate(const SimulationConfig& config, Rng& rng) {
  UnifiedModelParams params = draw_params(config, rng);
  Dataset data = generate_dataset(params, rng);
  return {std::move(params), std::move(data)};
}

SimulationConfig toy_config() {
  SimulationConfig c;
  c.n = 256;
  c.p = 3;
  c.d = 1.0;
  c.beta_x = Eigen::Vector3d(1.0, 3.0, 5.0);
  c.beta_u = 16.0;
  c.beta_v = 1.0;
  c.sigma_y = 0.25;  // sigma_y^2 = 2^-4
  c.sigma_a = 0.0;
  c.v_mixing = 0.5;
  return c;
}

}  // namespace supercent
