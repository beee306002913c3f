#include "supercent/solver.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <limits>
#include <numeric>

#include "supercent/errors.hpp"
#include "supercent/numeric.hpp"
#include "supercent/predict.hpp"

namespace supercent {

void SolverSettings::validate() const {
  if (!(lambda > 0) || !std::isfinite(lambda)) throw InputError("solver: lambda must be positive");
  if (!(tol > 0)) throw InputError("solver: tol must be positive");
  if (max_iter < 1) throw InputError("solver: max_iter must be >= 1");
}

double supercent_objective(const Dataset& data, double d, const Eigen::VectorXd& u,
                           const Eigen::VectorXd& v, const Eigen::VectorXd& beta_x, double beta_u,
                           double beta_v, double lambda) {
  const double n = static_cast<double>(data.n());
  const double rss = (data.y() - data.x() * beta_x - u * beta_u - v * beta_v).squaredNorm();
  const double net = (data.a() - d * u * v.transpose()).squaredNorm();
  return rss / n + lambda * net / (n * n);
}

double supercent_objective(const Dataset& data, const FitResult& fit, double lambda) {
  return supercent_objective(data, fit.d_hat, fit.u_hat, fit.v_hat, fit.beta_x_hat, fit.beta_u_hat,
                             fit.beta_v_hat, lambda);
}

namespace {

Eigen::VectorXd to_sphere(const Eigen::VectorXd& z, const char* what) {
  const double norm = z.norm();
  if (!(norm > 0) || !std::isfinite(norm))
    throw DegenerateError(std::string("supercent: degenerate ") + what + " update");
  return z * (std::sqrt(static_cast<double>(z.size())) / norm);
}

}  // namespace

FitResult fit_supercent(const Dataset& data, const SolverSettings& settings,
                        const FitResult& init) {
  settings.validate();
  const auto n = data.n();
  const auto p = data.p();
  if (init.u_hat.size() != n || init.v_hat.size() != n)
    throw InputError("fit_supercent: initial centralities do not match the data");
  const double nd = static_cast<double>(n);
  const double lambda = settings.lambda;
  const Eigen::MatrixXd& a = data.a();
  const Eigen::MatrixXd& x = data.x();
  const Eigen::VectorXd& y = data.y();

  Eigen::VectorXd u = rescale_to_sqrt_n(init.u_hat);
  Eigen::VectorXd v = rescale_to_sqrt_n(init.v_hat);
  double d = init.d_hat;
  Eigen::MatrixXd w(n, p + 2);
  w.leftCols(p) = x;
  Eigen::VectorXd beta(p + 2);

  auto refit_beta = [&]() {
    w.col(p) = u;
    w.col(p + 1) = v;
    beta = ols_fit(w, y);
  };

  FitResult fit;
  fit.method = Method::supercent;
  fit.lambda = lambda;
  if (settings.record_trace) {
    refit_beta();
    fit.objective_trace.push_back(
        supercent_objective(data, d, u, v, beta.head(p), beta(p), beta(p + 1), lambda));
  }

  Eigen::VectorXd av = a * v;
  Eigen::VectorXd atu(n);
  int t = 0;
  bool converged = false;
  while (t < settings.max_iter) {
    ++t;
    refit_beta();
    const double bu = beta(p);
    const double bv = beta(p + 1);
    d = u.dot(av) / (nd * nd);
    const Eigen::VectorXd partial = y - x * beta.head(p);

    const double denom_u = bu * bu + lambda * d * d;
    if (!(denom_u > 0)) throw DegenerateError("supercent: beta_u^2 + lambda d^2 vanished");
    Eigen::VectorXd u_next =
        to_sphere((bu * (partial - v * bv) + (lambda * d / nd) * av) / denom_u, "u");

    atu.noalias() = a.transpose() * u_next;
    const double denom_v = bv * bv + lambda * d * d;
    if (!(denom_v > 0)) throw DegenerateError("supercent: beta_v^2 + lambda d^2 vanished");
    Eigen::VectorXd v_next =
        to_sphere((bv * (partial - u_next * bu) + (lambda * d / nd) * atu) / denom_v, "v");

    const double change =
        std::max(projection_distance(u, u_next), projection_distance(v, v_next));
    u = std::move(u_next);
    v = std::move(v_next);
    av.noalias() = a * v;
    if (settings.record_trace)
      fit.objective_trace.push_back(
          supercent_objective(data, d, u, v, beta.head(p), bu, bv, lambda));
    if (change <= settings.tol) {
      converged = true;
      break;
    }
  }

  // Bring β and d in line with the final centralities.
  refit_beta();
  d = u.dot(av) / (nd * nd);

  fit.d_hat = d;
  fit.u_hat = std::move(u);
  fit.v_hat = std::move(v);
  fit.beta_x_hat = beta.head(p);
  fit.beta_u_hat = beta(p);
  fit.beta_v_hat = beta(p + 1);
  fit.iterations = t;
  fit.converged = converged;
  if (settings.record_trace) fit.objective_trace.push_back(supercent_objective(data, fit, lambda));
  fit = align_signs(std::move(fit));
  fill_noise_estimates(fit, data);
  return fit;
}

FitResult fit_supercent(const Dataset& data, const SolverSettings& settings) {
  settings.validate();
  const auto triple = leading_singular_triple(data.a(), settings.svd.tol, settings.svd.max_iter);
  return fit_supercent(data, settings, first_stage(triple));
}

FitResult fit_supercent_symmetric(const Dataset& data, const SolverSettings& settings) {
  settings.validate();
  if (!data.is_symmetric()) throw InputError("fit_supercent_symmetric: A is not symmetric");
  const auto n = data.n();
  const auto p = data.p();
  const double nd = static_cast<double>(n);
  const double lambda = settings.lambda;
  const Eigen::MatrixXd& a = data.a();
  const Eigen::MatrixXd& x = data.x();
  const Eigen::VectorXd& y = data.y();

  const auto eig = leading_eigenpair(a, settings.svd.tol, settings.svd.max_iter);
  Eigen::VectorXd u = eig.vector * std::sqrt(nd);
  double d = eig.value / nd;

  Eigen::MatrixXd w(n, p + 1);
  w.leftCols(p) = x;
  Eigen::VectorXd beta(p + 1);
  auto refit_beta = [&]() {
    w.col(p) = u;
    beta = ols_fit(w, y);
  };
  auto objective = [&](double bu) {
    return supercent_objective(data, d, u, u, beta.head(p), bu, 0.0, lambda);
  };

  FitResult fit;
  fit.method = Method::supercent;
  fit.symmetric = true;
  fit.lambda = lambda;
  if (settings.record_trace) {
    refit_beta();
    fit.objective_trace.push_back(objective(beta(p)));
  }

  Eigen::MatrixXd system(n, n);
  int t = 0;
  bool converged = false;
  while (t < settings.max_iter) {
    ++t;
    refit_beta();
    const double bu = beta(p);
    d = u.dot(a * u) / (nd * nd);
    system = -(2.0 * lambda * d / nd) * a;
    system.diagonal().array() += bu * bu + 2.0 * lambda * d * d;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
    if (!(lu.rcond() >= kSingularRcond))
      throw DegenerateError("supercent (symmetric): u-update system is singular");
    Eigen::VectorXd u_next = to_sphere(lu.solve(bu * (y - x * beta.head(p))), "u");
    const double change = projection_distance(u, u_next);
    u = std::move(u_next);
    if (settings.record_trace) fit.objective_trace.push_back(objective(bu));
    if (change <= settings.tol) {
      converged = true;
      break;
    }
  }

  refit_beta();
  d = u.dot(a * u) / (nd * nd);
  fit.d_hat = d;
  fit.u_hat = u;
  fit.v_hat = std::move(u);
  fit.beta_x_hat = beta.head(p);
  fit.beta_u_hat = beta(p);
  fit.beta_v_hat = 0.0;
  fit.iterations = t;
  fit.converged = converged;
  if (settings.record_trace) fit.objective_trace.push_back(supercent_objective(data, fit, lambda));
  fit = align_signs(std::move(fit));
  fill_noise_estimates(fit, data);
  return fit;
}

double lambda_oracle(const UnifiedModelParams& params) {
  if (!(params.sigma_a > 0))
    throw DegenerateError("lambda_oracle: sigma_a = 0 gives an infinite lambda; use two-stage");
  return static_cast<double>(params.n()) * params.sigma_y * params.sigma_y /
         (params.sigma_a * params.sigma_a);
}

double lambda_plugin(const FitResult& ts_fit) {
  // Below this the residual network is rounding noise.
  const double floor = 1e-20 * ts_fit.d_hat * ts_fit.d_hat;
  if (!(ts_fit.sigma_a_hat_sq > floor))
    throw DegenerateError("lambda_plugin: estimated network noise is zero");
  return static_cast<double>(ts_fit.n()) * ts_fit.sigma_y_hat_sq / ts_fit.sigma_a_hat_sq;
}

double delta_ts_sc(const UnifiedModelParams& params, double lambda) {
  if (!(lambda > 0)) throw InputError("delta_ts_sc: lambda must be positive");
  const double d2 = params.d * params.d;
  const double b2 = params.beta_u * params.beta_u + params.beta_v * params.beta_v;
  const double s = lambda * d2 + b2;
  const double sa2 = params.sigma_a * params.sigma_a;
  const double sy2 = params.sigma_y * params.sigma_y;
  return ((2 * lambda * d2 + b2) * sa2 / (d2 * static_cast<double>(params.n())) - sy2) / (s * s);
}

SupercentRates supercent_rate_oracle(const UnifiedModelParams& params, double lambda) {
  const double n = static_cast<double>(params.n());
  const double p = static_cast<double>(params.p());
  const double sa2 = params.sigma_a * params.sigma_a;
  const double d2 = params.d * params.d;
  const double gain = (n - p - 2) / n * delta_ts_sc(params, lambda);
  const double bu2 = params.beta_u * params.beta_u;
  const double bv2 = params.beta_v * params.beta_v;
  return {sa2 * (n - 1) / (d2 * n * n) - bu2 * gain, sa2 * (n - 1) / (d2 * n * n) - bv2 * gain,
          sa2 * (2 * n - 1) / (d2 * n * n) - (bu2 + bv2) * gain};
}

std::string to_string(LambdaMethod m) {
  switch (m) {
    case LambdaMethod::oracle:
      return "oracle";
    case LambdaMethod::plugin:
      return "plugin";
    case LambdaMethod::cv:
      return "cv";
    case LambdaMethod::fixed:
      return "fixed";
  }
  return "unknown";
}

void LambdaSelection::validate() const {
  if (grid.empty()) throw InputError("lambda grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0) || !std::isfinite(grid[i]))
      throw InputError("lambda grid must be strictly positive");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw InputError("lambda grid must be sorted");
  }
  if (k_folds < 2) throw InputError("cross-validation needs at least 2 folds");
}

std::vector<double> default_lambda_grid(double anchor) {
  if (!(anchor > 0) || !std::isfinite(anchor))
    throw InputError("default_lambda_grid: anchor must be positive");
  std::vector<double> grid;
  for (int k = -10; k <= 10; ++k) grid.push_back(anchor * std::exp2(0.5 * k));
  return grid;
}

std::vector<Eigen::Index> CrossSectionSplit::train(int fold) const {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] != fold) idx.push_back(static_cast<Eigen::Index>(i));
  return idx;
}

std::vector<Eigen::Index> CrossSectionSplit::validation(int fold) const {
  std::vector<Eigen::Index> idx;
  for (std::size_t i = 0; i < fold_of.size(); ++i)
    if (fold_of[i] == fold) idx.push_back(static_cast<Eigen::Index>(i));
  return idx;
}

CrossSectionSplit make_split(Eigen::Index n, int k_folds, Rng& rng) {
  if (k_folds < 2 || n < k_folds) throw InputError("make_split: need 2 <= K <= n");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  CrossSectionSplit split;
  split.fold_of.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t k = 0; k < order.size(); ++k)
    split.fold_of[static_cast<std::size_t>(order[k])] = static_cast<int>(k % k_folds);
  return split;
}

CvOutcome cross_validate_lambda(const Dataset& data, const LambdaSelection& selection,
                                const SolverSettings& settings, Rng& rng) {
  selection.validate();
  return cross_validate_lambda(data, selection, settings,
                               make_split(data.n(), selection.k_folds, rng));
}

CvOutcome cross_validate_lambda(const Dataset& data, const LambdaSelection& selection,
                                const SolverSettings& settings, const CrossSectionSplit& split) {
  selection.validate();
  const auto n = data.n();
  const auto p = data.p();
  const int k = selection.k_folds;
  if (static_cast<Eigen::Index>(split.fold_of.size()) != n)
    throw InputError("cross_validate_lambda: split does not cover every node");
  for (int f = 0; f < k; ++f) {
    const auto n_val = static_cast<Eigen::Index>(split.validation(f).size());
    if (n_val == 0) throw InputError("cross_validate_lambda: empty fold " + std::to_string(f));
    if (n - n_val <= p + 2)
      throw InputError("cross_validate_lambda: training fold too small for p + 2 regressors");
  }

  const auto full = leading_singular_triple(data.a(), settings.svd.tol, settings.svd.max_iter);
  const std::size_t n_grid = selection.grid.size();
  std::vector<std::vector<CvCell>> cells(n_grid, std::vector<CvCell>(static_cast<std::size_t>(k)));

  for (int f = 0; f < k; ++f) {
    const auto train = split.train(f);
    const auto val = split.validation(f);
    const auto n_train = static_cast<Eigen::Index>(train.size());
    const auto n_val = static_cast<Eigen::Index>(val.size());

    Eigen::VectorXd u_all(n);
    Eigen::VectorXd v_all(n);
    Eigen::MatrixXd x_val(n_val, p);
    Eigen::VectorXd y_val(n_val);
    for (Eigen::Index i = 0; i < n_train; ++i) {
      u_all(i) = full.u(train[i]);
      v_all(i) = full.v(train[i]);
    }
    for (Eigen::Index i = 0; i < n_val; ++i) {
      u_all(n_train + i) = full.u(val[i]);
      v_all(n_train + i) = full.v(val[i]);
      x_val.row(i) = data.x().row(val[i]);
      y_val(i) = data.y()(val[i]);
    }

    std::optional<Dataset> train_data;
    std::optional<FitResult> init;
    try {
      train_data.emplace(data.subset(train));
      init = first_stage(
          leading_singular_triple(train_data->a(), settings.svd.tol, settings.svd.max_iter));
    } catch (const Error&) {
      train_data.reset();
    }

    for (std::size_t g = 0; g < n_grid; ++g) {
      CvCell& cell = cells[g][static_cast<std::size_t>(f)];
      cell.lambda = selection.grid[g];
      cell.fold = f;
      if (!train_data) continue;
      try {
        SolverSettings s = settings;
        s.lambda = selection.grid[g];
        s.record_trace = false;
        const FitResult fit = fit_supercent(*train_data, s, *init);
        const auto star = new_centralities_from_triple(u_all, v_all, n_train, fit.u_hat, fit.v_hat);
        cell.sse = (y_val - predict_response(x_val, star.u_star, star.v_star, fit)).squaredNorm();
        cell.ok = std::isfinite(cell.sse);
      } catch (const Error&) {
        cell.ok = false;
      }
    }
  }

  CvOutcome out;
  out.total_sse.assign(n_grid, std::numeric_limits<double>::quiet_NaN());
  std::optional<std::size_t> best;
  for (std::size_t g = 0; g < n_grid; ++g) {
    double total = 0.0;
    bool all_ok = true;
    for (const CvCell& cell : cells[g]) {
      out.table.push_back(cell);
      all_ok = all_ok && cell.ok;
      total += cell.sse;
    }
    if (!all_ok) continue;
    out.total_sse[g] = total;
    if (!best || total < out.total_sse[*best]) best = g;
  }
  if (!best) throw SelectionError("cross_validate_lambda: every lambda failed on some fold");
  out.lambda_min = selection.grid[*best];
  return out;
}

}  // namespace supercent
