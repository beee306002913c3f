#include "supercent/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <thread>
#include <unordered_map>

#include "supercent/errors.hpp"
#include "supercent/solver.hpp"
#include "supercent/two_stage.hpp"

namespace supercent {

double loss_subspace(const Eigen::VectorXd& z_hat, const Eigen::VectorXd& z) {
  if (z_hat.size() != z.size()) throw InputError("loss_subspace: length mismatch");
  const double a = z_hat.squaredNorm();
  const double b = z.squaredNorm();
  if (!(a > 0) || !(b > 0)) throw DegenerateError("loss_subspace: zero vector");
  const double c = z_hat.dot(z);
  return std::max(0.0, 1.0 - c * c / (a * b));
}

double loss_network(const Eigen::MatrixXd& a_hat, const Eigen::MatrixXd& a0) {
  if (a_hat.rows() != a0.rows() || a_hat.cols() != a0.cols())
    throw InputError("loss_network: shape mismatch");
  const double denom = a0.squaredNorm();
  if (!(denom > 0)) throw DegenerateError("loss_network: A0 is zero");
  return (a_hat - a0).squaredNorm() / denom;
}

double loss_coef(double b_hat, double b) {
  if (b == 0.0) throw DegenerateError("loss_coef: true coefficient is zero");
  return (b_hat - b) * (b_hat - b) / (b * b);
}

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::two_stage:
      return "two-stage";
    case Estimator::sc_oracle:
      return "sc-oracle";
    case Estimator::sc_plugin:
      return "sc-plugin";
    case Estimator::sc_cv:
      return "sc-cv";
  }
  return "unknown";
}

Estimator estimator_from_string(const std::string& s) {
  for (Estimator e :
       {Estimator::two_stage, Estimator::sc_oracle, Estimator::sc_plugin, Estimator::sc_cv})
    if (to_string(e) == s) return e;
  throw InputError("unknown estimator '" + s + "'");
}

namespace {

bool has(const std::vector<Estimator>& list, Estimator e) {
  return std::find(list.begin(), list.end(), e) != list.end();
}

Estimator estimator_behind(CiVariant v) {
  switch (v) {
    case CiVariant::sc_oracle:
      return Estimator::sc_oracle;
    case CiVariant::sc_cv:
      return Estimator::sc_cv;
    default:
      return Estimator::two_stage;
  }
}

}  // namespace

void ExperimentSpec::validate() const {
  base.validate();
  if (replications < 1) throw InputError("experiment: replications must be >= 1");
  if (sigma_a.empty() || sigma_y.empty() || beta_u.empty())
    throw InputError("experiment: sweep lists must be nonempty");
  if (estimators.empty()) throw InputError("experiment: no estimators");
  if (!(alpha > 0 && alpha < 1)) throw InputError("experiment: alpha must be in (0,1)");
  if (parallelism < 1) throw InputError("experiment: parallelism must be >= 1");
  for (double s : sigma_a)
    if (!(s >= 0)) throw InputError("experiment: sigma_a must be >= 0");
  for (double s : sigma_y)
    if (!(s >= 0)) throw InputError("experiment: sigma_y must be >= 0");
  for (CiVariant v : ci_variants)
    if (!has(estimators, estimator_behind(v)))
      throw InputError("experiment: CI variant " + to_string(v) + " needs estimator " +
                       to_string(estimator_behind(v)));
}

std::vector<ConfigPoint> sweep_points(const ExperimentSpec& spec) {
  std::vector<ConfigPoint> out;
  for (double sa : spec.sigma_a)
    for (double sy : spec.sigma_y)
      for (double bu : spec.beta_u) out.push_back({sa, sy, bu});
  return out;
}

std::vector<double> PanelRaw::series(std::size_t config, const std::string& estimator,
                                     const std::string& metric) const {
  for (std::size_t k = 0; k < keys.size(); ++k) {
    if (keys[k].estimator != estimator || keys[k].metric != metric) continue;
    std::vector<double> out;
    for (const auto& rep : values.at(config)) out.push_back(rep[k]);
    return out;
  }
  throw InputError("no metric " + estimator + "/" + metric + " in panel");
}

const MetricRow& MetricsTable::at(const ConfigPoint& c, const std::string& estimator,
                                  const std::string& metric) const {
  for (const auto& r : rows)
    if (r.sigma_a == c.sigma_a && r.sigma_y == c.sigma_y && r.beta_u == c.beta_u &&
        r.estimator == estimator && r.metric == metric)
      return r;
  throw InputError("no row " + estimator + "/" + metric);
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::string>& estimator_metrics() {
  static const std::vector<std::string> m{
      "loss_u",  "loss_v",  "sin_u",      "mse_u",          "mse_v",         "loss_a",
      "loss_bu", "loss_bv", "sqerr_bu",   "sqerr_bv",       "bias_bu",       "bias_bv",
      "beta_u_hat", "sigma_y_sq_hat", "sigma_a_sq_hat", "sigma_a_sq_hat_a0"};
  return m;
}

std::vector<std::string> coefficient_labels(Eigen::Index p) {
  std::vector<std::string> out{"bu", "bv"};
  for (Eigen::Index j = 0; j < p; ++j) out.push_back("bx" + std::to_string(j));
  return out;
}

std::vector<MetricKey> layout(const ExperimentSpec& spec) {
  std::vector<MetricKey> keys;
  for (Estimator e : spec.estimators) {
    for (const auto& m : estimator_metrics()) keys.push_back({to_string(e), m});
    if (e != Estimator::two_stage) {
      keys.push_back({to_string(e), "lambda"});
      keys.push_back({to_string(e), "iterations"});
    }
  }
  for (CiVariant v : spec.ci_variants) {
    for (const auto& c : coefficient_labels(spec.base.p)) {
      keys.push_back({to_string(v), "cover_" + c});
      keys.push_back({to_string(v), "width_" + c});
    }
    if (spec.network_inference && v != CiVariant::ts_adhoc) {
      keys.push_back({to_string(v), "cover_a"});
      keys.push_back({to_string(v), "width_a"});
    }
  }
  return keys;
}

class Recorder {
 public:
  Recorder(const std::unordered_map<std::string, std::size_t>& index, std::vector<double>& out)
      : index_(index), out_(out) {}

  void set(const std::string& estimator, const std::string& metric, double value) {
    out_[index_.at(estimator + '/' + metric)] = value;
  }

 private:
  const std::unordered_map<std::string, std::size_t>& index_;
  std::vector<double>& out_;
};

// Signs matched to the truth so that losses and coverage compare like with like.
FitResult align_to_truth(FitResult f, const UnifiedModelParams& truth) {
  const double su = f.u_hat.dot(truth.u) < 0 ? -1.0 : 1.0;
  const double sv = f.v_hat.dot(truth.v) < 0 ? -1.0 : 1.0;
  f.u_hat *= su;
  f.beta_u_hat *= su;
  f.v_hat *= sv;
  f.beta_v_hat *= sv;
  f.d_hat *= su * sv;
  return f;
}

// λ₀ and λ̂₀ are undefined without network noise; any λ then reproduces the
// noiseless fit, so n is used.
template <class F>
double lambda_or_default(F&& f, Eigen::Index n) {
  try {
    return f();
  } catch (const Error&) {
    return static_cast<double>(n);
  }
}

void record_fit(Recorder& rec, const std::string& label, const FitResult& f,
                const UnifiedModelParams& t) {
  const double n = static_cast<double>(t.n());
  const Eigen::MatrixXd a0 = t.d * t.u * t.v.transpose();
  const double lu = loss_subspace(f.u_hat, t.u);
  rec.set(label, "loss_u", lu);
  rec.set(label, "loss_v", loss_subspace(f.v_hat, t.v));
  rec.set(label, "sin_u", std::sqrt(lu));
  rec.set(label, "mse_u", (f.u_hat - t.u).squaredNorm() / n);
  rec.set(label, "mse_v", (f.v_hat - t.v).squaredNorm() / n);
  rec.set(label, "loss_a", loss_network(f.a_hat(), a0));
  rec.set(label, "loss_bu", t.beta_u != 0 ? loss_coef(f.beta_u_hat, t.beta_u) : kNaN);
  rec.set(label, "loss_bv", t.beta_v != 0 ? loss_coef(f.beta_v_hat, t.beta_v) : kNaN);
  rec.set(label, "sqerr_bu", std::pow(f.beta_u_hat - t.beta_u, 2));
  rec.set(label, "sqerr_bv", std::pow(f.beta_v_hat - t.beta_v, 2));
  rec.set(label, "bias_bu", f.beta_u_hat - t.beta_u);
  rec.set(label, "bias_bv", f.beta_v_hat - t.beta_v);
  rec.set(label, "beta_u_hat", f.beta_u_hat);
  rec.set(label, "sigma_y_sq_hat", f.sigma_y_hat_sq);
  rec.set(label, "sigma_a_sq_hat", f.sigma_a_hat_sq);
  // Infeasible variant measured against A₀ instead of the observed A.
  rec.set(label, "sigma_a_sq_hat_a0", (f.a_hat() - a0).squaredNorm() / (n * n));
  if (f.method == Method::supercent) {
    rec.set(label, "lambda", f.lambda);
    rec.set(label, "iterations", f.iterations);
  }
}

struct RepFits {
  std::optional<FitResult> ts;
  std::optional<FitResult> sc_oracle;
  std::optional<FitResult> sc_plugin;
  std::optional<FitResult> sc_cv;

  const std::optional<FitResult>& get(Estimator e) const {
    switch (e) {
      case Estimator::sc_oracle:
        return sc_oracle;
      case Estimator::sc_plugin:
        return sc_plugin;
      case Estimator::sc_cv:
        return sc_cv;
      default:
        return ts;
    }
  }
};

template <class F>
std::optional<FitResult> attempt(F&& f) {
  try {
    FitResult fit = f();
    if (!fit.converged) return std::nullopt;
    return fit;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void run_replication(const ExperimentSpec& spec, std::size_t config_index, const ConfigPoint& cp,
                     int rep, const std::unordered_map<std::string, std::size_t>& index,
                     std::vector<double>& out) {
  SimulationConfig cfg = spec.base;
  cfg.sigma_a = cp.sigma_a;
  cfg.sigma_y = cp.sigma_y;
  cfg.beta_u = cp.beta_u;
  Rng rng = make_stream(spec.master_seed, config_index, static_cast<std::uint64_t>(rep));
  const auto [truth, data] = simulate(cfg, rng);
  const auto n = data.n();

  SolverSettings settings;
  settings.tol = spec.solver_tol;
  settings.max_iter = spec.solver_max_iter;

  RepFits fits;
  fits.ts = attempt([&] { return fit_two_stage(data, settings.svd); });
  const double lambda0 = lambda_or_default([&] { return lambda_oracle(truth); }, n);
  double lambda_cv = kNaN;

  if (has(spec.estimators, Estimator::sc_oracle) && fits.ts) {
    fits.sc_oracle = attempt([&] {
      SolverSettings s = settings;
      s.lambda = lambda0;
      return fit_supercent(data, s, *fits.ts);
    });
  }
  const double lambda_hat =
      fits.ts ? lambda_or_default([&] { return lambda_plugin(*fits.ts); }, n) : kNaN;
  if (has(spec.estimators, Estimator::sc_plugin) && fits.ts) {
    fits.sc_plugin = attempt([&] {
      SolverSettings s = settings;
      s.lambda = lambda_hat;
      return fit_supercent(data, s, *fits.ts);
    });
  }
  if (has(spec.estimators, Estimator::sc_cv) && fits.ts) {
    fits.sc_cv = attempt([&] {
      LambdaSelection sel;
      sel.method = LambdaMethod::cv;
      sel.k_folds = spec.k_folds;
      sel.grid = default_lambda_grid(lambda_hat);
      const auto cv = cross_validate_lambda(data, sel, settings, rng);
      lambda_cv = cv.lambda_min;
      SolverSettings s = settings;
      s.lambda = cv.lambda_min;
      return fit_supercent(data, s, *fits.ts);
    });
  }

  for (auto* f : {&fits.ts, &fits.sc_oracle, &fits.sc_plugin, &fits.sc_cv})
    if (*f) **f = align_to_truth(**f, truth);

  Recorder rec(index, out);
  for (Estimator e : spec.estimators)
    if (const auto& f = fits.get(e)) record_fit(rec, to_string(e), *f, truth);

  const Eigen::MatrixXd a0 = truth.d * truth.u * truth.v.transpose();
  const auto labels = coefficient_labels(data.p());
  for (CiVariant v : spec.ci_variants) {
    const auto& backing = fits.get(estimator_behind(v));
    if (!fits.ts || !backing) continue;
    const std::string name = to_string(v);
    try {
      const auto cis = ci_beta(data, *fits.ts, &*backing, &truth, v, spec.alpha);
      std::vector<double> truth_beta{truth.beta_u, truth.beta_v};
      for (Eigen::Index j = 0; j < truth.p(); ++j) truth_beta.push_back(truth.beta_x(j));
      for (std::size_t c = 0; c < cis.size(); ++c) {
        rec.set(name, "cover_" + labels[c], cis[c].covers(truth_beta[c]) ? 1.0 : 0.0);
        rec.set(name, "width_" + labels[c], cis[c].width());
      }
    } catch (const std::exception&) {
    }
    if (!spec.network_inference || v == CiVariant::ts_adhoc) continue;
    try {
      NetworkEntryInference se;
      switch (v) {
        case CiVariant::ts_oracle:
          se = se_network_entries_two_stage(truth.u, truth.v, truth.sigma_a * truth.sigma_a,
                                            spec.alpha);
          break;
        case CiVariant::ts:
          se = se_network_entries_two_stage(fits.ts->u_hat, fits.ts->v_hat,
                                            fits.ts->sigma_a_hat_sq, spec.alpha);
          break;
        case CiVariant::sc_oracle:
          se = se_network_entries_supercent(point_from_truth(truth), data.x(), lambda0,
                                            spec.alpha);
          break;
        default:
          se = se_network_entries_supercent(point_from_fit(*backing), data.x(), lambda_cv,
                                            spec.alpha);
          break;
      }
      const auto cov = network_coverage(backing->a_hat(), a0, se);
      rec.set(name, "cover_a", cov.coverage);
      rec.set(name, "width_a", cov.mean_width);
    } catch (const std::exception&) {
    }
  }
}

MetricRow theory_row(const ConfigPoint& cp, const std::string& estimator,
                     const std::string& metric, double value) {
  MetricRow r;
  r.sigma_a = cp.sigma_a;
  r.sigma_y = cp.sigma_y;
  r.beta_u = cp.beta_u;
  r.estimator = estimator;
  r.metric = metric;
  r.mean = r.median = r.q05 = r.q95 = value;
  r.sd = 0.0;
  return r;
}

void append_theory(const ExperimentSpec& spec, const ConfigPoint& cp,
                   std::vector<MetricRow>& rows) {
  if (!(cp.sigma_a > 0)) return;
  UnifiedModelParams t;
  t.d = spec.base.d;
  t.u = Eigen::VectorXd::Zero(spec.base.n);
  t.v = t.u;
  t.beta_x = spec.base.beta_x;
  t.beta_u = cp.beta_u;
  t.beta_v = spec.base.beta_v;
  t.sigma_a = cp.sigma_a;
  t.sigma_y = cp.sigma_y;
  const double n = static_cast<double>(spec.base.n);
  const double noise = cp.sigma_a * cp.sigma_a / (t.d * t.d * n * n);
  const double rho = spec.base.v_mixing / std::sqrt(1 + spec.base.v_mixing * spec.base.v_mixing);
  const std::string ts = "two-stage-theory";
  rows.push_back(theory_row(cp, ts, "mse_u", noise * (n - 1)));
  rows.push_back(theory_row(cp, ts, "mse_v", noise * (n - 1)));
  rows.push_back(theory_row(cp, ts, "loss_a", noise * (2 * n - 1)));
  rows.push_back(
      theory_row(cp, ts, "beta_u_plim", plim_bias(t.beta_u, t.beta_v, rho, t.kappa()).beta_u));
  if (!(cp.sigma_y > 0)) return;
  const double lambda0 = lambda_oracle(t);
  const auto sc = supercent_rate_oracle(t, lambda0);
  const std::string so = "sc-oracle-theory";
  rows.push_back(theory_row(cp, so, "mse_u", sc.mse_u));
  rows.push_back(theory_row(cp, so, "mse_v", sc.mse_v));
  rows.push_back(theory_row(cp, so, "loss_a", sc.mse_a_rel));
  rows.push_back(theory_row(cp, so, "gain_u",
                            t.beta_u * t.beta_u * (n - t.p() - 2) / n * delta_ts_sc(t, lambda0)));
}

}  // namespace

PanelRaw run_panel_raw(const ExperimentSpec& spec) {
  spec.validate();
  PanelRaw raw;
  raw.configs = sweep_points(spec);
  raw.keys = layout(spec);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t k = 0; k < raw.keys.size(); ++k)
    index.emplace(raw.keys[k].estimator + '/' + raw.keys[k].metric, k);

  const auto reps = static_cast<std::size_t>(spec.replications);
  raw.values.assign(raw.configs.size(),
                    std::vector<std::vector<double>>(reps, std::vector<double>(raw.keys.size(), kNaN)));

  const std::size_t total = raw.configs.size() * reps;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t task = next++; task < total; task = next++) {
      const std::size_t c = task / reps;
      const std::size_t r = task % reps;
      try {
        run_replication(spec, c, raw.configs[c], static_cast<int>(r), index, raw.values[c][r]);
      } catch (const std::exception&) {
        std::fill(raw.values[c][r].begin(), raw.values[c][r].end(), kNaN);
      }
    }
  };
  const auto n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(spec.parallelism), std::max<std::size_t>(total, 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return raw;
}

MetricRow summarize(std::vector<double> values) {
  const auto total = values.size();
  std::erase_if(values, [](double x) { return !std::isfinite(x); });
  MetricRow r;
  r.n_ok = static_cast<int>(values.size());
  r.n_fail = static_cast<int>(total - values.size());
  if (values.empty()) {
    r.mean = r.median = r.sd = r.q05 = r.q95 = kNaN;
    return r;
  }
  double sum = 0.0;
  for (double x : values) sum += x;
  r.mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double x : values) ss += (x - r.mean) * (x - r.mean);
  r.sd = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
  std::sort(values.begin(), values.end());
  auto quantile = [&](double q) {
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  r.median = quantile(0.5);
  r.q05 = quantile(0.05);
  r.q95 = quantile(0.95);
  return r;
}

MetricsTable aggregate(const ExperimentSpec& spec, const PanelRaw& raw) {
  MetricsTable table;
  const int reps = spec.replications;
  for (std::size_t c = 0; c < raw.configs.size(); ++c) {
    const auto& cp = raw.configs[c];
    for (std::size_t k = 0; k < raw.keys.size(); ++k) {
      std::vector<double> vals;
      vals.reserve(raw.values[c].size());
      for (const auto& rep : raw.values[c]) vals.push_back(rep[k]);
      MetricRow row = summarize(std::move(vals));
      row.sigma_a = cp.sigma_a;
      row.sigma_y = cp.sigma_y;
      row.beta_u = cp.beta_u;
      row.estimator = raw.keys[k].estimator;
      row.metric = raw.keys[k].metric;
      row.n_fail = reps - row.n_ok;
      table.rows.push_back(row);
      if (row.metric.rfind("cover_", 0) == 0) {
        MetricRow se = row;
        se.metric += "_mcse";
        const double p = row.mean;
        const double v = row.n_ok > 0 ? std::sqrt(p * (1 - p) / row.n_ok) : kNaN;
        se.mean = se.median = se.q05 = se.q95 = v;
        se.sd = 0.0;
        table.rows.push_back(se);
      }
    }
    if (spec.theory_overlay) append_theory(spec, cp, table.rows);
  }
  return table;
}

MetricsTable run_panel(const ExperimentSpec& spec) { return aggregate(spec, run_panel_raw(spec)); }

std::vector<double> toy_sigma_a_grid() {
  std::vector<double> grid;
  for (int k = 2; k <= 10; ++k) grid.push_back(std::exp2(0.5 * k));
  return grid;
}

ExperimentSpec toy_spec(const std::vector<double>& sigma_a_grid, int replications,
                        std::uint64_t seed) {
  if (sigma_a_grid.empty()) throw InputError("toy experiment: empty sigma_a grid");
  ExperimentSpec spec;
  spec.base = toy_config();
  spec.sigma_a = sigma_a_grid;
  spec.sigma_y = {spec.base.sigma_y};
  spec.beta_u = {spec.base.beta_u};
  spec.estimators = {Estimator::two_stage, Estimator::sc_cv};
  spec.ci_variants = {CiVariant::ts_adhoc, CiVariant::ts, CiVariant::sc_cv};
  spec.network_inference = false;
  spec.replications = replications;
  spec.master_seed = seed;
  return spec;
}

MetricsTable toy_experiment(const std::vector<double>& sigma_a_grid, int replications,
                            std::uint64_t seed, int parallelism) {
  ExperimentSpec spec = toy_spec(sigma_a_grid, replications, seed);
  spec.parallelism = parallelism;
  return run_panel(spec);
}

ExperimentSpec preset_spec(const std::string& name, int replications, std::uint64_t seed,
                           int parallelism) {
  ExperimentSpec spec;
  if (name == "toy") {
    spec = toy_spec(toy_sigma_a_grid(), replications, seed);
  } else if (name == "consistent" || name == "inconsistent") {
    spec.base = SimulationConfig{};
    spec.sigma_a = name == "consistent" ? std::vector<double>{0.0625, 0.25}
                                        : std::vector<double>{1.0, 4.0};
    spec.sigma_y = {0.0625, 0.25, 1.0};
    spec.beta_u = {1.0, 4.0, 16.0};
    spec.replications = replications;
    spec.master_seed = seed;
  } else {
    throw InputError("unknown preset '" + name + "' (expected toy, consistent or inconsistent)");
  }
  spec.parallelism = parallelism;
  return spec;
}

}  // namespace supercent
