// supercent: data generation, fitting, tuning, prediction, inference,
// simulation panels and a long-short backtest.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "supercent/backtest.hpp"
#include "supercent/errors.hpp"
#include "supercent/harness.hpp"
#include "supercent/inference.hpp"
#include "supercent/io.hpp"
#include "supercent/predict.hpp"
#include "supercent/solver.hpp"
#include "supercent/two_stage.hpp"

namespace fs = std::filesystem;
using namespace supercent;

namespace {

struct CommonFit {
  std::string input_dir;
  std::string lambda = "cv";
  double tol = 1e-4;
  int max_iter = 1000;
  int k_folds = 10;
  std::uint64_t seed = 1;
};

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-")
    std::cout << text;
  else
    write_text(out, text);
}

SolverSettings solver_settings(const CommonFit& c) {
  SolverSettings s;
  s.tol = c.tol;
  s.max_iter = c.max_iter;
  return s;
}

LambdaSelection cv_selection(const std::string& grid, double anchor, int k_folds) {
  LambdaSelection sel;
  sel.method = LambdaMethod::cv;
  sel.k_folds = k_folds;
  if (grid == "auto") {
    sel.grid = default_lambda_grid(anchor);
  } else {
    std::stringstream ss(grid);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) sel.grid.push_back(parse_double(cell, 1, ++col));
  }
  return sel;
}

// Resolves --lambda into a number; cv runs the default grid anchored at λ̂₀.
double resolve_lambda(const CommonFit& c, const DatasetFiles& files, const FitResult& ts) {
  if (c.lambda == "plugin") return lambda_plugin(ts);
  if (c.lambda == "oracle") {
    if (!files.truth) throw InputError("--lambda oracle needs params in manifest.json");
    return lambda_oracle(*files.truth);
  }
  if (c.lambda == "cv") {
    auto rng = make_stream(c.seed);
    const auto sel = cv_selection("auto", lambda_plugin(ts), c.k_folds);
    return cross_validate_lambda(files.data, sel, solver_settings(c), rng).lambda_min;
  }
  const double value = parse_double(c.lambda, 1, 1);
  if (!(value > 0)) throw InputError("--lambda must be positive");
  return value;
}

void add_fit_options(CLI::App* cmd, CommonFit& c) {
  cmd->add_option("--input-dir", c.input_dir, "Dataset directory (A.csv, X.csv, y.csv)")
      ->required();
  cmd->add_option("--lambda", c.lambda, "value | plugin | cv | oracle")->capture_default_str();
  cmd->add_option("--tol", c.tol, "Solver tolerance on centrality change")->capture_default_str();
  cmd->add_option("--max-iter", c.max_iter, "Solver iteration cap")->capture_default_str();
  cmd->add_option("--k-folds", c.k_folds, "Cross-validation folds")->capture_default_str();
  cmd->add_option("--seed", c.seed, "Seed for fold assignment")->capture_default_str();
}

int run(int argc, char** argv) {
  CLI::App app{"Supervised network centrality estimation"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  SimulationConfig cfg;
  std::string sim_out;
  std::string sim_preset;
  cfg.sigma_a = 0.25;
  cfg.sigma_y = 0.25;
  sim->add_option("--out", sim_out, "Output directory")->required();
  sim->add_option("--preset", sim_preset, "toy: start from the toy configuration");
  sim->add_option("--seed", cfg.seed)->capture_default_str();
  sim->add_option("--n", cfg.n)->capture_default_str();
  sim->add_option("--sigma-a", cfg.sigma_a)->capture_default_str();
  sim->add_option("--sigma-y", cfg.sigma_y)->capture_default_str();
  sim->add_option("--beta-u", cfg.beta_u)->capture_default_str();
  sim->add_option("--beta-v", cfg.beta_v)->capture_default_str();
  sim->add_option("--d", cfg.d)->capture_default_str();
  sim->add_option("--v-mixing", cfg.v_mixing)->capture_default_str();

  // fit
  auto* fit = app.add_subcommand("fit", "Fit two-stage or SuperCENT and write a FitResult JSON");
  CommonFit fit_opts;
  std::string method = "supercent";
  std::string fit_out;
  bool symmetric = false;
  add_fit_options(fit, fit_opts);
  fit->add_option("--method", method, "two-stage | supercent")->capture_default_str();
  fit->add_option("--out", fit_out, "FitResult JSON path (stdout if omitted)");
  fit->add_flag("--symmetric", symmetric, "Undirected network: v = u");

  // cv
  auto* cv = app.add_subcommand("cv", "Cross-validate the tuning parameter");
  CommonFit cv_opts;
  std::string grid = "auto";
  std::string cv_out = ".";
  add_fit_options(cv, cv_opts);
  cv->add_option("--grid", grid, "auto or comma-separated lambdas")->capture_default_str();
  cv->add_option("--out", cv_out, "Output directory")->capture_default_str();

  // predict
  auto* pred = app.add_subcommand("predict", "Centralities and responses for new nodes");
  std::string a_all_path, x_star_path, fit_path, pred_out = ".";
  pred->add_option("--a-all", a_all_path, "Augmented network CSV, training nodes first")
      ->required();
  pred->add_option("--x-star", x_star_path, "Covariates of the new nodes")->required();
  pred->add_option("--fit", fit_path, "FitResult JSON")->required();
  pred->add_option("--out", pred_out, "Output directory")->capture_default_str();

  // infer
  auto* inf = app.add_subcommand("infer", "Confidence intervals for coefficients and A0 entries");
  CommonFit inf_opts;
  std::string variant = "ts";
  double alpha = 0.05;
  std::string inf_out = ".";
  add_fit_options(inf, inf_opts);
  inf->add_option("--variant", variant, "ts-adhoc | ts-oracle | ts | sc-oracle | sc-cv")
      ->capture_default_str();
  inf->add_option("--alpha", alpha)->capture_default_str();
  inf->add_option("--out", inf_out, "Output directory")->capture_default_str();

  // panel
  auto* panel = app.add_subcommand("panel", "Run a Monte Carlo panel");
  std::string preset = "toy";
  int reps = 200;
  std::uint64_t panel_seed = 20210101;
  int jobs = 1;
  std::string panel_out = "metrics.csv";
  std::vector<std::string> plots;
  panel->add_option("--preset", preset, "toy | consistent | inconsistent")->capture_default_str();
  panel->add_option("--reps", reps)->capture_default_str();
  panel->add_option("--seed", panel_seed)->capture_default_str();
  panel->add_option("--jobs", jobs)->capture_default_str();
  panel->add_option("--out", panel_out, "MetricsTable CSV path")->capture_default_str();
  panel->add_option("--plot", plots, "Metrics to chart as SVG next to the CSV");

  // backtest
  auto* bt = app.add_subcommand("backtest", "Long-short portfolio on centrality scores");
  std::string bt_input, bt_out = ".";
  int k = 3;
  bt->add_option("--input", bt_input, "CSV: period,asset,score,next_return")->required();
  bt->add_option("--k", k, "Positions per side")->capture_default_str();
  bt->add_option("--out", bt_out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (*sim) {
    if (sim_preset == "toy") {
      SimulationConfig toy = toy_config();
      for (auto* name : {"--n", "--sigma-y", "--beta-u", "--beta-v", "--d", "--v-mixing"}) {
        if (sim->count(name)) continue;
        const std::string s = name;
        if (s == "--n") cfg.n = toy.n;
        if (s == "--sigma-y") cfg.sigma_y = toy.sigma_y;
        if (s == "--beta-u") cfg.beta_u = toy.beta_u;
        if (s == "--beta-v") cfg.beta_v = toy.beta_v;
        if (s == "--d") cfg.d = toy.d;
        if (s == "--v-mixing") cfg.v_mixing = toy.v_mixing;
      }
    } else if (!sim_preset.empty()) {
      throw InputError("unknown simulate preset '" + sim_preset + "'");
    }
    auto rng = make_stream(cfg.seed);
    const auto [truth, data] = simulate(cfg, rng);
    write_dataset(sim_out, data, &truth, cfg.seed);
    return 0;
  }

  if (*fit) {
    const auto files = read_dataset(fit_opts.input_dir);
    const Method m = method_from_string(method);
    FitResult result;
    if (symmetric) {
      if (m != Method::supercent) throw InputError("--symmetric applies to --method supercent");
      SolverSettings s = solver_settings(fit_opts);
      s.lambda = parse_double(fit_opts.lambda, 1, 1);
      result = fit_supercent_symmetric(files.data, s);
    } else {
      const FitResult ts = fit_two_stage(files.data);
      if (m == Method::two_stage) {
        result = ts;
      } else {
        SolverSettings s = solver_settings(fit_opts);
        s.lambda = resolve_lambda(fit_opts, files, ts);
        result = fit_supercent(files.data, s, ts);
      }
    }
    emit(fit_out, fit_to_json(result));
    return 0;
  }

  if (*cv) {
    const auto files = read_dataset(cv_opts.input_dir);
    const FitResult ts = fit_two_stage(files.data);
    const double anchor = grid == "auto" ? lambda_plugin(ts) : 0.0;
    const auto sel = cv_selection(grid, anchor, cv_opts.k_folds);
    auto rng = make_stream(cv_opts.seed);
    const auto outcome = cross_validate_lambda(files.data, sel, solver_settings(cv_opts), rng);
    write_text(fs::path(cv_out) / "cv_table.csv", format_cv_table(outcome));
    write_text(fs::path(cv_out) / "selection.json", selection_to_json(outcome, sel));
    return 0;
  }

  if (*pred) {
    const FitResult f = fit_from_json(read_text(fit_path));
    AugmentedNetwork aug;
    aug.a_all = read_csv_matrix(a_all_path);
    aug.n_train = f.n();
    aug.n_new = aug.a_all.rows() - f.n();
    const Eigen::MatrixXd x_star = read_csv_matrix(x_star_path);
    if (x_star.rows() != aug.n_new)
      throw InputError("X_star has " + std::to_string(x_star.rows()) + " rows, A_all has " +
                       std::to_string(aug.n_new) + " new nodes");
    const auto nc = estimate_new_centralities(aug, f.u_hat, f.v_hat);
    const Eigen::VectorXd y_hat = predict_response(x_star, nc.u_star, nc.v_star, f);
    Eigen::MatrixXd cents(nc.u_star.size(), 2);
    cents << nc.u_star, nc.v_star;
    write_csv_matrix(fs::path(pred_out) / "y_hat.csv", y_hat);
    write_csv_matrix(fs::path(pred_out) / "centralities.csv", cents);
    return 0;
  }

  if (*inf) {
    const auto files = read_dataset(inf_opts.input_dir);
    const CiVariant v = ci_variant_from_string(variant);
    const bool oracle = v == CiVariant::ts_oracle || v == CiVariant::sc_oracle;
    if (oracle && !files.truth)
      throw InputError("variant " + variant + " needs params in manifest.json");
    const FitResult ts = fit_two_stage(files.data);
    std::optional<FitResult> sc;
    double lambda = 0.0;
    if (v == CiVariant::sc_oracle || v == CiVariant::sc_cv) {
      CommonFit opts = inf_opts;
      if (v == CiVariant::sc_oracle) opts.lambda = "oracle";
      SolverSettings s = solver_settings(opts);
      lambda = s.lambda = resolve_lambda(opts, files, ts);
      sc = fit_supercent(files.data, s, ts);
    }
    const auto* truth = files.truth ? &*files.truth : nullptr;
    const auto cis = ci_beta(files.data, ts, sc ? &*sc : nullptr, truth, v, alpha);

    std::optional<std::string> se_path;
    std::optional<NetworkEntryInference> se;
    switch (v) {
      case CiVariant::ts_oracle:
        se = se_network_entries_two_stage(truth->u, truth->v, truth->sigma_a * truth->sigma_a,
                                          alpha);
        break;
      case CiVariant::ts:
        se = se_network_entries_two_stage(ts.u_hat, ts.v_hat, ts.sigma_a_hat_sq, alpha);
        break;
      case CiVariant::sc_oracle:
        se = se_network_entries_supercent(point_from_truth(*truth), files.data.x(), lambda, alpha);
        break;
      case CiVariant::sc_cv:
        se = se_network_entries_supercent(point_from_fit(*sc), files.data.x(), lambda, alpha);
        break;
      case CiVariant::ts_adhoc:
        break;
    }
    if (se) {
      se_path = (fs::path(inf_out) / "network_se.csv").string();
      write_csv_matrix(*se_path, se->se);
    }
    write_text(fs::path(inf_out) / "inference.json", inference_report_json(v, alpha, cis, se_path));
    return 0;
  }

  if (*panel) {
    const ExperimentSpec spec = preset_spec(preset, reps, panel_seed, jobs);
    const MetricsTable table = run_panel(spec);
    write_text(panel_out, format_metrics_csv(table));
    for (const auto& metric : plots) {
      fs::path svg = fs::path(panel_out).replace_extension();
      svg += "_" + metric + ".svg";
      write_text(svg, metrics_svg(table, metric));
    }
    return 0;
  }

  if (*bt) {
    const auto result = long_short_returns(parse_backtest_csv(read_text(bt_input)), k);
    write_text(fs::path(bt_out) / "backtest.csv", format_backtest_csv(result));
    write_text(fs::path(bt_out) / "summary.json", backtest_summary_json(result));
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.kind() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: internal: " << e.what() << "\n";
    return 3;
  }
}
