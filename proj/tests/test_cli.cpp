#include <Eigen/Dense>
#include <cstdlib>
#include <filesystem>
#include <string>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "supercent/io.hpp"

using namespace supercent;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("supercent_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Run cli(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd =
      std::string("\"") + SUPERCENT_CLI + "\" " + args + " 2> \"" + err.string() + "\" > /dev/null";
  const int raw = std::system(cmd.c_str());
  return {WIFEXITED(raw) ? WEXITSTATUS(raw) : -1, fs::exists(err) ? read_text(err) : ""};
}

}  // namespace

TEST_CASE("simulate then fit two-stage on noiseless data") {
  const auto dir = scratch("fit");
  const auto data = dir / "data";
  REQUIRE(cli("simulate --out " + data.string() + " --n 40 --sigma-a 0 --sigma-y 0 --seed 3", dir)
              .status == 0);
  REQUIRE(cli("fit --input-dir " + data.string() + " --method two-stage --out " +
                  (dir / "fit.json").string(),
              dir)
              .status == 0);
  const auto files = read_dataset(data);
  REQUIRE(files.truth.has_value());
  const auto fit = fit_from_json(read_text(dir / "fit.json"));
  const auto& t = *files.truth;
  CHECK(testing_support::mse(fit.u_hat, t.u) < 1e-8);
  CHECK(testing_support::mse(fit.v_hat, t.v) < 1e-8);
  CHECK(std::abs(std::abs(fit.beta_u_hat) - t.beta_u) < 1e-8);
  CHECK(testing_support::max_abs(fit.beta_x_hat - t.beta_x) < 1e-8);
}

TEST_CASE("simulate writes exactly the generated dataset") {
  const auto dir = scratch("sim");
  REQUIRE(cli("simulate --out " + (dir / "d").string() + " --n 30 --sigma-a 0.5 --seed 11", dir)
              .status == 0);
  SimulationConfig cfg;
  cfg.n = 30;
  cfg.sigma_a = 0.5;
  cfg.sigma_y = 0.25;
  cfg.seed = 11;
  Rng rng = make_stream(11);
  const auto [truth, data] = simulate(cfg, rng);
  const auto back = read_dataset(dir / "d");
  CHECK(back.data.a() == data.a());
  CHECK(back.data.y() == data.y());
  CHECK(back.truth->u == truth.u);
}

TEST_CASE("supercent fit, cv, inference and prediction") {
  const auto dir = scratch("sc");
  const auto data = (dir / "data").string();
  REQUIRE(cli("simulate --out " + data + " --n 40 --sigma-a 0.5 --sigma-y 0.5 --seed 5", dir)
              .status == 0);

  REQUIRE(cli("cv --input-dir " + data + " --grid auto --out " + (dir / "cv").string(), dir)
              .status == 0);
  const auto sel = nlohmann::json::parse(read_text(dir / "cv" / "selection.json"));
  REQUIRE(sel["grid"].size() == 21);
  const auto files = read_dataset(dir / "data");
  const double anchor = lambda_plugin(fit_two_stage(files.data));
  CHECK(sel["grid"][10].get<double>() == doctest::Approx(anchor).epsilon(1e-12));
  CHECK(read_text(dir / "cv" / "cv_table.csv").rfind("lambda,fold,sse,status", 0) == 0);

  const auto fit_path = (dir / "sc.json").string();
  REQUIRE(cli("fit --input-dir " + data + " --method supercent --lambda oracle --out " + fit_path,
              dir)
              .status == 0);
  const auto fit = fit_from_json(read_text(fit_path));
  CHECK(fit.method == Method::supercent);

  REQUIRE(cli("infer --input-dir " + data + " --variant ts --out " + (dir / "inf").string(), dir)
              .status == 0);
  const auto inf = nlohmann::json::parse(read_text(dir / "inf" / "inference.json"));
  CHECK(inf["variant"] == "ts");
  CHECK(inf["coefficients"].size() == 5);
  CHECK(read_csv_matrix(dir / "inf" / "network_se.csv").rows() == 40);

}

TEST_CASE("prediction for new nodes") {
  const auto dir = scratch("pred");
  Rng rng = make_stream(7);
  const auto [truth, data] = simulate(testing_support::small_config(0, 0, 24), rng);
  std::vector<Eigen::Index> train(20);
  for (int i = 0; i < 20; ++i) train[i] = i;
  write_dataset(dir / "train", data.subset(train), nullptr, 0);
  write_csv_matrix(dir / "a_all.csv", data.a());
  write_csv_matrix(dir / "x_star.csv", data.x().bottomRows(4));
  const auto fit_path = (dir / "fit.json").string();
  REQUIRE(cli("fit --input-dir " + (dir / "train").string() + " --method two-stage --out " + fit_path, dir)
              .status == 0);
  REQUIRE(cli("predict --a-all " + (dir / "a_all.csv").string() + " --x-star " +
                  (dir / "x_star.csv").string() + " --fit " + fit_path + " --out " +
                  (dir / "out").string(),
              dir)
              .status == 0);
  const auto yhat = read_csv_matrix(dir / "out" / "y_hat.csv");
  CHECK(testing_support::max_abs(yhat.col(0) - data.y().tail(4)) < 1e-8);
}

TEST_CASE("panel preset toy equals the direct experiment") {
  const auto dir = scratch("panel");
  const auto out = dir / "metrics.csv";
  REQUIRE(cli("panel --preset toy --reps 2 --seed 9 --out " + out.string() + " --plot sin_u", dir)
              .status == 0);
  CHECK(read_text(out) == format_metrics_csv(toy_experiment(toy_sigma_a_grid(), 2, 9)));
  CHECK(fs::exists(dir / "metrics_sin_u.svg"));
}

TEST_CASE("backtest command") {
  const auto dir = scratch("bt");
  write_text(dir / "in.csv",
             "period,asset,score,next_return\n1,a,1,0.10\n1,b,2,0\n1,c,3,0\n1,d,4,-0.02\n");
  REQUIRE(cli("backtest --input " + (dir / "in.csv").string() + " --k 1 --out " +
                  (dir / "out").string(),
              dir)
              .status == 0);
  const auto j = nlohmann::json::parse(read_text(dir / "out" / "summary.json"));
  CHECK(j["mean_return"].get<double>() == doctest::Approx(0.12));
  CHECK(cli("backtest --input " + (dir / "in.csv").string() + " --k 3 --out " +
                (dir / "out").string(),
            dir)
            .status != 0);
}

TEST_CASE("errors are reported on one machine-readable line") {
  const auto dir = scratch("err");
  const auto data = dir / "data";
  REQUIRE(cli("simulate --out " + data.string() + " --n 12 --seed 1", dir).status == 0);
  write_text(data / "X.csv", "1,2,3\n1,oops,3\n");
  const auto bad = cli("fit --input-dir " + data.string(), dir);
  CHECK(bad.status != 0);
  CHECK(bad.err.rfind("error: parse:", 0) == 0);
  CHECK(bad.err.find("row 2") != std::string::npos);
  CHECK(bad.err.find("column 2") != std::string::npos);

  write_csv_matrix(data / "X.csv", Eigen::MatrixXd::Ones(11, 1));
  const auto dims = cli("fit --input-dir " + data.string(), dir);
  CHECK(dims.status != 0);
  CHECK(dims.err.rfind("error: input:", 0) == 0);

  CHECK(cli("fit", dir).status != 0);
  CHECK(cli("panel --preset nope", dir).status != 0);
}
