#include "supercent/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "supercent/errors.hpp"

namespace supercent {

using nlohmann::json;

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

// Lines without their terminators; trailing blank lines dropped.
std::vector<std::string_view> lines_of(std::string_view text) {
  auto lines = split(text, '\n');
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

}  // namespace

double parse_double(std::string_view cell, std::size_t row, std::size_t col) {
  std::string_view s = trim(cell);
  const auto where = "row " + std::to_string(row) + ", column " + std::to_string(col);
  if (s.empty()) throw ParseError("empty cell at " + where);
  if (s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw ParseError("non-numeric cell '" + std::string(trim(cell)) + "' at " + where);
  return value;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw InputError("write failed for " + path.string());
}

Eigen::MatrixXd parse_csv_matrix(std::string_view text, std::string_view source) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw ParseError(std::string(source) + ": no rows");
  const std::size_t cols = split(lines.front(), ',').size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(lines.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (cells.size() != cols)
      throw ParseError(std::string(source) + ": row " + std::to_string(i + 1) + " has " +
                       std::to_string(cells.size()) + " columns, expected " +
                       std::to_string(cols));
    for (std::size_t j = 0; j < cols; ++j) {
      try {
        m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
            parse_double(cells[j], i + 1, j + 1);
      } catch (const ParseError& e) {
        throw ParseError(std::string(source) + ": " + e.what());
      }
    }
  }
  return m;
}

std::string format_csv_matrix(const Eigen::MatrixXd& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ',';
      out += format_double(m(i, j));
    }
    out += '\n';
  }
  return out;
}

Eigen::MatrixXd read_csv_matrix(const std::filesystem::path& path) {
  return parse_csv_matrix(read_text(path), path.filename().string());
}

void write_csv_matrix(const std::filesystem::path& path, const Eigen::MatrixXd& m) {
  write_text(path, format_csv_matrix(m));
}

namespace {

json to_array(const Eigen::VectorXd& v) {
  return json(std::vector<double>(v.data(), v.data() + v.size()));
}

Eigen::VectorXd vector_field(const json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array()) throw ParseError(std::string("field '") + key + "' must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number())
      throw ParseError(std::string("field '") + key + "' entry " + std::to_string(i) +
                       " is not a number");
    v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  }
  return v;
}

template <class F>
auto guarded_json(std::string_view what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const Dataset& data,
                   const UnifiedModelParams* truth, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  write_csv_matrix(dir / "A.csv", data.a());
  write_csv_matrix(dir / "X.csv", data.x());
  write_csv_matrix(dir / "y.csv", data.y());
  json manifest{{"n", data.n()}, {"p", data.p()}, {"seed", seed}, {"params", nullptr}};
  if (truth) {
    manifest["params"] = {{"d", truth->d},
                          {"u", to_array(truth->u)},
                          {"v", to_array(truth->v)},
                          {"beta_x", to_array(truth->beta_x)},
                          {"beta_u", truth->beta_u},
                          {"beta_v", truth->beta_v},
                          {"sigma_a", truth->sigma_a},
                          {"sigma_y", truth->sigma_y}};
  }
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

DatasetFiles read_dataset(const std::filesystem::path& dir) {
  Eigen::MatrixXd a = read_csv_matrix(dir / "A.csv");
  Eigen::MatrixXd x = read_csv_matrix(dir / "X.csv");
  Eigen::MatrixXd y = read_csv_matrix(dir / "y.csv");
  if (y.cols() != 1) throw InputError("y.csv must have exactly one column");
  if (a.rows() != a.cols())
    throw InputError("A.csv is " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                     ", expected square");
  if (x.rows() != y.rows() || a.rows() != y.rows())
    throw InputError("row counts differ: A " + std::to_string(a.rows()) + ", X " +
                     std::to_string(x.rows()) + ", y " + std::to_string(y.rows()));
  DatasetFiles out{Dataset(std::move(a), std::move(x), y.col(0)), std::nullopt, 0};

  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) return out;
  guarded_json("manifest.json", [&] {
    const json m = json::parse(read_text(manifest_path));
    if (m.at("n").get<Eigen::Index>() != out.data.n() || m.at("p").get<Eigen::Index>() != out.data.p())
      throw InputError("manifest.json n/p disagree with the CSV files");
    out.seed = m.value("seed", std::uint64_t{0});
    const auto& p = m.at("params");
    if (!p.is_null()) {
      UnifiedModelParams t;
      t.d = p.at("d").get<double>();
      t.u = vector_field(p, "u");
      t.v = vector_field(p, "v");
      t.beta_x = vector_field(p, "beta_x");
      t.beta_u = p.at("beta_u").get<double>();
      t.beta_v = p.at("beta_v").get<double>();
      t.sigma_a = p.at("sigma_a").get<double>();
      t.sigma_y = p.at("sigma_y").get<double>();
      if (t.n() != out.data.n() || t.p() != out.data.p())
        throw InputError("manifest.json params disagree with the CSV dimensions");
      out.truth = std::move(t);
    }
    return 0;
  });
  return out;
}

std::string fit_to_json(const FitResult& fit) {
  const json j{{"method", to_string(fit.method)},
               {"d_hat", fit.d_hat},
               {"u_hat", to_array(fit.u_hat)},
               {"v_hat", to_array(fit.v_hat)},
               {"beta_x_hat", to_array(fit.beta_x_hat)},
               {"beta_u_hat", fit.beta_u_hat},
               {"beta_v_hat", fit.beta_v_hat},
               {"sigma_y_hat_sq", fit.sigma_y_hat_sq},
               {"sigma_a_hat_sq", fit.sigma_a_hat_sq},
               {"iterations", fit.iterations},
               {"converged", fit.converged}};
  return j.dump(2) + "\n";
}

FitResult fit_from_json(std::string_view text) {
  return guarded_json("fit JSON", [&] {
    const json j = json::parse(text);
    FitResult f;
    f.method = method_from_string(j.at("method").get<std::string>());
    f.d_hat = j.at("d_hat").get<double>();
    f.u_hat = vector_field(j, "u_hat");
    f.v_hat = vector_field(j, "v_hat");
    f.beta_x_hat = vector_field(j, "beta_x_hat");
    f.beta_u_hat = j.at("beta_u_hat").get<double>();
    f.beta_v_hat = j.at("beta_v_hat").get<double>();
    f.sigma_y_hat_sq = j.at("sigma_y_hat_sq").get<double>();
    f.sigma_a_hat_sq = j.at("sigma_a_hat_sq").get<double>();
    f.iterations = j.at("iterations").get<int>();
    f.converged = j.at("converged").get<bool>();
    if (f.u_hat.size() != f.v_hat.size()) throw ParseError("fit JSON: u_hat and v_hat lengths differ");
    return f;
  });
}

std::string format_cv_table(const CvOutcome& outcome) {
  std::string out = "lambda,fold,sse,status\n";
  for (const auto& c : outcome.table) {
    out += format_double(c.lambda) + ',' + std::to_string(c.fold) + ',' +
           (c.ok ? format_double(c.sse) : std::string("nan")) + ',' + (c.ok ? "ok" : "failed") +
           '\n';
  }
  return out;
}

std::string selection_to_json(const CvOutcome& outcome, const LambdaSelection& selection) {
  const json j{{"lambda_min", outcome.lambda_min},
               {"method", to_string(selection.method)},
               {"grid", selection.grid},
               {"k_folds", selection.k_folds}};
  return j.dump(2) + "\n";
}

std::string inference_report_json(CiVariant variant, double alpha,
                                  const std::vector<CoefficientInference>& coefficients,
                                  const std::optional<std::string>& network_se_csv_path) {
  json coefs = json::array();
  for (const auto& c : coefficients)
    coefs.push_back({{"name", c.name},
                     {"estimate", c.estimate},
                     {"se", c.se},
                     {"ci_lo", c.ci_lo},
                     {"ci_hi", c.ci_hi}});
  json j{{"variant", to_string(variant)}, {"alpha", alpha}, {"coefficients", coefs}};
  if (network_se_csv_path) j["network_se_csv_path"] = *network_se_csv_path;
  return j.dump(2) + "\n";
}

std::string format_metrics_csv(const MetricsTable& table) {
  std::string out =
      "sigma_a,sigma_y,beta_u,estimator,metric,mean,median,sd,q05,q95,n_ok,n_fail\n";
  for (const auto& r : table.rows) {
    out += format_double(r.sigma_a) + ',' + format_double(r.sigma_y) + ',' +
           format_double(r.beta_u) + ',' + r.estimator + ',' + r.metric + ',' +
           format_double(r.mean) + ',' + format_double(r.median) + ',' + format_double(r.sd) +
           ',' + format_double(r.q05) + ',' + format_double(r.q95) + ',' +
           std::to_string(r.n_ok) + ',' + std::to_string(r.n_fail) + '\n';
  }
  return out;
}

std::string metrics_svg(const MetricsTable& table, const std::string& metric) {
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  for (const auto& r : table.rows) {
    if (r.metric != metric || !(r.sigma_a > 0) || !std::isfinite(r.median)) continue;
    const std::string label = r.estimator + " sy=" + format_double(r.sigma_y) +
                              " bu=" + format_double(r.beta_u);
    series[label].emplace_back(std::log2(r.sigma_a), r.median);
  }
  constexpr double W = 640, H = 400, L = 60, R = 200, T = 30, B = 40;
  double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
  for (auto& [label, pts] : series) {
    std::sort(pts.begin(), pts.end());
    for (const auto& [x, y] : pts) {
      x0 = std::min(x0, x), x1 = std::max(x1, x);
      y0 = std::min(y0, y), y1 = std::max(y1, y);
    }
  }
  if (series.empty()) x0 = y0 = 0, x1 = y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<text x=\"" << L << "\" y=\"18\" font-size=\"13\">median " << metric << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 8 << "\">log2 sigma_a</text>\n";
  s << "<text x=\"4\" y=\"" << T + 4 << "\">" << format_double(y1) << "</text>\n";
  s << "<text x=\"4\" y=\"" << H - B << "\">" << format_double(y0) << "</text>\n";
  std::size_t i = 0;
  for (const auto& [label, pts] : series) {
    const char* c = colors[i % 8];
    s << "<polyline fill=\"none\" stroke=\"" << c << "\" points=\"";
    for (const auto& [x, y] : pts) s << px(x) << ',' << py(y) << ' ';
    s << "\"/>\n";
    s << "<text x=\"" << W - R + 8 << "\" y=\"" << T + 14 * i << "\" fill=\"" << c << "\">"
      << label << "</text>\n";
    ++i;
  }
  s << "</svg>\n";
  return s.str();
}

std::vector<BacktestRecord> parse_backtest_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw ParseError("backtest csv: empty input");
  const auto header = split(lines.front(), ',');
  const std::vector<std::string_view> expected{"period", "asset", "score", "next_return"};
  bool ok = header.size() == expected.size();
  for (std::size_t j = 0; ok && j < header.size(); ++j) ok = trim(header[j]) == expected[j];
  if (!ok) throw ParseError("backtest csv: header must be period,asset,score,next_return");

  std::vector<BacktestRecord> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split(lines[i], ',');
    if (cells.size() != 4)
      throw ParseError("backtest csv: row " + std::to_string(i + 1) + " has " +
                       std::to_string(cells.size()) + " columns, expected 4");
    out.push_back({std::string(trim(cells[0])), std::string(trim(cells[1])),
                   parse_double(cells[2], i + 1, 3), parse_double(cells[3], i + 1, 4)});
  }
  return out;
}

std::string format_backtest_csv(const BacktestResult& result) {
  auto join = [](const std::vector<std::string>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ";" : "") + v[i];
    return s;
  };
  std::string out = "period,long_assets,short_assets,return\n";
  for (const auto& p : result.periods)
    out += p.period + ',' + join(p.long_assets) + ',' + join(p.short_assets) + ',' +
           format_double(p.ret) + '\n';
  return out;
}

std::string backtest_summary_json(const BacktestResult& result) {
  const json j{{"mean_return", result.mean_return},
               {"n_periods", result.periods.size()},
               {"k", result.k}};
  return j.dump(2) + "\n";
}

}  // namespace supercent
