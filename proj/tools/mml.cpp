// Command-line entry point for scenario sweeps and curve post-processing.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure.

#include "mml/harness/analysis.hpp"
#include "mml/harness/config.hpp"
#include "mml/harness/curve.hpp"
#include "mml/harness/runner.hpp"
#include "mml/harness/selftest.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace {

constexpr int exit_config = 2;
constexpr int exit_numerical = 3;

int report_failures(const mml::RunReport& r) {
  for (const auto& f : r.failures) std::cerr << "cell failed (" << f.cell.describe() << "): " << f.message << '\n';
  return r.failures.empty() ? 0 : exit_numerical;
}

int cmd_run(const std::string& file, int workers, const std::string& output) {
  mml::ScenarioConfig cfg = mml::load_config(file);
  if (workers > 0) cfg.workers = workers;
  if (!output.empty()) cfg.output = output;
  cfg.validate();
  spdlog::info("scenario {} ({}), output {}", cfg.id, mml::kind_name(cfg.kind), cfg.output.string());
  const auto report = mml::run_scenario(cfg);
  for (const auto& f : report.files) std::cout << f.string() << '\n';
  if (report.table) std::cout << report.table->string() << '\n';
  return report_failures(report);
}

int cmd_memory_time(const std::string& file, double f0, int degree, double margin, const std::string& column) {
  const mml::FidelityCurve curve = mml::load_curve(file);
  mml::MemoryTimeOptions opt;
  opt.degree = degree;
  opt.margin = margin;
  opt.column = mml::parse_column(column);
  const auto mt = mml::memory_time(curve, f0, opt);
  if (mt.beyond_horizon) {
    std::printf("t0 beyond horizon %.10g (N=%d N_d=%d F0=%g)\n", mt.horizon, curve.N, curve.Nd, f0);
    return 0;
  }
  std::printf("t0 %.10g (N=%d N_d=%d F0=%g)\n", mt.t0, curve.N, curve.Nd, f0);
  std::printf("raw crossing %.10g, window [0, %.10g], degree %d, rms residual %.3g, degree spread %.3g%s\n",
              mt.raw_crossing, mt.window_end, mt.degree, mt.rms_residual, mt.degree_spread,
              mt.fit_fallback ? ", fit had no root (raw crossing used)" : "");
  return 0;
}

int cmd_extrapolate(const std::vector<std::string>& files, const std::string& column) {
  const mml::Column col = mml::parse_column(column);
  std::vector<mml::FidelityCurve> curves;
  for (const auto& f : files) curves.push_back(mml::load_curve(f));
  for (const auto& c : curves)
    if (c.N != curves.front().N) throw mml::ConfigError("extrapolate: curves have different N");
  std::size_t len = curves.front().size();
  for (const auto& c : curves) len = std::min(len, c.size());
  std::printf("t,limit,mode,spread\n");
  for (std::size_t i = 0; i < len; ++i) {
    std::vector<mml::NdSample> pts;
    const double t = curves.front().times[i];
    for (const auto& c : curves) {
      if (std::abs(c.times[i] - t) > 1e-12 * std::max(1.0, t))
        throw mml::ConfigError("extrapolate: curves use different time grids");
      pts.push_back({c.Nd, mml::column_values(c, col)[i]});
    }
    const auto ex = mml::extrapolate_nd(pts, col);
    std::printf("%.10g,%.12g,%s,%.3g\n", t, ex.limit, mml::mode_name(ex.mode), ex.spread);
  }
  return 0;
}

int cmd_scaling(const std::string& file, double f0, int nd) {
  std::ifstream is(file);
  if (!is) throw mml::ConfigError("cannot open " + file);
  const auto tab = mml::read_memory_table(is);
  std::map<std::pair<double, int>, mml::MemoryTimeTable> groups;
  for (const auto& r : tab.rows) {
    if (f0 > 0.0 && std::abs(r.f0 - f0) > 1e-12) continue;
    if (nd > 0 && r.Nd != nd) continue;
    groups[{r.f0, r.Nd}].rows.push_back(r);
  }
  if (groups.empty()) throw mml::ConfigError("scaling: no rows match the filters");
  for (const auto& [key, sub] : groups) {
    const auto fit = mml::scaling_fit(sub);
    for (const auto& w : fit.warnings) spdlog::warn("F0={} N_d={}: {}", key.first, key.second, w);
    std::printf("F0=%g N_d=%d: c=%.6g A=%.6g R2=%.4f (%zu points)\n", key.first, key.second, fit.rate, fit.prefactor,
                fit.r_squared, fit.used);
  }
  return 0;
}

int cmd_prior_knowledge(const std::string& file) {
  mml::ScenarioConfig cfg = mml::load_config(file);
  if (cfg.kind != mml::ScenarioKind::prior_knowledge) throw mml::ConfigError("config kind must be prior-knowledge");
  const auto rows = mml::run_prior_knowledge(cfg);
  mml::write_prior_knowledge(std::cout, rows);
  const auto bad = std::count_if(rows.begin(), rows.end(), [](const auto& r) { return !r.report.holds; });
  std::cerr << rows.size() << " instances, " << bad << " violations\n";
  return bad == 0 ? 0 : exit_numerical;
}

int cmd_selftest() {
  bool ok = true;
  for (const auto& g : mml::run_oracle_gates()) {
    std::printf("%-48s error %.3e  tol %.0e  %s\n", g.name.c_str(), g.error, g.tolerance, g.pass() ? "PASS" : "FAIL");
    ok = ok && g.pass();
  }
  return ok ? 0 : exit_numerical;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_mt("mml"));

  CLI::App app{"Quantum memory fidelity sweeps for Majorana chains"};
  app.require_subcommand(1);

  std::string config, output, curve_file, table_file, column = "f_opt";
  std::vector<std::string> curve_files;
  int workers = 0, degree = 6, nd = 0;
  double threshold = 0.999, margin = 0.2, scaling_f0 = 0.0;

  auto* run = app.add_subcommand("run", "run a scenario sweep");
  run->add_option("config", config, "scenario file (YAML)")->required()->check(CLI::ExistingFile);
  run->add_option("--workers", workers, "concurrent cells (overrides the config)");
  run->add_option("--output", output, "output directory (overrides the config)");

  auto* mt = app.add_subcommand("memory-time", "first time a curve falls below a threshold");
  mt->add_option("curve", curve_file, "curve CSV")->required()->check(CLI::ExistingFile);
  mt->add_option("--threshold", threshold, "threshold F0 in (2/3, 1)")->required();
  mt->add_option("--degree", degree, "fit polynomial degree");
  mt->add_option("--margin", margin, "fit window margin past the first raw crossing");
  mt->add_option("--column", column, "f_opt, f_gauss, f_upper or f_lower");

  auto* ex = app.add_subcommand("extrapolate", "large-N_d limit of curves sharing N and time grid");
  ex->add_option("curves", curve_files, "curve CSVs")->required()->check(CLI::ExistingFile);
  ex->add_option("--column", column, "f_opt (empirical) or f_gauss (1/N_d fit)");

  auto* sc = app.add_subcommand("scaling", "fit t0 = A exp(c N) to a memory-time table");
  sc->add_option("table", table_file, "memory-time CSV")->required()->check(CLI::ExistingFile);
  sc->add_option("--threshold", scaling_f0, "only rows with this F0");
  sc->add_option("--nd", nd, "only rows with this N_d");

  auto* orc = app.add_subcommand("oracle", "dense reference experiments");
  orc->require_subcommand(1);
  auto* pk = orc->add_subcommand("prior-knowledge", "recovery tuned to one ensemble applied to a sub-ensemble");
  pk->add_option("config", config, "prior-knowledge scenario file")->required()->check(CLI::ExistingFile);

  auto* st = app.add_subcommand("selftest", "compare the Gaussian pipeline with dense computations");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_config;
  }

  try {
    if (run->parsed()) return cmd_run(config, workers, output);
    if (mt->parsed()) return cmd_memory_time(curve_file, threshold, degree, margin, column);
    if (ex->parsed()) return cmd_extrapolate(curve_files, column);
    if (sc->parsed()) return cmd_scaling(table_file, scaling_f0, nd);
    if (pk->parsed()) return cmd_prior_knowledge(config);
    if (st->parsed()) return cmd_selftest();
  } catch (const mml::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return exit_config;
  } catch (const mml::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return exit_numerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_numerical;
  }
  return exit_config;
}
