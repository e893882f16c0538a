#pragma once

// Sweep execution: one fidelity curve per (N, N_d, beta) cell, written as
// CSV + sidecar, plus an optional memory-time table. Cells run on a small
// thread pool; a failing cell is logged with its coordinates and skipped.

#include "mml/channels.hpp"
#include "mml/core.hpp"
#include "mml/harness/analysis.hpp"
#include "mml/harness/config.hpp"
#include "mml/harness/curve.hpp"
#include "mml/kitaev.hpp"
#include "mml/oracle.hpp"
#include "mml/recovery.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace mml {

struct Cell {
  int N = 0;
  int Nd = 1;
  double beta = std::numeric_limits<double>::infinity();

  std::string describe() const {
    std::ostringstream os;
    os << "N=" << N << " N_d=" << Nd;
    if (std::isfinite(beta)) os << " beta=" << beta;
    return os.str();
  }
};

inline bool is_curve_kind(ScenarioKind k) {
  return k != ScenarioKind::diagnostics && k != ScenarioKind::prior_knowledge;
}

/// Cells in a fixed order: N outermost, then N_d, then beta.
inline std::vector<Cell> sweep_cells(const ScenarioConfig& c) {
  std::vector<Cell> out;
  const bool uses_nd = c.kind != ScenarioKind::lindblad;
  const bool uses_beta = c.kind == ScenarioKind::thermal_quench || c.kind == ScenarioKind::lindblad;
  const std::vector<int> nds = uses_nd ? c.Nd : std::vector<int>{1};
  const std::vector<double> betas =
      uses_beta ? c.betas : std::vector<double>{std::numeric_limits<double>::infinity()};
  for (int n : c.N)
    for (int nd : nds)
      for (double b : betas) out.push_back(Cell{n, nd, b});
  return out;
}

inline std::string cell_file_name(const ScenarioConfig& c, const Cell& cell) {
  std::string name = c.id + "_N" + std::to_string(cell.N) + "_Nd" + std::to_string(cell.Nd);
  if (c.kind == ScenarioKind::thermal_quench || (c.kind == ScenarioKind::lindblad && std::isfinite(cell.beta)))
    name += "_beta" + (std::isinf(cell.beta) ? std::string("inf") : detail::format_double(cell.beta));
  return name + ".csv";
}

inline ChainParams cell_chain(const ScenarioConfig& c, int n) {
  ChainParams p = c.chain;
  p.N = n;
  p.site_mu.clear();
  return p;
}

inline PerturbationEnsemble make_ensemble(const ScenarioConfig& c, const Cell& cell) {
  const ChainParams p = cell_chain(c, cell.N);
  switch (c.kind) {
    case ScenarioKind::quench:
    case ScenarioKind::thermal_quench:
    case ScenarioKind::diagnostics:
      return quench_ensemble(p, c.mu_minus, c.mu_plus, cell.Nd);
    case ScenarioKind::swap_drive: {
      auto e = swap_drive(p, c.mu_minus, c.mu_plus, c.dwell, cell.Nd);
      e.seed = c.seed;
      return e;
    }
    case ScenarioKind::square_wave_drive: {
      DriveSpec d;
      d.N = cell.N;
      d.J = c.chain.J;
      d.mu_bar = c.square.mu_bar;
      d.delta_bar = c.square.delta_bar;
      d.omega = c.square.omega;
      d.dmu_min = c.square.dmu.min;
      d.dmu_max = c.square.dmu.max;
      d.n_dmu = cell.Nd;
      d.ddelta_min = c.square.ddelta.min;
      d.ddelta_max = c.square.ddelta.max;
      d.n_ddelta = c.square.ddelta.count;
      d.disorder_min = c.square.disorder_min;
      d.disorder_max = c.square.disorder_max;
      d.phase_offsets = c.square.phase_offsets;
      d.seed = c.seed;
      return square_wave_drive(d);
    }
    default:
      throw ConfigError(std::string("scenario kind ") + kind_name(c.kind) + " has no perturbation ensemble");
  }
}

struct CellResult {
  FidelityCurve curve;
  nlohmann::json info;  // per-cell facts for the sidecar
};

namespace detail {

// Tracks the first crossing of the truncation threshold.
struct Truncation {
  std::optional<double> threshold;
  double factor = 1.5;
  std::optional<double> crossed;

  void observe(double t, double f) {
    if (threshold && !crossed && f < *threshold) crossed = t;
  }
  bool done(double t) const { return crossed && t >= factor * *crossed; }
};

inline const std::optional<std::vector<double>>& column_ref(const FidelityCurve& c, Column col) {
  switch (col) {
    case Column::f_opt: return c.f_opt;
    case Column::f_gauss: return c.f_gauss;
    case Column::f_upper: return c.f_upper;
    case Column::f_lower: return c.f_lower;
  }
  return c.f_opt;
}

}  // namespace detail

/// Computes one curve. Unitary ensembles at beta = inf get f_opt and f_gauss;
/// finite beta replaces f_opt by the assignment upper bound; Lindblad runs
/// report f_gauss and the Uhlmann bounds.
inline CellResult compute_cell(const ScenarioConfig& c, const Cell& cell) {
  if (!is_curve_kind(c.kind)) throw ConfigError(std::string(kind_name(c.kind)) + " does not produce curves");
  const ChainParams p = cell_chain(c, cell.N);
  CellResult res;
  FidelityCurve& out = res.curve;
  out.N = cell.N;
  out.Nd = cell.Nd;
  out.seed = c.seed;
  out.scenario_id = c.id;
  const auto grid = c.time.points();
  detail::Truncation trunc{c.time.truncate_threshold, c.time.truncate_factor, {}};

  if (c.kind == ScenarioKind::lindblad) {
    LindbladSpec spec{build_generator(p).embedded(1), c.loss_rate, 1};
    const EncodedPair pair = encode_pair(p, Axis::x, cell.beta);
    std::vector<double> g{0.0};
    for (double t : grid)
      if (t > 0.0) g.push_back(t);
    const auto plus = lindblad_evolve(pair.gamma_plus, spec, g);
    const auto minus = lindblad_evolve(pair.gamma_minus, spec, g);
    out.f_gauss.emplace();
    out.f_upper.emplace();
    out.f_lower.emplace();
    const std::size_t skip = grid.front() > 0.0 ? 1 : 0;
    for (std::size_t i = skip; i < g.size(); ++i) {
      const FidelityBounds b = lindblad_bounds(plus[i], minus[i]);
      out.times.push_back(g[i]);
      out.f_gauss->push_back(gaussian_fidelity(plus[i], minus[i]));
      out.f_upper->push_back(b.upper);
      out.f_lower->push_back(b.lower);
      const auto& col = detail::column_ref(out, c.mt.column);
      if (col) trunc.observe(g[i], col->back());
      if (trunc.done(g[i])) break;
    }
    res.info["ensemble"] = "lindblad-loss";
    res.info["lossless_modes"] = 1;
    return res;
  }

  const PerturbationEnsemble e = make_ensemble(c, cell);
  out.Nd = static_cast<int>(e.size());
  const EnsembleEvolver ev(e);
  const EncodedPair pair = encode_pair(p, Axis::x, cell.beta);
  const bool pure = std::isinf(cell.beta);
  std::optional<GramTracker> tracker;
  if (pure) {
    tracker.emplace(e, diagonalize(build_generator(p)), c.gram);
    tracker->reset();
    out.f_opt.emplace();
  } else {
    out.f_upper.emplace();
  }
  out.f_gauss.emplace();
  double max_discrepancy = 0.0;
  for (double t : grid) {
    out.times.push_back(t);
    if (pure) {
      const GramPair g = t > 0.0 ? tracker->step_to(t) : tracker->reset();
      const auto rep = optimal_fidelity_report(g);
      out.f_opt->push_back(rep.value);
      max_discrepancy = std::max(max_discrepancy, rep.discrepancy);
    } else {
      out.f_upper->push_back(thermal_upper_bound(ev, pair, t));
    }
    const CmPair cm = ensemble_average_cm(ev, pair.gamma_plus, pair.gamma_minus, t);
    out.f_gauss->push_back(gaussian_fidelity(cm.plus, cm.minus));
    const auto& col = detail::column_ref(out, c.mt.column);
    if (col) trunc.observe(t, col->back());
    if (trunc.done(t)) break;
  }
  res.info["ensemble"] = e.descriptor;
  res.info["members"] = e.size();
  if (pure) res.info["pure_state_cross_check_max_discrepancy"] = max_discrepancy;
  return res;
}

struct CellFailure {
  Cell cell;
  std::string message;
};

struct RunReport {
  std::vector<std::filesystem::path> files;
  std::vector<CellFailure> failures;
  std::optional<std::filesystem::path> table;
};

inline nlohmann::json cell_json(const Cell& cell) {
  return {{"N", cell.N}, {"N_d", cell.Nd}, {"beta", detail::json_double(cell.beta)}};
}

/// Memory times of every curve for every configured threshold.
inline MemoryTimeTable memory_table(const std::vector<FidelityCurve>& curves, const ScenarioConfig& c) {
  MemoryTimeTable tab;
  for (const auto& curve : curves)
    for (double f0 : c.thresholds) tab.rows.push_back(MemoryTimeRow{curve.N, curve.Nd, f0, memory_time(curve, f0, c.mt)});
  return tab;
}

// ---------------------------------------------------------------------------
// Table-valued scenarios

struct DiagnosticRow {
  int N = 0;
  ConditionDiagnostic d;
};

inline std::vector<DiagnosticRow> run_diagnostics(const ScenarioConfig& c) {
  std::vector<DiagnosticRow> rows;
  for (int n : c.N) {
    const Cell cell{n, 2, std::numeric_limits<double>::infinity()};
    const auto e = make_ensemble(c, cell);
    rows.push_back(DiagnosticRow{n, condition_diagnostic(e, cell_chain(c, n), c.diagnostic_t, 0, 1)});
  }
  return rows;
}

struct PriorKnowledgeInstance {
  int N = 0;
  double i1_lo = 0.0, i1_hi = 0.0, i2_lo = 0.0, i2_hi = 0.0, t = 0.0;
  oracle::PriorKnowledgeReport report;
};

/// Random (I1, I2, t, input state) instances. I2 spans a random run of
/// consecutive grid points of I1.
inline std::vector<PriorKnowledgeInstance> run_prior_knowledge(const ScenarioConfig& c) {
  std::mt19937_64 rng(c.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto& pk = c.prior;
  std::vector<PriorKnowledgeInstance> out;
  for (int n : c.N)
    for (int i = 0; i < pk.instances; ++i) {
      PriorKnowledgeInstance inst;
      inst.N = n;
      double a = pk.mu_min + (pk.mu_max - pk.mu_min) * unit(rng);
      double b = pk.mu_min + (pk.mu_max - pk.mu_min) * unit(rng);
      if (a > b) std::swap(a, b);
      if (b - a < 1e-3) b = a + 1e-3;
      inst.i1_lo = a;
      inst.i1_hi = b;
      const auto grid = uniform_grid(a, b, pk.n1);
      auto first = static_cast<std::size_t>(unit(rng) * pk.n1);
      auto last = static_cast<std::size_t>(unit(rng) * pk.n1);
      first = std::min<std::size_t>(first, pk.n1 - 1);
      last = std::min<std::size_t>(last, pk.n1 - 1);
      if (first > last) std::swap(first, last);
      inst.i2_lo = grid[first];
      inst.i2_hi = grid[last];
      inst.t = pk.t_min + (pk.t_max - pk.t_min) * unit(rng);
      const double theta = std::acos(1.0 - 2.0 * unit(rng));
      const double phi = 2.0 * std::numbers::pi * unit(rng);
      const Complex alpha(std::cos(0.5 * theta), 0.0);
      const Complex beta = std::polar(std::sin(0.5 * theta), phi);
      inst.report = oracle::prior_knowledge_experiment(cell_chain(c, n), inst.i1_lo, inst.i1_hi, inst.i2_lo, inst.i2_hi,
                                                       inst.t, pk.n1, alpha, beta);
      out.push_back(inst);
    }
  return out;
}

inline void write_diagnostics(std::ostream& os, const std::vector<DiagnosticRow>& rows, double t) {
  using detail::format_double;
  os << "N,t,abs_x,flagged,sv1,sv2,sv3,sv4\n";
  for (const auto& r : rows) {
    os << r.N << ',' << format_double(t) << ',' << format_double(r.d.abs_x) << ',' << (r.d.flagged ? 1 : 0);
    for (Eigen::Index k = 0; k < 4; ++k) {
      os << ',';
      if (k < r.d.singular_values.size()) os << format_double(r.d.singular_values(k));
    }
    os << '\n';
  }
}

inline void write_prior_knowledge(std::ostream& os, const std::vector<PriorKnowledgeInstance>& rows) {
  using detail::format_double;
  os << "instance,N,i1_lo,i1_hi,i2_lo,i2_hi,t,n1,n2,p,epsilon,lhs,bound,holds\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    os << i << ',' << r.N << ',' << format_double(r.i1_lo) << ',' << format_double(r.i1_hi) << ','
       << format_double(r.i2_lo) << ',' << format_double(r.i2_hi) << ',' << format_double(r.t) << ',' << r.report.n1
       << ',' << r.report.n2 << ',' << format_double(r.report.p) << ',' << format_double(r.report.epsilon) << ','
       << format_double(r.report.lhs) << ',' << format_double(r.report.bound) << ',' << (r.report.holds ? 1 : 0)
       << '\n';
  }
}

namespace detail {

inline void write_table_file(const std::filesystem::path& path, const nlohmann::json& meta,
                             const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path.string() + " for writing");
    body(os);
  }
  std::ofstream js(sidecar_path(path), std::ios::binary);
  js << meta.dump(2) << '\n';
}

}  // namespace detail

/// Runs every cell of the scenario and writes its files under c.output.
inline RunReport run_scenario(const ScenarioConfig& c) {
  c.validate();
  RunReport report;
  const nlohmann::json resolved = to_json(c);
  const auto dir = c.output;

  if (c.kind == ScenarioKind::diagnostics) {
    const auto rows = run_diagnostics(c);
    const auto path = dir / (c.id + "_diagnostics.csv");
    detail::write_table_file(path, {{"scenario", resolved}},
                             [&](std::ostream& os) { write_diagnostics(os, rows, c.diagnostic_t); });
    report.files.push_back(path);
    return report;
  }
  if (c.kind == ScenarioKind::prior_knowledge) {
    const auto rows = run_prior_knowledge(c);
    const auto path = dir / (c.id + "_prior_knowledge.csv");
    detail::write_table_file(path, {{"scenario", resolved}}, [&](std::ostream& os) { write_prior_knowledge(os, rows); });
    report.files.push_back(path);
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (!rows[i].report.holds)
        report.failures.push_back({Cell{rows[i].N, 1}, "bound violated in instance " + std::to_string(i)});
    return report;
  }

  const auto cells = sweep_cells(c);
  std::vector<std::optional<FidelityCurve>> curves(cells.size());
  std::vector<std::string> errors(cells.size());
  std::vector<std::filesystem::path> paths(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const Cell& cell = cells[i];
      const auto start = std::chrono::steady_clock::now();
      try {
        CellResult r = compute_cell(c, cell);
        nlohmann::json meta{{"scenario", resolved}, {"cell", cell_json(cell)}, {"cell_info", r.info}};
        paths[i] = dir / cell_file_name(c, cell);
        save_curve(paths[i], r.curve, meta);
        curves[i] = std::move(r.curve);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        spdlog::info("{}: cell {} done ({} points, {:.1f} s)", c.id, cell.describe(), curves[i]->size(), secs);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& ex) {
        errors[i] = ex.what();
        spdlog::error("{}: cell {} failed: {}", c.id, cell.describe(), ex.what());
      }
    }
  };
  const int nthreads = std::min<int>(c.workers, static_cast<int>(cells.size()));
  if (nthreads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    std::exception_ptr config_error;
    std::mutex m;
    for (int w = 0; w < nthreads; ++w)
      pool.emplace_back([&]() {
        try {
          worker();
        } catch (...) {
          std::lock_guard<std::mutex> lock(m);
          if (!config_error) config_error = std::current_exception();
          next = cells.size();
        }
      });
    for (auto& th : pool) th.join();
    if (config_error) std::rethrow_exception(config_error);
  }

  std::vector<FidelityCurve> done;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (curves[i]) {
      report.files.push_back(paths[i]);
      done.push_back(*curves[i]);
    } else {
      report.failures.push_back({cells[i], errors[i]});
    }
  }
  if (!c.thresholds.empty() && !done.empty()) {
    MemoryTimeTable tab;
    try {
      tab = memory_table(done, c);
    } catch (const ConfigError& ex) {
      throw ConfigError(std::string("memory_time: ") + ex.what());
    }
    const auto path = dir / (c.id + "_memory_times.csv");
    detail::write_table_file(path, {{"scenario", resolved}}, [&](std::ostream& os) { write_memory_table(os, tab); });
    report.table = path;
  }
  return report;
}

}  // namespace mml
