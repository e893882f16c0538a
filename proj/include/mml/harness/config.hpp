#pragma once

// Scenario configuration files (YAML). The schema is documented in README.md;
// every physical quantity is in units of J (energies) or 1/J (times).

#include "mml/channels.hpp"
#include "mml/core.hpp"
#include "mml/dense.hpp"
#include "mml/harness/analysis.hpp"
#include "mml/kitaev.hpp"
#include "mml/recovery.hpp"

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace mml {

enum class ScenarioKind { quench, swap_drive, square_wave_drive, thermal_quench, lindblad, diagnostics, prior_knowledge };

inline const char* kind_name(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::quench: return "quench";
    case ScenarioKind::swap_drive: return "swap-drive";
    case ScenarioKind::square_wave_drive: return "square-wave-drive";
    case ScenarioKind::thermal_quench: return "thermal-quench";
    case ScenarioKind::lindblad: return "lindblad";
    case ScenarioKind::diagnostics: return "diagnostics";
    case ScenarioKind::prior_knowledge: return "prior-knowledge";
  }
  return "?";
}

inline ScenarioKind parse_kind(const std::string& s) {
  for (auto k : {ScenarioKind::quench, ScenarioKind::swap_drive, ScenarioKind::square_wave_drive,
                 ScenarioKind::thermal_quench, ScenarioKind::lindblad, ScenarioKind::diagnostics,
                 ScenarioKind::prior_knowledge})
    if (s == kind_name(k)) return k;
  throw ConfigError("unknown scenario kind: " + s);
}

struct TimeGrid {
  double start = 0.0;
  double stop = 10.0;
  int count = 101;
  // Optional early stop: once the first memory-time column falls below
  // `threshold`, stop at factor * (first crossing time).
  std::optional<double> truncate_threshold;
  double truncate_factor = 1.5;

  std::vector<double> points() const { return uniform_grid(start, stop, count); }
};

struct RangeSpec {
  double min = 0.0;
  double max = 0.0;
  int count = 1;
};

struct SquareWaveParams {
  double mu_bar = 0.0;
  double delta_bar = 1.0;
  double omega = 1.0;
  RangeSpec dmu;      // count is replaced by the cell's N_d
  RangeSpec ddelta;
  double disorder_min = 0.0, disorder_max = 0.0;
  int phase_offsets = 1;
};

struct PriorKnowledgeParams {
  int instances = 10;
  int n1 = 7;
  double mu_min = 0.5, mu_max = 3.0;  // I1 is drawn inside this range
  double t_min = 0.5, t_max = 5.0;
};

struct ScenarioConfig {
  std::string id = "scenario";
  ScenarioKind kind = ScenarioKind::quench;
  ChainParams chain{2, 0.0, 1.0, 1.0, {}};  // N is taken from the cell
  double mu_minus = 1.0, mu_plus = 1.5;     // quench-type ensembles
  double dwell = 1.0;                       // swap-drive
  SquareWaveParams square;
  std::vector<double> betas{std::numeric_limits<double>::infinity()};
  double loss_rate = 1.0;      // lindblad
  double diagnostic_t = 10.0;  // diagnostics
  PriorKnowledgeParams prior;
  TimeGrid time;
  std::vector<int> N{8};
  std::vector<int> Nd{1};
  std::uint64_t seed = 0;
  std::filesystem::path output = "out";
  int workers = 1;
  std::vector<double> thresholds;  // memory-time thresholds; empty = no table
  MemoryTimeOptions mt;
  GramOptions gram;

  void validate() const {
    if (id.empty() || id.find_first_of(",\n\r/\\") != std::string::npos)
      throw ConfigError("id must be non-empty without commas, slashes or newlines");
    if (N.empty()) throw ConfigError("N list is empty");
    for (int n : N)
      if (n < 2) throw ConfigError("every N must be at least 2");
    if (Nd.empty()) throw ConfigError("Nd list is empty");
    for (int nd : Nd)
      if (nd < 1) throw ConfigError("every Nd must be at least 1");
    if (!(chain.J > 0.0)) throw ConfigError("chain.J must be positive");
    if (time.count < 2) throw ConfigError("time.count must be at least 2");
    if (!(time.start >= 0.0) || !(time.stop > time.start)) throw ConfigError("time grid needs 0 <= start < stop");
    if (time.truncate_threshold && !(*time.truncate_threshold > 2.0 / 3.0 && *time.truncate_threshold < 1.0))
      throw ConfigError("time.truncate.threshold must lie in (2/3, 1)");
    if (!(time.truncate_factor >= 1.0)) throw ConfigError("time.truncate.factor must be at least 1");
    if (mu_minus > mu_plus) throw ConfigError("ensemble.mu_minus must not exceed ensemble.mu_plus");
    if (!(dwell > 0.0)) throw ConfigError("ensemble.dwell must be positive");
    if (!(square.omega > 0.0)) throw ConfigError("drive.omega must be positive");
    if (square.ddelta.count < 1 || square.phase_offsets < 1) throw ConfigError("drive counts must be at least 1");
    if (square.disorder_min > square.disorder_max) throw ConfigError("drive.disorder min exceeds max");
    if (betas.empty()) throw ConfigError("beta list is empty");
    for (double b : betas)
      if (!(b > 0.0)) throw ConfigError("every beta must be positive (use inf for pure states)");
    if (!(loss_rate >= 0.0)) throw ConfigError("lindblad.loss_rate must be non-negative");
    if (!(diagnostic_t >= 0.0)) throw ConfigError("diagnostics.t must be non-negative");
    if (workers < 1) throw ConfigError("workers must be at least 1");
    for (double f : thresholds)
      if (!(f > 2.0 / 3.0 && f < 1.0)) throw ConfigError("memory_time thresholds must lie in (2/3, 1)");
    if (mt.degree < 1 || !(mt.margin >= 0.0)) throw ConfigError("memory_time.degree >= 1 and margin >= 0 required");
    if (!(gram.max_step > 0.0) || gram.max_refinement < 0) throw ConfigError("bad gram tracker options");
    if (kind == ScenarioKind::prior_knowledge) {
      if (prior.instances < 1 || prior.n1 < 2) throw ConfigError("prior_knowledge needs instances >= 1 and n1 >= 2");
      if (!(prior.mu_min < prior.mu_max) || !(prior.t_min >= 0.0) || !(prior.t_max >= prior.t_min))
        throw ConfigError("prior_knowledge ranges are inconsistent");
      for (int n : N)
        if (n + 1 > dense::max_modes) throw ConfigError("prior_knowledge: N too large for the dense oracle");
    }
  }
};

namespace detail {

inline void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!node.IsMap()) throw ConfigError(where + " must be a mapping");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

template <class T>
T get(const YAML::Node& node, const char* key, T fallback, const std::string& where) {
  const YAML::Node v = node[key];
  if (!v) return fallback;
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

inline double get_beta(const YAML::Node& v) {
  if (v.IsScalar()) {
    const auto s = v.as<std::string>();
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
  }
  try {
    return v.as<double>();
  } catch (const YAML::Exception&) {
    throw ConfigError("beta: expected a number or inf");
  }
}

template <class T>
std::vector<T> get_list(const YAML::Node& node, const char* key, std::vector<T> fallback) {
  const YAML::Node v = node[key];
  if (!v) return fallback;
  try {
    if (v.IsScalar()) return {v.as<T>()};
    return v.as<std::vector<T>>();
  } catch (const YAML::Exception&) {
    throw ConfigError(std::string(key) + ": expected a scalar or a list");
  }
}

inline RangeSpec get_range(const YAML::Node& node, const char* key, RangeSpec fallback, const std::string& where) {
  const YAML::Node v = node[key];
  if (!v) return fallback;
  check_keys(v, where + "." + key, {"min", "max", "count"});
  RangeSpec r;
  r.min = get(v, "min", 0.0, where);
  r.max = get(v, "max", r.min, where);
  r.count = get(v, "count", 1, where);
  if (r.max < r.min) throw ConfigError(where + "." + key + ": min exceeds max");
  return r;
}

inline nlohmann::json json_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace detail

inline ScenarioConfig parse_config(const YAML::Node& root) {
  using detail::get;
  ScenarioConfig c;
  try {
    detail::check_keys(root, "config",
                       {"id", "kind", "chain", "ensemble", "drive", "beta", "lindblad", "diagnostics",
                        "prior_knowledge", "time", "N", "Nd", "seed", "output", "workers", "memory_time", "gram"});
    c.id = get<std::string>(root, "id", c.id, "config");
    if (!root["kind"]) throw ConfigError("config: missing 'kind'");
    c.kind = parse_kind(root["kind"].as<std::string>());
    if (const auto n = root["chain"]) {
      detail::check_keys(n, "chain", {"mu", "delta", "J"});
      c.chain.mu = get(n, "mu", c.chain.mu, "chain");
      c.chain.delta = get(n, "delta", c.chain.delta, "chain");
      c.chain.J = get(n, "J", c.chain.J, "chain");
    }
    if (const auto n = root["ensemble"]) {
      detail::check_keys(n, "ensemble", {"mu_minus", "mu_plus", "dwell"});
      c.mu_minus = get(n, "mu_minus", c.mu_minus, "ensemble");
      c.mu_plus = get(n, "mu_plus", c.mu_plus, "ensemble");
      c.dwell = get(n, "dwell", c.dwell, "ensemble");
    }
    if (const auto n = root["drive"]) {
      detail::check_keys(n, "drive", {"mu_bar", "delta_bar", "omega", "dmu", "ddelta", "disorder", "phase_offsets"});
      c.square.mu_bar = get(n, "mu_bar", c.square.mu_bar, "drive");
      c.square.delta_bar = get(n, "delta_bar", c.square.delta_bar, "drive");
      c.square.omega = get(n, "omega", c.square.omega, "drive");
      c.square.dmu = detail::get_range(n, "dmu", c.square.dmu, "drive");
      c.square.ddelta = detail::get_range(n, "ddelta", c.square.ddelta, "drive");
      const auto dis = detail::get_range(n, "disorder", RangeSpec{}, "drive");
      c.square.disorder_min = dis.min;
      c.square.disorder_max = dis.max;
      c.square.phase_offsets = get(n, "phase_offsets", c.square.phase_offsets, "drive");
    }
    if (const auto n = root["beta"]) {
      c.betas.clear();
      if (n.IsSequence())
        for (const auto& b : n) c.betas.push_back(detail::get_beta(b));
      else
        c.betas.push_back(detail::get_beta(n));
    }
    if (const auto n = root["lindblad"]) {
      detail::check_keys(n, "lindblad", {"loss_rate"});
      c.loss_rate = get(n, "loss_rate", c.loss_rate, "lindblad");
    }
    if (const auto n = root["diagnostics"]) {
      detail::check_keys(n, "diagnostics", {"t"});
      c.diagnostic_t = get(n, "t", c.diagnostic_t, "diagnostics");
    }
    if (const auto n = root["prior_knowledge"]) {
      detail::check_keys(n, "prior_knowledge", {"instances", "n1", "mu_min", "mu_max", "t_min", "t_max"});
      auto& p = c.prior;
      p.instances = get(n, "instances", p.instances, "prior_knowledge");
      p.n1 = get(n, "n1", p.n1, "prior_knowledge");
      p.mu_min = get(n, "mu_min", p.mu_min, "prior_knowledge");
      p.mu_max = get(n, "mu_max", p.mu_max, "prior_knowledge");
      p.t_min = get(n, "t_min", p.t_min, "prior_knowledge");
      p.t_max = get(n, "t_max", p.t_max, "prior_knowledge");
    }
    if (const auto n = root["time"]) {
      detail::check_keys(n, "time", {"start", "stop", "count", "truncate"});
      c.time.start = get(n, "start", c.time.start, "time");
      c.time.stop = get(n, "stop", c.time.stop, "time");
      c.time.count = get(n, "count", c.time.count, "time");
      if (const auto tr = n["truncate"]) {
        detail::check_keys(tr, "time.truncate", {"threshold", "factor"});
        if (!tr["threshold"]) throw ConfigError("time.truncate needs a threshold");
        c.time.truncate_threshold = get(tr, "threshold", 0.0, "time.truncate");
        c.time.truncate_factor = get(tr, "factor", c.time.truncate_factor, "time.truncate");
      }
    }
    c.N = detail::get_list<int>(root, "N", c.N);
    c.Nd = detail::get_list<int>(root, "Nd", c.Nd);
    c.seed = get<std::uint64_t>(root, "seed", c.seed, "config");
    c.output = get<std::string>(root, "output", c.output.string(), "config");
    c.workers = get(root, "workers", c.workers, "config");
    if (const auto n = root["memory_time"]) {
      detail::check_keys(n, "memory_time", {"thresholds", "degree", "margin", "column"});
      c.thresholds = detail::get_list<double>(n, "thresholds", {});
      c.mt.degree = get(n, "degree", c.mt.degree, "memory_time");
      c.mt.margin = get(n, "margin", c.mt.margin, "memory_time");
      c.mt.column = parse_column(get<std::string>(n, "column", column_name(c.mt.column), "memory_time"));
    }
    if (const auto n = root["gram"]) {
      detail::check_keys(n, "gram", {"max_step", "max_refinement", "zero_floor"});
      c.gram.max_step = get(n, "max_step", c.gram.max_step, "gram");
      c.gram.max_refinement = get(n, "max_refinement", c.gram.max_refinement, "gram");
      c.gram.zero_floor = get(n, "zero_floor", c.gram.zero_floor, "gram");
    }
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ScenarioConfig load_config(const std::filesystem::path& file) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(file.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError("cannot read config " + file.string() + ": " + e.what());
  }
  return parse_config(root);
}

inline ScenarioConfig parse_config_string(const std::string& text) {
  try {
    return parse_config(YAML::Load(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

/// Fully resolved configuration (defaults filled in), as stored in sidecars.
inline nlohmann::json to_json(const ScenarioConfig& c) {
  using detail::json_double;
  nlohmann::json j;
  j["id"] = c.id;
  j["kind"] = kind_name(c.kind);
  j["chain"] = {{"mu", c.chain.mu}, {"delta", c.chain.delta}, {"J", c.chain.J}};
  j["ensemble"] = {{"mu_minus", c.mu_minus}, {"mu_plus", c.mu_plus}, {"dwell", c.dwell}};
  const auto range = [](const RangeSpec& r) { return nlohmann::json{{"min", r.min}, {"max", r.max}, {"count", r.count}}; };
  j["drive"] = {{"mu_bar", c.square.mu_bar},
                {"delta_bar", c.square.delta_bar},
                {"omega", c.square.omega},
                {"dmu", range(c.square.dmu)},
                {"ddelta", range(c.square.ddelta)},
                {"disorder", {{"min", c.square.disorder_min}, {"max", c.square.disorder_max}}},
                {"phase_offsets", c.square.phase_offsets}};
  j["beta"] = nlohmann::json::array();
  for (double b : c.betas) j["beta"].push_back(json_double(b));
  j["lindblad"] = {{"loss_rate", c.loss_rate}};
  j["diagnostics"] = {{"t", c.diagnostic_t}};
  j["prior_knowledge"] = {{"instances", c.prior.instances}, {"n1", c.prior.n1}, {"mu_min", c.prior.mu_min},
                          {"mu_max", c.prior.mu_max},       {"t_min", c.prior.t_min}, {"t_max", c.prior.t_max}};
  j["time"] = {{"start", c.time.start}, {"stop", c.time.stop}, {"count", c.time.count}};
  if (c.time.truncate_threshold)
    j["time"]["truncate"] = {{"threshold", *c.time.truncate_threshold}, {"factor", c.time.truncate_factor}};
  j["N"] = c.N;
  j["Nd"] = c.Nd;
  j["seed"] = c.seed;
  j["output"] = c.output.generic_string();
  j["workers"] = c.workers;
  j["memory_time"] = {{"thresholds", c.thresholds},
                      {"degree", c.mt.degree},
                      {"margin", c.mt.margin},
                      {"column", column_name(c.mt.column)}};
  j["gram"] = {{"max_step", c.gram.max_step}, {"max_refinement", c.gram.max_refinement}, {"zero_floor", c.gram.zero_floor}};
  return j;
}

}  // namespace mml
