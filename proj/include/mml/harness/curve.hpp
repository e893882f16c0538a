#pragma once

// Fidelity curves and their on-disk form: a CSV file with one row per time
// point plus a JSON sidecar (<file>.json) holding the resolved scenario.

#include "mml/core.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace mml {

struct FidelityCurve {
  std::vector<double> times;
  std::optional<std::vector<double>> f_opt;
  std::optional<std::vector<double>> f_gauss;
  std::optional<std::vector<double>> f_upper;
  std::optional<std::vector<double>> f_lower;
  int N = 0;
  int Nd = 0;
  std::uint64_t seed = 0;
  std::string scenario_id;

  std::size_t size() const { return times.size(); }

  void validate() const {
    for (const auto* col : {&f_opt, &f_gauss, &f_upper, &f_lower})
      if (col->has_value() && (*col)->size() != times.size())
        throw NumericalError("FidelityCurve: column length differs from the time grid");
    for (std::size_t i = 1; i < times.size(); ++i)
      if (!(times[i] > times[i - 1])) throw NumericalError("FidelityCurve: times must be strictly ascending");
  }

  bool operator==(const FidelityCurve&) const = default;
};

inline constexpr std::string_view curve_header = "t,f_opt,f_gauss,f_upper,f_lower,N,N_d,seed,scenario_id";

namespace detail {

// Shortest representation that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("curve file line " + std::to_string(line) + ": bad number '" + std::string(s) + "'");
  return v;
}

template <class T>
T parse_integer(std::string_view s, std::size_t line) {
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("curve file line " + std::to_string(line) + ": bad integer '" + std::string(s) + "'");
  return v;
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

inline void write_curve_csv(std::ostream& os, const FidelityCurve& c) {
  c.validate();
  if (c.scenario_id.find_first_of(",\n\r") != std::string::npos)
    throw ConfigError("scenario id must not contain commas or newlines");
  os << curve_header << '\n';
  const auto cell = [&os](const std::optional<std::vector<double>>& col, std::size_t i) {
    if (col) os << detail::format_double((*col)[i]);
    os << ',';
  };
  for (std::size_t i = 0; i < c.size(); ++i) {
    os << detail::format_double(c.times[i]) << ',';
    cell(c.f_opt, i);
    cell(c.f_gauss, i);
    cell(c.f_upper, i);
    cell(c.f_lower, i);
    os << c.N << ',' << c.Nd << ',' << c.seed << ',' << c.scenario_id << '\n';
  }
}

inline FidelityCurve read_curve_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("curve file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != curve_header) throw ConfigError("curve file: unexpected header '" + line + "'");
  FidelityCurve c;
  std::vector<std::optional<double>> cols[4];
  std::size_t lineno = 1;
  bool first = true;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 9) throw ConfigError("curve file line " + std::to_string(lineno) + ": expected 9 fields");
    c.times.push_back(detail::parse_double(f[0], lineno));
    for (int k = 0; k < 4; ++k)
      cols[k].push_back(f[1 + k].empty() ? std::nullopt : std::optional<double>(detail::parse_double(f[1 + k], lineno)));
    const int n = detail::parse_integer<int>(f[5], lineno);
    const int nd = detail::parse_integer<int>(f[6], lineno);
    const auto seed = detail::parse_integer<std::uint64_t>(f[7], lineno);
    const std::string id(f[8]);
    if (first) {
      c.N = n;
      c.Nd = nd;
      c.seed = seed;
      c.scenario_id = id;
      first = false;
    } else if (n != c.N || nd != c.Nd || seed != c.seed || id != c.scenario_id) {
      throw ConfigError("curve file line " + std::to_string(lineno) + ": metadata changes within one file");
    }
  }
  std::optional<std::vector<double>>* dst[4] = {&c.f_opt, &c.f_gauss, &c.f_upper, &c.f_lower};
  for (int k = 0; k < 4; ++k) {
    std::size_t present = 0;
    for (const auto& v : cols[k]) present += v.has_value();
    if (present == 0) continue;
    if (present != cols[k].size())
      throw ConfigError("curve file: column " + std::to_string(k + 1) + " is only partially filled");
    std::vector<double> vals;
    vals.reserve(present);
    for (const auto& v : cols[k]) vals.push_back(*v);
    *dst[k] = std::move(vals);
  }
  c.validate();
  return c;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  return std::filesystem::path(csv.string() + ".json");
}

/// Writes the CSV and its sidecar. The sidecar carries `metadata` verbatim.
inline void save_curve(const std::filesystem::path& csv, const FidelityCurve& c, const nlohmann::json& metadata) {
  if (csv.has_parent_path()) std::filesystem::create_directories(csv.parent_path());
  {
    std::ofstream os(csv, std::ios::binary);
    if (!os) throw Error("cannot open " + csv.string() + " for writing");
    write_curve_csv(os, c);
  }
  std::ofstream js(sidecar_path(csv), std::ios::binary);
  if (!js) throw Error("cannot open " + sidecar_path(csv).string() + " for writing");
  js << metadata.dump(2) << '\n';
}

inline FidelityCurve load_curve(const std::filesystem::path& csv) {
  std::ifstream is(csv, std::ios::binary);
  if (!is) throw ConfigError("cannot open curve file " + csv.string());
  return read_curve_csv(is);
}

/// Sidecar contents, or null when the file is missing.
inline nlohmann::json load_sidecar(const std::filesystem::path& csv) {
  std::ifstream is(sidecar_path(csv));
  if (!is) return nullptr;
  return nlohmann::json::parse(is);
}

}  // namespace mml
