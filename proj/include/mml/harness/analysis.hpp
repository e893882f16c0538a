#pragma once

// Post-processing of fidelity curves: memory times from polynomial fits,
// extrapolation in the ensemble size, and exponential scaling fits.

#include "mml/core.hpp"
#include "mml/harness/curve.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace mml {

enum class Column { f_opt, f_gauss, f_upper, f_lower };

inline const char* column_name(Column c) {
  switch (c) {
    case Column::f_opt: return "f_opt";
    case Column::f_gauss: return "f_gauss";
    case Column::f_upper: return "f_upper";
    case Column::f_lower: return "f_lower";
  }
  return "?";
}

inline Column parse_column(const std::string& s) {
  if (s == "f_opt") return Column::f_opt;
  if (s == "f_gauss") return Column::f_gauss;
  if (s == "f_upper") return Column::f_upper;
  if (s == "f_lower") return Column::f_lower;
  throw ConfigError("unknown curve column: " + s);
}

inline const std::vector<double>& column_values(const FidelityCurve& c, Column col) {
  const std::optional<std::vector<double>>* v = nullptr;
  switch (col) {
    case Column::f_opt: v = &c.f_opt; break;
    case Column::f_gauss: v = &c.f_gauss; break;
    case Column::f_upper: v = &c.f_upper; break;
    case Column::f_lower: v = &c.f_lower; break;
  }
  if (!v->has_value()) throw ConfigError(std::string("curve has no ") + column_name(col) + " column");
  return **v;
}

// ---------------------------------------------------------------------------
// Memory time

struct MemoryTimeOptions {
  int degree = 6;
  double margin = 0.2;  // window end = (1 + margin) * first raw crossing
  Column column = Column::f_opt;
};

struct MemoryTime {
  bool beyond_horizon = false;
  double t0 = 0.0;
  double horizon = 0.0;
  // Fit diagnostics.
  double raw_crossing = 0.0;
  double window_end = 0.0;
  int degree = 0;           // effective degree (lowered when the window has few points)
  double rms_residual = 0.0;
  double degree_spread = 0.0;  // max |t0(d) - t0| over d = degree +- 1
  bool fit_fallback = false;   // fit had no root in the window; t0 = raw crossing
};

namespace detail {

struct PolyFit {
  Vector coef;  // in x = t / scale
  double scale = 1.0;
  double rms = 0.0;
  double operator()(double t) const {
    const double x = t / scale;
    double acc = 0.0;
    for (Eigen::Index k = coef.size(); k-- > 0;) acc = acc * x + coef(k);
    return acc;
  }
};

inline PolyFit polyfit(const std::vector<double>& t, const std::vector<double>& f, std::size_t n, int degree,
                       double scale) {
  Matrix v(static_cast<Eigen::Index>(n), degree + 1);
  Vector y(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double x = t[i] / scale;
    double p = 1.0;
    for (int k = 0; k <= degree; ++k, p *= x) v(static_cast<Eigen::Index>(i), k) = p;
    y(static_cast<Eigen::Index>(i)) = f[i];
  }
  PolyFit fit;
  fit.scale = scale;
  fit.coef = v.colPivHouseholderQr().solve(y);
  fit.rms = std::sqrt((v * fit.coef - y).squaredNorm() / static_cast<double>(n));
  return fit;
}

// First t in [0, end] with fit(t) <= f0, refined by bisection; NaN if none.
inline double first_root(const PolyFit& fit, double f0, double end) {
  const int scan = 4000;
  double prev = 0.0;
  if (fit(0.0) <= f0) return 0.0;
  for (int i = 1; i <= scan; ++i) {
    const double t = end * i / scan;
    if (fit(t) <= f0) {
      double lo = prev, hi = t;
      for (int it = 0; it < 100 && hi - lo > 1e-14 * std::max(1.0, end); ++it) {
        const double mid = 0.5 * (lo + hi);
        (fit(mid) > f0 ? lo : hi) = mid;
      }
      return 0.5 * (lo + hi);
    }
    prev = t;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace detail

/// First time the fidelity falls below f0, read off a least-squares polynomial
/// fit over [0, (1 + margin) * first raw crossing] so that fast small
/// oscillations do not decide the crossing.
inline MemoryTime memory_time(const FidelityCurve& curve, double f0, const MemoryTimeOptions& opt = {}) {
  if (!(f0 > 2.0 / 3.0 && f0 < 1.0)) throw ConfigError("memory_time: threshold must lie in (2/3, 1)");
  if (opt.degree < 1) throw ConfigError("memory_time: degree must be at least 1");
  if (opt.margin < 0.0) throw ConfigError("memory_time: margin must be non-negative");
  curve.validate();
  const auto& f = column_values(curve, opt.column);
  const auto& t = curve.times;
  if (t.empty()) throw ConfigError("memory_time: empty curve");
  MemoryTime out;
  out.horizon = t.back();

  std::size_t cross = t.size();
  for (std::size_t i = 0; i < t.size(); ++i)
    if (f[i] < f0) {
      cross = i;
      break;
    }
  if (cross == t.size()) {
    out.beyond_horizon = true;
    out.t0 = out.horizon;
    return out;
  }
  out.raw_crossing = cross == 0 ? t[0] : t[cross - 1] + (t[cross] - t[cross - 1]) * (f[cross - 1] - f0) / (f[cross - 1] - f[cross]);
  out.window_end = (1.0 + opt.margin) * out.raw_crossing;
  std::size_t n = 0;
  while (n < t.size() && t[n] <= out.window_end * (1.0 + 1e-12)) ++n;
  n = std::max(n, cross + 1);
  const double scale = std::max(t[n - 1], std::numeric_limits<double>::min());

  auto solve = [&](int degree, detail::PolyFit* keep) {
    const int d = std::min<int>(degree, static_cast<int>(n) - 1);
    if (d < 1) return std::make_pair(out.raw_crossing, d);
    const auto fit = detail::polyfit(t, f, n, d, scale);
    if (keep) *keep = fit;
    return std::make_pair(detail::first_root(fit, f0, t[n - 1]), d);
  };
  detail::PolyFit fit;
  const auto [root, d] = solve(opt.degree, &fit);
  out.degree = std::max(d, 0);
  out.rms_residual = fit.coef.size() ? fit.rms : 0.0;
  if (std::isnan(root)) {
    out.t0 = out.raw_crossing;
    out.fit_fallback = true;
  } else {
    out.t0 = root;
  }
  for (int dd : {opt.degree - 1, opt.degree + 1}) {
    if (dd < 1) continue;
    const double r = solve(dd, nullptr).first;
    if (!std::isnan(r)) out.degree_spread = std::max(out.degree_spread, std::abs(r - out.t0));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Extrapolation in N_d

struct NdSample {
  int Nd = 0;
  double value = 0.0;
};

enum class ExtrapolationMode { inverse_nd_linear, empirical_convergence };

inline const char* mode_name(ExtrapolationMode m) {
  return m == ExtrapolationMode::inverse_nd_linear ? "1/Nd-linear" : "empirical-convergence";
}

struct Extrapolation {
  double limit = 0.0;
  ExtrapolationMode mode = ExtrapolationMode::inverse_nd_linear;
  double spread = 0.0;  // |f(largest N_d) - f(second largest)|
  double slope = 0.0;   // coefficient of 1/N_d (linear mode only)
};

/// Gaussian fidelities use an intercept of a linear fit in 1/N_d; optimal
/// fidelities return the largest-N_d value and how far it moved from the
/// previous one.
inline Extrapolation extrapolate_nd(std::vector<NdSample> values, Column column) {
  std::sort(values.begin(), values.end(), [](const NdSample& a, const NdSample& b) { return a.Nd < b.Nd; });
  std::size_t distinct = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].Nd < 1) throw ConfigError("extrapolate_nd: N_d must be positive");
    if (i == 0 || values[i].Nd != values[i - 1].Nd) ++distinct;
  }
  if (distinct < 3) throw ConfigError("extrapolate_nd: need at least 3 distinct N_d values");
  Extrapolation out;
  out.spread = std::abs(values.back().value - values[values.size() - 2].value);
  if (column == Column::f_opt) {
    out.mode = ExtrapolationMode::empirical_convergence;
    out.limit = values.back().value;
    return out;
  }
  Matrix a(static_cast<Eigen::Index>(values.size()), 2);
  Vector y(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    a(static_cast<Eigen::Index>(i), 0) = 1.0;
    a(static_cast<Eigen::Index>(i), 1) = 1.0 / values[i].Nd;
    y(static_cast<Eigen::Index>(i)) = values[i].value;
  }
  const Vector c = a.colPivHouseholderQr().solve(y);
  out.mode = ExtrapolationMode::inverse_nd_linear;
  out.limit = c(0);
  out.slope = c(1);
  return out;
}

// ---------------------------------------------------------------------------
// Memory-time tables and scaling fits

struct MemoryTimeRow {
  int N = 0;
  int Nd = 0;
  double f0 = 0.0;
  MemoryTime mt;
};

struct MemoryTimeTable {
  std::vector<MemoryTimeRow> rows;
};

inline constexpr std::string_view memory_table_header =
    "N,N_d,F0,t0,beyond_horizon,horizon,raw_crossing,window_end,degree,rms_residual,degree_spread,fit_fallback";

inline void write_memory_table(std::ostream& os, const MemoryTimeTable& tab) {
  using detail::format_double;
  os << memory_table_header << '\n';
  for (const auto& r : tab.rows) {
    if (r.mt.t0 < 0.0) throw NumericalError("memory-time table: negative t0");
    os << r.N << ',' << r.Nd << ',' << format_double(r.f0) << ',' << format_double(r.mt.t0) << ','
       << (r.mt.beyond_horizon ? 1 : 0) << ',' << format_double(r.mt.horizon) << ','
       << format_double(r.mt.raw_crossing) << ',' << format_double(r.mt.window_end) << ',' << r.mt.degree << ','
       << format_double(r.mt.rms_residual) << ',' << format_double(r.mt.degree_spread) << ','
       << (r.mt.fit_fallback ? 1 : 0) << '\n';
  }
}

inline MemoryTimeTable read_memory_table(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("memory-time table is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != memory_table_header) throw ConfigError("memory-time table: unexpected header");
  MemoryTimeTable tab;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 12) throw ConfigError("memory-time table line " + std::to_string(lineno) + ": expected 12 fields");
    MemoryTimeRow r;
    r.N = detail::parse_integer<int>(f[0], lineno);
    r.Nd = detail::parse_integer<int>(f[1], lineno);
    r.f0 = detail::parse_double(f[2], lineno);
    r.mt.t0 = detail::parse_double(f[3], lineno);
    r.mt.beyond_horizon = detail::parse_integer<int>(f[4], lineno) != 0;
    r.mt.horizon = detail::parse_double(f[5], lineno);
    r.mt.raw_crossing = detail::parse_double(f[6], lineno);
    r.mt.window_end = detail::parse_double(f[7], lineno);
    r.mt.degree = detail::parse_integer<int>(f[8], lineno);
    r.mt.rms_residual = detail::parse_double(f[9], lineno);
    r.mt.degree_spread = detail::parse_double(f[10], lineno);
    r.mt.fit_fallback = detail::parse_integer<int>(f[11], lineno) != 0;
    if (r.mt.t0 < 0.0) throw ConfigError("memory-time table line " + std::to_string(lineno) + ": negative t0");
    tab.rows.push_back(r);
  }
  return tab;
}

struct ScalingFit {
  double rate = 0.0;       // c in t0 = A exp(c N)
  double prefactor = 0.0;  // A
  double r_squared = 0.0;
  std::size_t used = 0;
  std::vector<std::string> warnings;
};

/// Least-squares fit of log t0 = log A + c N over rows with a finite,
/// positive t0 inside the horizon.
inline ScalingFit scaling_fit(const MemoryTimeTable& tab) {
  ScalingFit out;
  std::vector<double> xs, ys;
  for (const auto& r : tab.rows) {
    if (r.mt.beyond_horizon || !std::isfinite(r.mt.t0) || !(r.mt.t0 > 0.0)) {
      out.warnings.push_back("excluded N=" + std::to_string(r.N) + " (t0 not finite or beyond horizon)");
      continue;
    }
    xs.push_back(r.N);
    ys.push_back(std::log(r.mt.t0));
  }
  std::map<double, int> distinct;
  for (double x : xs) distinct[x] += 1;
  if (distinct.size() < 4) throw ConfigError("scaling_fit: need at least 4 N values with finite t0");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i] / n;
    my += ys[i] / n;
  }
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  out.rate = sxy / sxx;
  out.prefactor = std::exp(my - out.rate * mx);
  double ssr = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (my + out.rate * (xs[i] - mx));
    ssr += e * e;
  }
  const double scale = std::max(1.0, std::abs(my));
  out.r_squared = syy <= 1e-24 * scale * scale * n ? (ssr <= 1e-24 * scale * scale * n ? 1.0 : 0.0) : 1.0 - ssr / syy;
  out.used = xs.size();
  return out;
}

}  // namespace mml
