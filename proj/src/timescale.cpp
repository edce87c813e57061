#include "etas/timescale.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "etas/error.hpp"
#include "text.hpp"

namespace etas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::size_t segment_of(const std::vector<double>& breakpoints, double t) {
  return static_cast<std::size_t>(
      std::upper_bound(breakpoints.begin(), breakpoints.end(), t) - breakpoints.begin());
}

}  // namespace

void UsageSeries::validate() const {
  if (values.size() != breakpoints.size() + 1)
    throw DomainError("usage series needs one more value than breakpoints");
  if (!std::is_sorted(breakpoints.begin(), breakpoints.end()) ||
      std::adjacent_find(breakpoints.begin(), breakpoints.end()) != breakpoints.end())
    throw DomainError("usage breakpoints must be strictly ascending");
  for (double v : values)
    if (!(v > 0.0) || !std::isfinite(v)) throw DomainError("usage values must be positive");
}

double UsageSeries::at(double t) const { return values[segment_of(breakpoints, t)]; }

double UsageSeries::inverse_integral(double t) const {
  if (!(t >= 0.0)) throw DomainError("usage integral needs t >= 0");
  double total = 0.0;
  double lo = 0.0;
  for (std::size_t k = segment_of(breakpoints, 0.0); k < values.size(); ++k) {
    const double hi = k < breakpoints.size() ? breakpoints[k] : kInf;
    const double stop = std::min(hi, t);
    if (stop > lo) total += (stop - lo) / values[k];
    if (hi >= t) break;
    lo = hi;
  }
  return total;
}

UsageSeries UsageSeries::aligned_to(double catalog_origin_epoch) const {
  UsageSeries out = *this;
  const double shift = (origin_epoch - catalog_origin_epoch) / 86400.0;
  for (double& b : out.breakpoints) b += shift;
  out.origin_epoch = catalog_origin_epoch;
  return out;
}

void TimeScale::validate() const {
  switch (kind) {
    case ScaleKind::Calibration:
    case ScaleKind::Power:
      if (!(omega > 0.0) || !std::isfinite(omega)) throw DomainError("time scale omega must be > 0");
      break;
    case ScaleKind::ProportionalHazards:
      if (!usage) throw DomainError("proportional-hazards scale needs a usage series");
      usage->validate();
      break;
    default:
      break;
  }
}

std::string TimeScale::spec() const {
  switch (kind) {
    case ScaleKind::Ideal:
      return "ideal";
    case ScaleKind::Calibration:
      return "calib:" + text::fmt17(omega);
    case ScaleKind::ProportionalHazards:
      return form == HazardsForm::Cumulative ? "ph" : "ph:pointwise";
    case ScaleKind::LogLinear:
      return "log";
    case ScaleKind::Power:
      return "power:" + text::fmt17(omega);
  }
  return "ideal";
}

TimeScale parse_scale_spec(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string_view name = spec.substr(0, colon);
  const std::string_view arg = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
  auto omega = [&] {
    auto v = text::parse_double(arg);
    if (!v || !(*v > 0.0)) throw DomainError("time scale '" + std::string(spec) + "' needs a positive omega");
    return *v;
  };
  if (name == "ideal" && arg.empty()) return TimeScale::ideal();
  if (name == "calib") return TimeScale::calibration(omega());
  if (name == "power") return TimeScale::power(omega());
  if (name == "log" && arg.empty()) return TimeScale::log_linear();
  if (name == "ph" && (arg.empty() || arg == "cumulative" || arg == "pointwise")) {
    TimeScale s;
    s.kind = ScaleKind::ProportionalHazards;
    s.form = arg == "pointwise" ? HazardsForm::Pointwise : HazardsForm::Cumulative;
    return s;
  }
  throw DomainError("unknown time scale '" + std::string(spec) +
                    "' (expected ideal|calib:W|ph|log|power:W)");
}

UsageSeries build_usage_series(const Catalog& full_catalog, double major_threshold) {
  UsageSeries usage;
  usage.origin_epoch = full_catalog.origin_epoch;
  double minor_sum = 0.0;
  std::size_t minor_count = 0;
  for (const auto& e : full_catalog.events) {
    if (e.mag > major_threshold) {
      usage.breakpoints.push_back(e.t);
    } else {
      minor_sum += e.depth;
      ++minor_count;
    }
  }
  if (minor_count == 0) throw DomainError("usage measure undefined: catalog has no minor events");
  std::sort(usage.breakpoints.begin(), usage.breakpoints.end());
  usage.breakpoints.erase(std::unique(usage.breakpoints.begin(), usage.breakpoints.end()),
                          usage.breakpoints.end());

  const std::size_t segments = usage.breakpoints.size() + 1;
  std::vector<double> sum(segments, 0.0);
  std::vector<std::size_t> count(segments, 0);
  for (const auto& e : full_catalog.events) {
    if (e.mag > major_threshold) continue;
    // Minor events that coincide with a breakpoint sit on a boundary, not inside.
    if (std::binary_search(usage.breakpoints.begin(), usage.breakpoints.end(), e.t)) continue;
    const auto k = segment_of(usage.breakpoints, e.t);
    sum[k] += e.depth;
    ++count[k];
  }
  usage.values.resize(segments);
  for (std::size_t k = 0; k < segments; ++k) {
    if (count[k] > 0)
      usage.values[k] = sum[k] / static_cast<double>(count[k]);
    else
      usage.values[k] = k == 0 ? minor_sum / static_cast<double>(minor_count) : usage.values[k - 1];
  }
  usage.validate();
  return usage;
}

void write_usage_series(std::ostream& out, const UsageSeries& usage) {
  out << "# etas-usage v1 origin_epoch=" << text::fmt17(usage.origin_epoch) << '\n';
  out << "breakpoint,value\n";
  // The leading segment has no left breakpoint.
  out << "-inf," << text::fmt17(usage.values.front()) << '\n';
  for (std::size_t k = 0; k < usage.breakpoints.size(); ++k)
    out << text::fmt17(usage.breakpoints[k]) << ',' << text::fmt17(usage.values[k + 1]) << '\n';
}

double scale_value(const TimeScale& scale, double t) {
  switch (scale.kind) {
    case ScaleKind::Ideal:
      return t;
    case ScaleKind::Calibration:
      return t / scale.omega;
    case ScaleKind::ProportionalHazards:
      if (!scale.usage) throw DomainError("proportional-hazards scale needs a usage series");
      if (!(t >= 0.0)) throw DomainError("proportional-hazards scale needs t >= 0");
      return scale.form == HazardsForm::Cumulative ? scale.usage->inverse_integral(t)
                                                   : t / scale.usage->at(t);
    case ScaleKind::LogLinear:
      if (!(t >= 0.0)) throw DomainError("log-linear scale needs t >= 0");
      return std::log1p(t);
    case ScaleKind::Power:
      if (!(t >= 0.0)) throw DomainError("power scale needs t >= 0");
      return std::pow(t, scale.omega);
  }
  return t;
}

double inverse_scale_value(const TimeScale& scale, double s) {
  switch (scale.kind) {
    case ScaleKind::Ideal:
      return s;
    case ScaleKind::Calibration:
      return s * scale.omega;
    case ScaleKind::LogLinear:
      return std::expm1(s);
    case ScaleKind::Power:
      if (!(s >= 0.0)) throw DomainError("power scale inverse needs s >= 0");
      return std::pow(s, 1.0 / scale.omega);
    case ScaleKind::ProportionalHazards: {
      if (scale.form == HazardsForm::Pointwise)
        throw DomainError("pointwise proportional-hazards scale has no inverse");
      const auto& u = *scale.usage;
      if (!(s >= 0.0)) throw DomainError("proportional-hazards inverse needs s >= 0");
      double lo = 0.0, acc = 0.0;
      for (std::size_t k = segment_of(u.breakpoints, 0.0); k < u.values.size(); ++k) {
        const double hi = k < u.breakpoints.size() ? u.breakpoints[k] : kInf;
        const double seg = (hi - lo) / u.values[k];
        if (acc + seg >= s) return lo + (s - acc) * u.values[k];
        acc += seg;
        lo = hi;
      }
      return lo;
    }
  }
  return s;
}

double scale_derivative(const TimeScale& scale, double t) {
  switch (scale.kind) {
    case ScaleKind::Ideal:
      return 1.0;
    case ScaleKind::Calibration:
      return 1.0 / scale.omega;
    case ScaleKind::ProportionalHazards:
      return 1.0 / scale.usage->at(t);
    case ScaleKind::LogLinear:
      return 1.0 / (1.0 + t);
    case ScaleKind::Power:
      return scale.omega * std::pow(t, scale.omega - 1.0);
  }
  return 1.0;
}

Catalog apply_scale(const Catalog& catalog, const TimeScale& scale_in) {
  TimeScale scale = scale_in;
  scale.validate();
  if (scale.usage) scale.usage = scale.usage->aligned_to(catalog.origin_epoch);

  Catalog out = catalog;
  out.axis = catalog.axis == "ideal" ? scale.spec() : catalog.axis + "|" + scale.spec();
  const double start = scale_value(scale, catalog.t_start);
  const double end = scale_value(scale, catalog.t_end());
  out.t_start = start;
  out.T = end - start;

  // Events plus the window limits must keep their strict order.
  struct Point {
    double t;
    double s;
    std::string label;
  };
  std::vector<Point> points;
  points.reserve(catalog.events.size() + 2);
  for (std::size_t i = 0; i < catalog.events.size(); ++i) {
    const double t = catalog.events[i].t;
    out.events[i].t = scale_value(scale, t);
    points.push_back({t, out.events[i].t, "event " + std::to_string(i)});
  }
  points.push_back({catalog.t_start, start, "t_start"});
  points.push_back({catalog.t_end(), end, "t_start+T"});
  std::stable_sort(points.begin(), points.end(),
                   [](const Point& a, const Point& b) { return a.t < b.t; });
  for (std::size_t k = 1; k < points.size(); ++k) {
    const auto& a = points[k - 1];
    const auto& b = points[k];
    if ((a.t < b.t && !(a.s < b.s)) || (a.t == b.t && a.s != b.s) || !std::isfinite(b.s))
      throw DomainError("time scale " + scale.spec() + " is not strictly increasing: " + a.label +
                        " (t=" + text::fmt17(a.t) + " -> " + text::fmt17(a.s) + ") and " +
                        b.label + " (t=" + text::fmt17(b.t) + " -> " + text::fmt17(b.s) + ")");
  }
  return out;
}

}  // namespace etas
