#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "etas/catalog.hpp"

namespace etas {

enum class ScaleKind { Ideal, Calibration, ProportionalHazards, LogLinear, Power };

// Z(t): piecewise constant between breakpoints (right-continuous).
// values[k] holds on [breakpoints[k-1], breakpoints[k]).
struct UsageSeries {
  std::vector<double> breakpoints;
  std::vector<double> values;
  // Epoch seconds of t = 0 for the breakpoints, used to align with catalogs
  // that have a different origin.
  double origin_epoch{0.0};

  void validate() const;
  [[nodiscard]] double at(double t) const;
  // Integral of 1/Z(s) over [0, t].
  [[nodiscard]] double inverse_integral(double t) const;
  // Shifts breakpoints onto a catalog whose t = 0 is at origin_epoch.
  [[nodiscard]] UsageSeries aligned_to(double catalog_origin_epoch) const;
};

// Proportional-hazards form: cumulative integral of 1/Z, or literal t / Z(t).
enum class HazardsForm { Cumulative, Pointwise };

struct TimeScale {
  ScaleKind kind{ScaleKind::Ideal};
  double omega{1.0};
  std::optional<UsageSeries> usage;
  HazardsForm form{HazardsForm::Cumulative};

  [[nodiscard]] static TimeScale ideal() { return {}; }
  [[nodiscard]] static TimeScale calibration(double omega) {
    return {ScaleKind::Calibration, omega, std::nullopt, HazardsForm::Cumulative};
  }
  [[nodiscard]] static TimeScale proportional_hazards(UsageSeries usage,
                                                      HazardsForm form = HazardsForm::Cumulative) {
    return {ScaleKind::ProportionalHazards, 1.0, std::move(usage), form};
  }
  [[nodiscard]] static TimeScale log_linear() {
    return {ScaleKind::LogLinear, 1.0, std::nullopt, HazardsForm::Cumulative};
  }
  [[nodiscard]] static TimeScale power(double omega) {
    return {ScaleKind::Power, omega, std::nullopt, HazardsForm::Cumulative};
  }

  void validate() const;
  // "ideal", "calib:W", "ph", "log", "power:W".
  [[nodiscard]] std::string spec() const;
};

// Parses the CLI scale spec. "ph" yields a scale without a usage series; the
// caller attaches one.
[[nodiscard]] TimeScale parse_scale_spec(std::string_view spec);

// Breakpoints at events with mag > major_threshold; each segment holds the
// mean depth of the minor events (mag <= major_threshold) strictly inside it.
// Empty segments carry the previous value forward; a leading empty segment
// takes the global minor mean.
[[nodiscard]] UsageSeries build_usage_series(const Catalog& full_catalog,
                                             double major_threshold = 5.0);

void write_usage_series(std::ostream& out, const UsageSeries& usage);

// phi(t). LogLinear is log(1 + t) so t = 0 maps to 0.
[[nodiscard]] double scale_value(const TimeScale& scale, double t);
// phi^-1; not defined for the pointwise proportional-hazards form.
[[nodiscard]] double inverse_scale_value(const TimeScale& scale, double t_scaled);
// phi'(t); used for the change-of-variables term of the likelihood.
[[nodiscard]] double scale_derivative(const TimeScale& scale, double t);

// Maps event times, t_start and T through phi. Fails with DomainError naming
// the first pair whose order is not strictly preserved.
[[nodiscard]] Catalog apply_scale(const Catalog& catalog, const TimeScale& scale);

}  // namespace etas
