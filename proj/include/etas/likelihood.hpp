#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

#include "etas/catalog.hpp"
#include "etas/intensity.hpp"
#include "etas/model.hpp"

namespace etas {

// SpatioTemporal evaluates lambda(t, x, y) with a background field;
// GroundTemporal integrates space out and uses mu + sum kappa g.
enum class Variant { SpatioTemporal, GroundTemporal };

// How much of each triggered cluster's spatial mass counts toward the
// compensator: all of it, or the part inside the study rectangle.
enum class SpatialBoundary { Infinite, Exact };

struct LogLik {
  double l1{0.0};  // magnitude part
  double l2{0.0};  // ground / spatio-temporal part
  double total{0.0};
  std::size_t n_target{0};
};

void to_json(nlohmann::json& j, const LogLik& ll);

using ParamGradient = std::array<double, kParamCount>;

// Mass of the spatial kernel centred at (x, y) inside the region, and its
// derivatives with respect to sigma and q. (x, y) must lie in the region.
struct RegionMass {
  double mass{1.0};
  double d_sigma{0.0};
  double d_q{0.0};
};
[[nodiscard]] RegionMass spatial_region_mass(double x, double y, double sigma, double q,
                                             const Region& region);

// Negative log-likelihood of theta for a fixed catalog and background. The
// magnitude part is separate (see magnitude_loglik). Background values at the
// events are cached on construction, so the field may not change afterwards.
class EtasLikelihood {
 public:
  EtasLikelihood(const Catalog& catalog, Variant variant, const BackgroundField* bg = nullptr,
                 SpatialBoundary boundary = SpatialBoundary::Infinite);

  // -l2; +inf when the intensity vanishes at a target event.
  [[nodiscard]] double negative(const EtasParams& p) const;
  // -l2 and its gradient with respect to the natural parameters.
  [[nodiscard]] double negative(const EtasParams& p, ParamGradient& grad) const;

  // l2; throws NumericalError naming the event when the intensity vanishes.
  [[nodiscard]] double l2(const EtasParams& p) const;

  // Expected number of target-window events.
  [[nodiscard]] double compensator(const EtasParams& p) const;
  // Compensator of the ground process over [t_start, t].
  [[nodiscard]] double compensator_until(const EtasParams& p, double t) const;
  // compensator_until at each of the given times.
  [[nodiscard]] std::vector<double> compensator_at(const EtasParams& p, std::span<const double> times) const;
  // Per-event spatial mass used by the compensator (1 in Infinite mode).
  [[nodiscard]] std::vector<double> spatial_masses(const EtasParams& p) const;

  // Background density at every event (1 for the ground variant).
  [[nodiscard]] const std::vector<double>& background_at_events() const noexcept { return u_; }
  // Integral of the background density over the region (1 for ground).
  [[nodiscard]] double background_mass() const noexcept { return background_mass_; }

  [[nodiscard]] const Catalog& catalog() const noexcept { return *catalog_; }
  [[nodiscard]] Variant variant() const noexcept { return variant_; }
  [[nodiscard]] SpatialBoundary boundary() const noexcept { return boundary_; }

 private:
  double evaluate(const EtasParams& p, ParamGradient* grad, bool throw_on_zero) const;

  const Catalog* catalog_;
  Variant variant_;
  SpatialBoundary boundary_;
  std::vector<double> u_;
  double background_mass_{1.0};
};

// Sum over targets of log v(m_i).
[[nodiscard]] double magnitude_loglik(const Catalog& catalog, const MagnitudeModel& model);

[[nodiscard]] LogLik loglik(const Catalog& catalog, const EtasParams& params,
                            const MagnitudeModel& magnitude, const BackgroundField* bg,
                            Variant variant, SpatialBoundary boundary = SpatialBoundary::Infinite);

[[nodiscard]] double compensator(const Catalog& catalog, const EtasParams& params,
                                 const BackgroundField* bg, Variant variant,
                                 SpatialBoundary boundary = SpatialBoundary::Infinite);

// 2k - 2 l.
[[nodiscard]] double aic(const LogLik& ll, int k);
[[nodiscard]] double aic(double loglik_total, int k);

}  // namespace etas
