#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "etas/catalog.hpp"
#include "etas/intensity.hpp"
#include "etas/model.hpp"

namespace etas {

struct SimConfig {
  EtasParams params{};
  MagnitudeModel magnitude{ExponentialMagnitude{}};
  Region region{0.0, 5.0, 0.0, 5.0};
  double T{365.0};        // length of the target window
  double burn_in{0.0};    // history simulated before the target window
  double m0{5.0};
  // Unset means uniform over the region with mu in events per day.
  std::optional<BackgroundField> background;
  std::uint64_t seed{1};
  std::size_t max_events{1'000'000};

  // Throws DomainError (SupercriticalError for exponential magnitudes) unless
  // the configuration is valid and subcritical.
  void validate() const;
};

struct SimCatalog {
  Catalog catalog;
  // Index of the parent inside catalog.events; -1 for background events and
  // -2 when the parent fell outside the region.
  std::vector<long> parent;
  std::vector<int> generation;
  std::size_t out_of_region{0};
  bool overflow{false};
};

[[nodiscard]] SimCatalog simulate(const SimConfig& config);

// Ogata thinning of the ground process mu + sum kappa g (no space). Used as an
// independent cross-check of the branching construction.
[[nodiscard]] Catalog simulate_ground_thinning(const SimConfig& config);

// Lag with cdf G(lag) / G(horizon) on [0, horizon]; horizon may be +inf.
[[nodiscard]] double inverse_temporal_cdf(const EtasParams& p, double v, double horizon);
// Radius whose disk holds mass v of the spatial kernel of an event of magnitude m.
[[nodiscard]] double inverse_radial_cdf(const EtasParams& p, double m, double m0, double v);

void write_genealogy_csv(std::ostream& out, const SimCatalog& sim);

// SplitMix64 finaliser; seeds per-cluster streams as mix(seed, cluster).
[[nodiscard]] std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace etas
