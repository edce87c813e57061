#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "etas/catalog.hpp"
#include "etas/intensity.hpp"
#include "etas/likelihood.hpp"
#include "etas/model.hpp"

namespace etas {

struct ResidualBin {
  double t_lo{0.0};
  double t_hi{0.0};
  std::size_t observed{0};
  double expected{0.0};
  [[nodiscard]] double residual() const { return static_cast<double>(observed) - expected; }
};

struct KsResult {
  double stat{0.0};
  std::optional<double> p;  // unset below 10 observations
};

struct Diagnostics {
  std::vector<double> tau;
  std::vector<double> u_seq;
  KsResult ks{};
  double tau_slope{0.0};  // least-squares slope of tau_i against i
  std::vector<ResidualBin> temporal;
  IntensityGrid spatial{};
};

// Compensator over [t_start, t_i] at every target event.
[[nodiscard]] std::vector<double> transformed_times(const EtasLikelihood& lik, const EtasParams& params);

// U_i = 1 - exp(-(tau_i - tau_{i-1})), tau_0 = 0. Decreasing tau is an error.
[[nodiscard]] std::vector<double> uniform_residuals(std::span<const double> tau);

// Upper tail of the Kolmogorov distribution, P(K > x).
[[nodiscard]] double kolmogorov_survival(double x);

// Two-sided one-sample KS test against U(0, 1) using the asymptotic
// distribution of sqrt(n) D.
[[nodiscard]] KsResult ks_uniform_test(std::span<const double> u);

[[nodiscard]] std::vector<ResidualBin> temporal_residuals(const EtasLikelihood& lik, const EtasParams& params,
                                                          std::size_t bins);

// Kernel-smoothed target events minus the model intensity integrated over
// the target window, in events per square degree.
[[nodiscard]] IntensityGrid spatial_residuals(const EtasLikelihood& lik, const EtasParams& params,
                                              const BackgroundField& bg, const Grid& grid,
                                              const BandwidthConfig& bandwidth = {});

[[nodiscard]] Diagnostics diagnose(const Catalog& catalog, const EtasParams& params, const BackgroundField& bg,
                                   Variant variant, SpatialBoundary boundary, const Grid& grid,
                                   std::size_t bins = 50, const BandwidthConfig& bandwidth = {});

// diagnostics.json plus tau.csv, u.csv, temporal_residuals.csv, spatial_residuals.csv.
void write_diagnostics(const std::filesystem::path& dir, const Diagnostics& d);
void to_json(nlohmann::json& j, const Diagnostics& d);

}  // namespace etas
