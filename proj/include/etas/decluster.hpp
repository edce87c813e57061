#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "etas/catalog.hpp"
#include "etas/intensity.hpp"
#include "etas/likelihood.hpp"
#include "etas/model.hpp"
#include "etas/optimize.hpp"

namespace etas {

struct TriggerEntry {
  std::size_t i{0};
  double p{0.0};
};

// Row j holds the predecessors i with p_ij above the truncation threshold.
struct TriggerProbs {
  std::vector<std::vector<TriggerEntry>> rows;
  std::vector<double> p;          // sum of the stored row entries
  std::vector<double> bg;         // mu u_j / lambda_j
  std::vector<double> truncated;  // row mass below the threshold, not stored

  [[nodiscard]] std::size_t size() const noexcept { return bg.size(); }
  [[nodiscard]] double max_truncated() const;
};

// Probabilities for every event, history included. Entries below `truncate`
// are dropped from the rows; their mass is reported in `truncated`.
[[nodiscard]] TriggerProbs trigger_probs(const Catalog& catalog, const EtasParams& params,
                                         const BackgroundField* bg, Variant variant = Variant::SpatioTemporal,
                                         double truncate = 1e-12);

void write_probs_csv(std::ostream& out, const TriggerProbs& probs);

enum class Label { Background, Triggered, Uncertain };
[[nodiscard]] std::string_view label_name(Label label);

[[nodiscard]] std::vector<Label> classify(const TriggerProbs& probs, double threshold = 0.95);

// One random declustering: parent index per event, -1 for background.
[[nodiscard]] std::vector<long> realize(const TriggerProbs& probs, std::uint64_t seed);

struct StdErrors {
  bool ok{false};
  std::string reason;
  std::vector<double> se;  // natural-scale standard errors, one per coordinate
};

// Standard errors from the finite-difference Hessian of a negative
// log-likelihood at its minimum x_min (in transformed coordinates).
// jacobian[k] = d(natural_k)/d(x_k).
[[nodiscard]] StdErrors stderr_from_hessian(const Objective& objective, const Vector& x_min,
                                            const Vector& jacobian, double step = 1e-4);
// Same, differencing an analytic gradient instead of the objective.
[[nodiscard]] StdErrors stderr_from_gradient(const ValueAndGradient& fg, const Vector& x_min,
                                             const Vector& jacobian, double step = 1e-5);

enum class MagnitudeKind { Exponential, Gamma };
enum class OptimizerKind { Dfp, NelderMead };

struct IsdmOptions {
  Variant variant{Variant::SpatioTemporal};
  SpatialBoundary boundary{SpatialBoundary::Infinite};
  MagnitudeKind magnitude{MagnitudeKind::Exponential};
  OptimizerKind optimizer{OptimizerKind::Dfp};
  std::array<bool, kParamCount> fixed{};
  BandwidthConfig bandwidth{};
  OptimOptions optim{};
  int max_outer{50};
  double bg_tol{1e-3};
  double ll_tol{1e-4};
  bool compute_stderr{true};
};

struct FitResult {
  EtasParams params{};
  MagnitudeModel magnitude{ExponentialMagnitude{}};
  LogLik loglik{};
  double aic{0.0};
  int k{0};
  double branching_ratio{0.0};
  TriggerProbs probs{};
  BackgroundField bg{};
  int iterations{0};
  bool converged{false};
  std::array<bool, kParamCount> fixed{};
  std::optional<std::array<double, kParamCount>> stderr_params;  // 0 for fixed parameters
  std::optional<double> stderr_beta;
  std::string stderr_reason;
  std::vector<double> loglik_trace;  // total log-likelihood after each outer iteration
  std::vector<std::string> warnings;
  OptimResult last_optim{};
  Variant variant{Variant::SpatioTemporal};
  SpatialBoundary boundary{SpatialBoundary::Infinite};
  std::string axis{"ideal"};
  nlohmann::json settings = nlohmann::json::object();

  // Background events per day inside the region: mu times the integral of u.
  [[nodiscard]] double background_rate() const { return params.mu * bg.region_mass(); }
};

// mu = N'/T and the default triggering parameters.
[[nodiscard]] EtasParams default_initial_params(const Catalog& catalog);

// Alternates declustering, background smoothing and likelihood maximisation.
// The ground variant skips the smoothing and fits mu, A, alpha, c, p once.
[[nodiscard]] FitResult isdm_fit(const Catalog& catalog, const EtasParams& init, const IsdmOptions& options = {});

void to_json(nlohmann::json& j, const FitResult& fit);
// Restores params, magnitude, background, variant, boundary and axis; probs
// and traces are not stored in the JSON and must be recomputed.
[[nodiscard]] FitResult fit_from_json(const nlohmann::json& j);

}  // namespace etas
