#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "etas/catalog.hpp"

namespace etas {

// Index of each triggering parameter inside EtasParams::values().
enum class Param : std::size_t { mu = 0, A, alpha, c, p, D, gamma, q };
inline constexpr std::size_t kParamCount = 8;
inline constexpr std::array<std::string_view, kParamCount> kParamNames{"mu", "A",  "alpha", "c",
                                                                       "p",  "D", "gamma", "q"};

// theta = (mu, A, alpha, c, p, D, gamma, q).
//
// mu scales the background: rate mu * u(x, y). With a unit-mass background u
// (uniform or ground variant) mu is events per day; with a smoothed field it
// is the dimensionless relaxing coefficient. A = 0 and alpha = 0 are accepted
// as degenerate (no triggering / magnitude-independent productivity).
struct EtasParams {
  double mu{1.0};
  double A{0.1};
  double alpha{1.0};
  double c{0.01};
  double p{1.2};
  double D{0.01};
  double gamma{1.0};
  double q{1.8};

  [[nodiscard]] std::array<double, kParamCount> values() const {
    return {mu, A, alpha, c, p, D, gamma, q};
  }
  [[nodiscard]] static EtasParams from_values(const std::array<double, kParamCount>& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7]};
  }
  [[nodiscard]] double get(Param k) const { return values()[static_cast<std::size_t>(k)]; }
  void set(Param k, double v);

  // Throws DomainError naming the first violated constraint.
  void validate() const;

  friend bool operator==(const EtasParams&, const EtasParams&) = default;
};

[[nodiscard]] Param param_from_name(std::string_view name);

void to_json(nlohmann::json& j, const EtasParams& p);
void from_json(const nlohmann::json& j, EtasParams& p);

// --- magnitude law --------------------------------------------------------

struct ExponentialMagnitude {
  double beta{2.0};
};

// gamma(shape, rate) on the excess m - m0.
struct GammaMagnitude {
  double shape{1.0};
  double rate{2.0};
};

using MagnitudeModel = std::variant<ExponentialMagnitude, GammaMagnitude>;

void validate(const MagnitudeModel& model);
[[nodiscard]] std::size_t parameter_count(const MagnitudeModel& model);

[[nodiscard]] double magnitude_pdf(const MagnitudeModel& model, double m, double m0);
[[nodiscard]] double magnitude_log_pdf(const MagnitudeModel& model, double m, double m0);

// beta = N' / sum over targets of (m_i - m0).
[[nodiscard]] double magnitude_mle_exponential(const Catalog& catalog);
// Maximum-likelihood gamma on target excesses; every excess must be > 0.
[[nodiscard]] GammaMagnitude magnitude_mle_gamma(const Catalog& catalog);

void to_json(nlohmann::json& j, const MagnitudeModel& m);
void from_json(const nlohmann::json& j, MagnitudeModel& m);

// --- triggering kernels ---------------------------------------------------

// Spatial scale of an event of magnitude m: D exp(gamma (m - m0)).
[[nodiscard]] inline double sigma(const EtasParams& p, double m, double m0) {
  return p.D * std::exp(p.gamma * (m - m0));
}

// Expected number of direct aftershocks: A exp(alpha (m - m0)).
[[nodiscard]] double kappa(const EtasParams& p, double m, double m0);

// Omori density ((p-1)/c) (1 + lag/c)^(-p) and its cdf 1 - (1 + lag/c)^(1-p).
[[nodiscard]] double temporal_kernel(const EtasParams& p, double lag);
[[nodiscard]] double temporal_kernel_cdf(const EtasParams& p, double lag);

// Radially symmetric density ((q-1)/(pi s)) (1 + r^2/s)^(-q), s = sigma(m).
[[nodiscard]] double spatial_kernel(const EtasParams& p, double dx, double dy, double m, double m0);
// Mass within a disk of radius r: 1 - (1 + r^2/s)^(1-q).
[[nodiscard]] double spatial_kernel_disk_mass(const EtasParams& p, double r, double m, double m0);

// A beta / (beta - alpha). Throws SupercriticalError when beta <= alpha.
[[nodiscard]] double branching_ratio(const EtasParams& p, double beta);
// E[kappa(m)] under the given magnitude law; +inf when it diverges.
[[nodiscard]] double branching_ratio(const EtasParams& p, const MagnitudeModel& model);
[[nodiscard]] inline bool is_subcritical(double ratio) { return ratio < 1.0; }

}  // namespace etas
