#include "etas/model.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <string>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "etas/error.hpp"

namespace etas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_magnitude(double m, double m0) {
  if (!(m >= m0)) throw DomainError("magnitude below threshold m0");
}

}  // namespace

void EtasParams::set(Param k, double v) {
  auto vals = values();
  vals[static_cast<std::size_t>(k)] = v;
  *this = from_values(vals);
}

void EtasParams::validate() const {
  auto fail = [](const char* what) { throw DomainError(std::string("invalid ETAS parameters: ") + what); };
  for (double v : values())
    if (!std::isfinite(v)) fail("non-finite value");
  if (!(mu > 0.0)) fail("mu must be > 0");
  if (!(A >= 0.0)) fail("A must be >= 0");
  if (!(alpha >= 0.0)) fail("alpha must be >= 0");
  if (!(c > 0.0)) fail("c must be > 0");
  if (!(p > 1.0)) fail("p must be > 1");
  if (!(D > 0.0)) fail("D must be > 0");
  if (!(gamma >= 0.0)) fail("gamma must be >= 0");
  if (!(q > 1.0)) fail("q must be > 1");
}

Param param_from_name(std::string_view name) {
  for (std::size_t k = 0; k < kParamCount; ++k)
    if (kParamNames[k] == name) return static_cast<Param>(k);
  throw DomainError("unknown parameter name '" + std::string(name) + "'");
}

void to_json(nlohmann::json& j, const EtasParams& p) {
  j = nlohmann::json::object();
  const auto v = p.values();
  for (std::size_t k = 0; k < kParamCount; ++k) j[std::string(kParamNames[k])] = v[k];
}

void from_json(const nlohmann::json& j, EtasParams& p) {
  if (!j.is_object()) throw FormatError("ETAS parameters must be a JSON object");
  auto v = p.values();
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto k = static_cast<std::size_t>(param_from_name(it.key()));
    if (!it.value().is_number()) throw FormatError("parameter '" + it.key() + "' must be a number");
    v[k] = it.value().get<double>();
  }
  p = EtasParams::from_values(v);
}

void validate(const MagnitudeModel& model) {
  std::visit(
      [](const auto& m) {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, ExponentialMagnitude>) {
          if (!(m.beta > 0.0) || !std::isfinite(m.beta)) throw DomainError("beta must be > 0");
        } else {
          if (!(m.shape > 0.0) || !(m.rate > 0.0) || !std::isfinite(m.shape) ||
              !std::isfinite(m.rate))
            throw DomainError("gamma magnitude parameters must be > 0");
        }
      },
      model);
}

std::size_t parameter_count(const MagnitudeModel& model) {
  return std::holds_alternative<ExponentialMagnitude>(model) ? 1 : 2;
}

double magnitude_log_pdf(const MagnitudeModel& model, double m, double m0) {
  require_magnitude(m, m0);
  const double x = m - m0;
  if (const auto* e = std::get_if<ExponentialMagnitude>(&model)) return std::log(e->beta) - e->beta * x;
  const auto& g = std::get<GammaMagnitude>(model);
  if (x == 0.0) {
    if (g.shape < 1.0) return kInf;
    if (g.shape == 1.0) return std::log(g.rate);
    return -kInf;
  }
  return g.shape * std::log(g.rate) + (g.shape - 1.0) * std::log(x) - g.rate * x -
         std::lgamma(g.shape);
}

double magnitude_pdf(const MagnitudeModel& model, double m, double m0) {
  return std::exp(magnitude_log_pdf(model, m, m0));
}

double magnitude_mle_exponential(const Catalog& catalog) {
  double n = 0.0, excess = 0.0;
  for (const auto& e : catalog.events) {
    if (!e.is_target) continue;
    require_magnitude(e.mag, catalog.m0);
    n += 1.0;
    excess += e.mag - catalog.m0;
  }
  if (n == 0.0) throw DomainError("beta MLE needs at least one target event");
  if (!(excess > 0.0)) throw DomainError("beta MLE undefined: all target magnitudes equal m0");
  return n / excess;
}

GammaMagnitude magnitude_mle_gamma(const Catalog& catalog) {
  double n = 0.0, sum = 0.0, sum_log = 0.0;
  for (const auto& e : catalog.events) {
    if (!e.is_target) continue;
    const double x = e.mag - catalog.m0;
    if (!(x > 0.0))
      throw DomainError("gamma magnitude MLE needs every target magnitude strictly above m0");
    n += 1.0;
    sum += x;
    sum_log += std::log(x);
  }
  if (n < 2.0) throw DomainError("gamma magnitude MLE needs at least two target events");
  const double mean = sum / n;
  const double s = std::log(mean) - sum_log / n;
  if (!(s > 1e-12)) throw DomainError("gamma magnitude MLE undefined: excesses are all equal");
  // log k - digamma(k) = s, solved by Newton from the Minka starting point.
  double k = (3.0 - s + std::sqrt((s - 3.0) * (s - 3.0) + 24.0 * s)) / (12.0 * s);
  for (int it = 0; it < 100; ++it) {
    const double f = std::log(k) - boost::math::digamma(k) - s;
    const double df = 1.0 / k - boost::math::trigamma(k);
    const double next = std::max(k - f / df, k / 10.0);
    const bool done = std::abs(next - k) <= 1e-14 * k;
    k = next;
    if (done) break;
  }
  return {k, k / mean};
}

void to_json(nlohmann::json& j, const MagnitudeModel& m) {
  if (const auto* e = std::get_if<ExponentialMagnitude>(&m)) {
    j = {{"kind", "exponential"}, {"beta", e->beta}};
  } else {
    const auto& g = std::get<GammaMagnitude>(m);
    j = {{"kind", "gamma"}, {"shape", g.shape}, {"rate", g.rate}};
  }
}

void from_json(const nlohmann::json& j, MagnitudeModel& m) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "exponential") {
    m = ExponentialMagnitude{j.at("beta").get<double>()};
  } else if (kind == "gamma") {
    m = GammaMagnitude{j.at("shape").get<double>(), j.at("rate").get<double>()};
  } else {
    throw FormatError("unknown magnitude model kind '" + kind + "'");
  }
}

double kappa(const EtasParams& p, double m, double m0) {
  require_magnitude(m, m0);
  return p.A * std::exp(p.alpha * (m - m0));
}

double temporal_kernel(const EtasParams& p, double lag) {
  if (!(lag >= 0.0)) throw DomainError("temporal kernel: negative lag");
  return (p.p - 1.0) / p.c * std::pow(1.0 + lag / p.c, -p.p);
}

double temporal_kernel_cdf(const EtasParams& p, double lag) {
  if (!(lag >= 0.0)) throw DomainError("temporal kernel cdf: negative lag");
  if (std::isinf(lag)) return 1.0;
  return -std::expm1((1.0 - p.p) * std::log1p(lag / p.c));
}

double spatial_kernel(const EtasParams& p, double dx, double dy, double m, double m0) {
  const double s = sigma(p, m, m0);
  return (p.q - 1.0) / (std::numbers::pi * s) * std::pow(1.0 + (dx * dx + dy * dy) / s, -p.q);
}

double spatial_kernel_disk_mass(const EtasParams& p, double r, double m, double m0) {
  if (std::isinf(r)) return 1.0;
  const double s = sigma(p, m, m0);
  return -std::expm1((1.0 - p.q) * std::log1p(r * r / s));
}

double branching_ratio(const EtasParams& p, double beta) {
  if (!(beta > p.alpha)) throw SupercriticalError(p.alpha, beta);
  return p.A * beta / (beta - p.alpha);
}

double branching_ratio(const EtasParams& p, const MagnitudeModel& model) {
  if (const auto* e = std::get_if<ExponentialMagnitude>(&model)) {
    if (!(e->beta > p.alpha)) return kInf;
    return p.A * e->beta / (e->beta - p.alpha);
  }
  const auto& g = std::get<GammaMagnitude>(model);
  if (!(g.rate > p.alpha)) return kInf;
  return p.A * std::pow(g.rate / (g.rate - p.alpha), g.shape);
}

}  // namespace etas
