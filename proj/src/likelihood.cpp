#include "etas/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "etas/error.hpp"
#include "etas/parallel.hpp"
#include "kernels.hpp"
#include "text.hpp"

namespace etas {

namespace {

using kernels::Source;
using kernels::sources;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
constexpr std::array<double, 8> kXgk{0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                     0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                     0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                     0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk{0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                     0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                     0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                     0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg{0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Triple {
  double f{0.0}, ds{0.0}, dq{0.0};
  Triple& operator+=(const Triple& o) {
    f += o.f;
    ds += o.ds;
    dq += o.dq;
    return *this;
  }
};

// Kernel mass inside radius R (as a function of r^2) with sigma/q derivatives.
Triple disk_mass(double r2, double s, double q) {
  const double lb = std::log1p(r2 / s);
  const double b1q = std::exp((1.0 - q) * lb);  // B^(1-q)
  return {-std::expm1((1.0 - q) * lb), (1.0 - q) * b1q / (1.0 + r2 / s) * r2 / (s * s), b1q * lb};
}

// Integral over psi in [lo, hi] of disk_mass(d^2 / cos^2 psi).
struct SideIntegrand {
  double d2, s, q;
  Triple operator()(double psi) const {
    const double c = std::cos(psi);
    if (c <= 0.0) return {1.0, 0.0, 0.0};
    return disk_mass(d2 / (c * c), s, q);
  }
};

Triple gk15(const SideIntegrand& fn, double a, double b, double& err) {
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  Triple k = fn(mid);
  k.f *= kWgk[7];
  k.ds *= kWgk[7];
  k.dq *= kWgk[7];
  double g = fn(mid).f * kWg[3];
  for (std::size_t i = 0; i < 7; ++i) {
    const Triple lo = fn(mid - half * kXgk[i]);
    const Triple hi = fn(mid + half * kXgk[i]);
    k.f += kWgk[i] * (lo.f + hi.f);
    k.ds += kWgk[i] * (lo.ds + hi.ds);
    k.dq += kWgk[i] * (lo.dq + hi.dq);
    if (i % 2 == 1) g += kWg[i / 2] * (lo.f + hi.f);
  }
  k.f *= half;
  k.ds *= half;
  k.dq *= half;
  err = std::abs(k.f - g * half);
  return k;
}

Triple adaptive(const SideIntegrand& fn, double a, double b, double tol, int depth) {
  double err = 0.0;
  const Triple whole = gk15(fn, a, b, err);
  if (err <= tol || depth >= 30) return whole;
  const double mid = 0.5 * (a + b);
  Triple out = adaptive(fn, a, mid, 0.5 * tol, depth + 1);
  out += adaptive(fn, mid, b, 0.5 * tol, depth + 1);
  return out;
}

Triple side(double d, double left, double right, double s, double q) {
  if (d <= 0.0) return {};
  const double lo = -std::atan2(left, d);
  const double hi = std::atan2(right, d);
  return adaptive(SideIntegrand{d * d, s, q}, lo, hi, 1e-12, 0);
}

// Derivative pieces of (1+s/c)^(1-p) based temporal cdf G(s).
struct CdfTerms {
  double G{0.0}, dc{0.0}, dp{0.0};
};

CdfTerms cdf_terms(const EtasParams& p, double s) {
  if (!(s > 0.0)) return {};
  const double lb = std::log1p(s / p.c);
  const double b1p = std::exp((1.0 - p.p) * lb);
  return {-std::expm1((1.0 - p.p) * lb), (1.0 - p.p) * b1p / (1.0 + s / p.c) * s / (p.c * p.c), b1p * lb};
}

// Fixed-order sum so results do not depend on the thread count.
double ordered_sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

void to_json(nlohmann::json& j, const LogLik& ll) {
  j = nlohmann::json{{"l1", ll.l1}, {"l2", ll.l2}, {"total", ll.total}, {"n_target", ll.n_target}};
}

RegionMass spatial_region_mass(double x, double y, double sigma, double q, const Region& r) {
  if (!(sigma > 0.0) || !(q > 1.0)) throw DomainError("region mass needs sigma > 0 and q > 1");
  if (!r.contains(x, y)) throw DomainError("region mass centre lies outside the region");
  const double dr = r.lon_max - x, dt = r.lat_max - y, dl = x - r.lon_min, db = y - r.lat_min;
  Triple t;
  t += side(dr, db, dt, sigma, q);
  t += side(dt, dr, dl, sigma, q);
  t += side(dl, dt, db, sigma, q);
  t += side(db, dl, dr, sigma, q);
  return {t.f / kTwoPi, t.ds / kTwoPi, t.dq / kTwoPi};
}

EtasLikelihood::EtasLikelihood(const Catalog& catalog, Variant variant, const BackgroundField* bg,
                               SpatialBoundary boundary)
    : catalog_(&catalog), variant_(variant), boundary_(boundary) {
  if (!std::is_sorted(catalog.events.begin(), catalog.events.end(),
                      [](const Event& a, const Event& b) { return a.t < b.t; }))
    throw DomainError("likelihood needs events sorted by time");
  u_.assign(catalog.events.size(), 1.0);
  if (variant == Variant::SpatioTemporal) {
    if (bg == nullptr) throw DomainError("spatio-temporal likelihood needs a background field");
    for (std::size_t i = 0; i < u_.size(); ++i) u_[i] = bg->value(catalog.events[i].lon, catalog.events[i].lat);
    background_mass_ = bg->region_mass();
  } else {
    boundary_ = SpatialBoundary::Infinite;
  }
}

double EtasLikelihood::negative(const EtasParams& p) const { return evaluate(p, nullptr, false); }

double EtasLikelihood::negative(const EtasParams& p, ParamGradient& grad) const {
  return evaluate(p, &grad, false);
}

double EtasLikelihood::l2(const EtasParams& p) const { return -evaluate(p, nullptr, true); }

double EtasLikelihood::evaluate(const EtasParams& p, ParamGradient* grad, bool throw_on_zero) const {
  p.validate();
  const Catalog& cat = *catalog_;
  const auto src = sources(cat, p);
  const bool spatial = variant_ == Variant::SpatioTemporal;
  const std::size_t n = src.size();
  const double gc = (p.p - 1.0) / p.c;

  // Per target: log lambda and the partial derivatives of lambda.
  struct Term {
    double log_lambda{0.0};
    ParamGradient d{};
  };
  std::vector<Term> terms(n);
  std::vector<char> active(n, 0);
  for (std::size_t j = 0; j < n; ++j) active[j] = cat.events[j].is_target ? 1 : 0;

  parallel_for(n, [&](std::size_t j) {
    if (!active[j]) return;
    const Source& sj = src[j];
    double S = 0.0, Sa = 0.0, Sc = 0.0, Sp = 0.0, Ssig = 0.0, Sg = 0.0, Sq = 0.0;
    for (std::size_t i = 0; i < j; ++i) {
      const Source& si = src[i];
      const double dt = sj.t - si.t;
      if (!(dt > 0.0)) break;
      const double lg = std::log1p(dt / p.c);
      double term, ls = 0.0, r2 = 0.0;
      if (spatial) {
        const double dx = sj.x - si.x, dy = sj.y - si.y;
        r2 = dx * dx + dy * dy;
        ls = std::log1p(r2 / si.s);
        term = si.kappa1 * gc * si.fc * std::exp(-p.p * lg - p.q * ls);
      } else {
        term = si.kappa1 * gc * std::exp(-p.p * lg);
      }
      S += term;
      if (grad) {
        Sa += term * si.dm;
        Sc += term * (-1.0 / p.c + p.p * dt / (p.c * (p.c + dt)));
        Sp += term * (1.0 / (p.p - 1.0) - lg);
        if (spatial) {
          // d log f / d log sigma
          const double dls = -1.0 + p.q * r2 / (si.s + r2);
          Ssig += term * dls;
          Sg += term * dls * si.dm;
          Sq += term * (1.0 / (p.q - 1.0) - ls);
        }
      }
    }
    const double lambda = p.mu * u_[j] + p.A * S;
    Term& out = terms[j];
    out.log_lambda = lambda > 0.0 ? std::log(lambda) : -kInf;
    if (grad && lambda > 0.0) {
      const double inv = 1.0 / lambda;
      out.d = {u_[j] * inv,       S * inv,           p.A * Sa * inv,   p.A * Sc * inv,
               p.A * Sp * inv,    p.A * Ssig / p.D * inv, p.A * Sg * inv, p.A * Sq * inv};
    }
  });

  double event_sum = 0.0;
  ParamGradient g{};
  for (std::size_t j = 0; j < n; ++j) {
    if (!active[j]) continue;
    if (!std::isfinite(terms[j].log_lambda)) {
      if (throw_on_zero)
        throw NumericalError("conditional intensity is zero at event " + std::to_string(j) +
                             " (t=" + text::fmt17(cat.events[j].t) + "); log-likelihood is -inf");
      return kInf;
    }
    event_sum += terms[j].log_lambda;
    if (grad)
      for (std::size_t k = 0; k < kParamCount; ++k) g[k] += terms[j].d[k];
  }

  // Compensator and its gradient.
  const double t_end = cat.t_end();
  const bool exact = spatial && boundary_ == SpatialBoundary::Exact;
  std::vector<ParamGradient> cterm(n);
  std::vector<double> cval(n, 0.0);
  parallel_for(n, [&](std::size_t i) {
    const Source& si = src[i];
    if (!(si.t < t_end)) return;
    const CdfTerms a = cdf_terms(p, t_end - si.t);
    const CdfTerms b = cdf_terms(p, std::max(cat.t_start - si.t, 0.0));
    const double dG = a.G - b.G;
    RegionMass m;
    if (exact) m = spatial_region_mass(si.x, si.y, si.s, p.q, cat.region);
    const double base = si.kappa1 * dG * m.mass;
    cval[i] = p.A * base;
    if (grad) {
      auto& d = cterm[i];
      d[1] = base;
      d[2] = p.A * base * si.dm;
      d[3] = p.A * si.kappa1 * (a.dc - b.dc) * m.mass;
      d[4] = p.A * si.kappa1 * (a.dp - b.dp) * m.mass;
      if (exact) {
        d[5] = p.A * si.kappa1 * dG * m.d_sigma * si.s / p.D;
        d[6] = p.A * si.kappa1 * dG * m.d_sigma * si.s * si.dm;
        d[7] = p.A * si.kappa1 * dG * m.d_q;
      }
    }
  });
  const double comp = p.mu * cat.T * background_mass_ + ordered_sum(cval);

  if (grad) {
    ParamGradient out{};
    out[0] = cat.T * background_mass_ - g[0];
    for (std::size_t k = 1; k < kParamCount; ++k) {
      double c = 0.0;
      for (std::size_t i = 0; i < n; ++i) c += cterm[i][k];
      out[k] = c - g[k];
    }
    *grad = out;
  }
  return comp - event_sum;
}

double EtasLikelihood::compensator(const EtasParams& p) const {
  return compensator_until(p, catalog_->t_end());
}

double EtasLikelihood::compensator_until(const EtasParams& p, double t) const {
  return compensator_at(p, std::span<const double>(&t, 1)).front();
}

std::vector<double> EtasLikelihood::compensator_at(const EtasParams& p, std::span<const double> times) const {
  p.validate();
  const Catalog& cat = *catalog_;
  const auto src = sources(cat, p);
  const auto mass = spatial_masses(p);
  std::vector<double> out(times.size(), 0.0);
  parallel_for(times.size(), [&](std::size_t k) {
    const double t = times[k];
    if (!(t >= cat.t_start)) return;
    double sum = 0.0;
    for (std::size_t i = 0; i < src.size() && src[i].t < t; ++i) {
      const double dG = cdf_terms(p, t - src[i].t).G - cdf_terms(p, std::max(cat.t_start - src[i].t, 0.0)).G;
      sum += src[i].kappa1 * dG * mass[i];
    }
    out[k] = p.mu * (t - cat.t_start) * background_mass_ + p.A * sum;
  });
  return out;
}

std::vector<double> EtasLikelihood::spatial_masses(const EtasParams& p) const {
  std::vector<double> out(catalog_->events.size(), 1.0);
  if (variant_ != Variant::SpatioTemporal || boundary_ != SpatialBoundary::Exact) return out;
  const auto src = sources(*catalog_, p);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = spatial_region_mass(src[i].x, src[i].y, src[i].s, p.q, catalog_->region).mass;
  return out;
}

double magnitude_loglik(const Catalog& catalog, const MagnitudeModel& model) {
  validate(model);
  double sum = 0.0;
  for (const auto& e : catalog.events)
    if (e.is_target) sum += magnitude_log_pdf(model, e.mag, catalog.m0);
  return sum;
}

LogLik loglik(const Catalog& catalog, const EtasParams& params, const MagnitudeModel& magnitude,
              const BackgroundField* bg, Variant variant, SpatialBoundary boundary) {
  const EtasLikelihood lik(catalog, variant, bg, boundary);
  LogLik ll;
  ll.l1 = magnitude_loglik(catalog, magnitude);
  ll.l2 = lik.l2(params);
  ll.total = ll.l1 + ll.l2;
  ll.n_target = catalog.target_count();
  return ll;
}

double compensator(const Catalog& catalog, const EtasParams& params, const BackgroundField* bg,
                   Variant variant, SpatialBoundary boundary) {
  return EtasLikelihood(catalog, variant, bg, boundary).compensator(params);
}

double aic(const LogLik& ll, int k) { return aic(ll.total, k); }

double aic(double loglik_total, int k) {
  if (k < 1) throw DomainError("AIC needs k >= 1");
  return 2.0 * k - 2.0 * loglik_total;
}

}  // namespace etas
