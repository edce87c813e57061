#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "etas/catalog.hpp"
#include "etas/model.hpp"

namespace etas::kernels {

// Per-event quantities that do not depend on the other event of a pair.
struct Source {
  double t, x, y;
  double dm;      // m - m0
  double kappa1;  // exp(alpha dm), A factored out
  double s;       // sigma
  double fc;      // (q - 1) / (pi sigma)
};

inline std::vector<Source> sources(const Catalog& cat, const EtasParams& p) {
  std::vector<Source> out(cat.events.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto& e = cat.events[i];
    const double dm = e.mag - cat.m0;
    const double s = p.D * std::exp(p.gamma * dm);
    out[i] = {e.t, e.lon, e.lat, dm, std::exp(p.alpha * dm), s, (p.q - 1.0) / (std::numbers::pi * s)};
  }
  return out;
}

// kappa g f of source i at (t, x, y) without the factor A; spatial=false drops f.
inline double pair_term(const EtasParams& p, const Source& si, double t, double x, double y, bool spatial) {
  const double g = (p.p - 1.0) / p.c * std::exp(-p.p * std::log1p((t - si.t) / p.c));
  if (!spatial) return si.kappa1 * g;
  const double dx = x - si.x, dy = y - si.y;
  return si.kappa1 * g * si.fc * std::exp(-p.q * std::log1p((dx * dx + dy * dy) / si.s));
}

}  // namespace etas::kernels
