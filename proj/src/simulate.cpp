#include "etas/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>

#include "etas/error.hpp"
#include "text.hpp"

namespace etas {

namespace {

// Uniform draw on the open interval (0, 1).
double open_uniform(std::mt19937_64& rng) {
  // 53 random bits offset by half a step keep both ends excluded.
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double draw_magnitude(const MagnitudeModel& model, double m0, std::mt19937_64& rng) {
  if (const auto* e = std::get_if<ExponentialMagnitude>(&model))
    return m0 - std::log(open_uniform(rng)) / e->beta;
  const auto& g = std::get<GammaMagnitude>(model);
  std::gamma_distribution<double> dist(g.shape, 1.0 / g.rate);
  return m0 + dist(rng);
}

struct RawEvent {
  Event e;
  long parent;  // index in the cluster's event list, -1 for the root
  int generation;
  std::uint64_t cluster;
  std::size_t order;
};

}  // namespace

std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void SimConfig::validate() const {
  params.validate();
  etas::validate(magnitude);
  region.validate();
  if (!(T > 0.0)) throw DomainError("simulation needs T > 0");
  if (!(burn_in >= 0.0)) throw DomainError("simulation burn-in must be >= 0");
  if (max_events == 0) throw DomainError("max_events must be >= 1");
  if (const auto* e = std::get_if<ExponentialMagnitude>(&magnitude)) {
    if (!is_subcritical(branching_ratio(params, e->beta)))
      throw DomainError("simulation is supercritical: branching ratio " +
                        text::fmt17(branching_ratio(params, e->beta)) + " >= 1");
  } else if (!is_subcritical(branching_ratio(params, magnitude))) {
    throw DomainError("simulation is supercritical: branching ratio >= 1");
  }
}

double inverse_temporal_cdf(const EtasParams& p, double v, double horizon) {
  if (!(v >= 0.0 && v < 1.0)) throw DomainError("temporal inverse cdf needs v in [0, 1)");
  const double total = std::isinf(horizon) ? 1.0 : temporal_kernel_cdf(p, horizon);
  // (1 + lag/c)^(1-p) = 1 - v G(horizon)
  return p.c * std::expm1(std::log1p(-v * total) / (1.0 - p.p));
}

double inverse_radial_cdf(const EtasParams& p, double m, double m0, double v) {
  if (!(v >= 0.0 && v < 1.0)) throw DomainError("radial inverse cdf needs v in [0, 1)");
  const double s = sigma(p, m, m0);
  return std::sqrt(s * std::expm1(std::log1p(-v) / (1.0 - p.q)));
}

SimCatalog simulate(const SimConfig& config) {
  config.validate();
  const EtasParams& p = config.params;
  const double t_end = config.burn_in + config.T;
  std::mt19937_64 root(split_seed(config.seed, 0));

  // Background: a Poisson number of roots over the whole window.
  struct Root {
    double t, x, y;
  };
  std::vector<Root> roots;
  if (!config.background || config.background->is_uniform()) {
    std::poisson_distribution<long> count(p.mu * t_end);
    const long n = count(root);
    for (long k = 0; k < n; ++k) {
      const double t = t_end * open_uniform(root);
      const double x = config.region.lon_min + config.region.width() * open_uniform(root);
      const double y = config.region.lat_min + config.region.height() * open_uniform(root);
      roots.push_back({t, x, y});
    }
  } else {
    // mu u = (mu / T_bg) sum w_j N(x_j, h_j): draw over the plane, keep the region.
    const auto& bg = *config.background;
    double total_w = 0.0;
    std::vector<double> cum;
    for (const auto& k : bg.kernels()) cum.push_back(total_w += k.weight);
    std::poisson_distribution<long> count(p.mu * t_end * total_w / bg.window());
    const long n = count(root);
    std::normal_distribution<double> normal;
    for (long k = 0; k < n; ++k) {
      const double t = t_end * open_uniform(root);
      const auto it = std::upper_bound(cum.begin(), cum.end(), total_w * open_uniform(root));
      const auto& ker = bg.kernels()[static_cast<std::size_t>(std::min<std::ptrdiff_t>(
          it - cum.begin(), static_cast<std::ptrdiff_t>(cum.size()) - 1))];
      const double x = ker.x + ker.h * normal(root);
      const double y = ker.y + ker.h * normal(root);
      if (config.region.contains(x, y)) roots.push_back({t, x, y});
    }
  }
  std::sort(roots.begin(), roots.end(), [](const Root& a, const Root& b) { return a.t < b.t; });

  std::vector<RawEvent> all;
  bool overflow = false;
  for (std::size_t r = 0; r < roots.size() && !overflow; ++r) {
    std::mt19937_64 rng(split_seed(config.seed, r + 1));
    std::vector<RawEvent> cluster;
    Event e0{roots[r].t, roots[r].x, roots[r].y, 0.0, draw_magnitude(config.magnitude, config.m0, rng), true};
    cluster.push_back({e0, -1, 0, r, 0});
    for (std::size_t k = 0; k < cluster.size(); ++k) {
      if (all.size() + cluster.size() >= config.max_events) {
        overflow = true;
        break;
      }
      const Event parent = cluster[k].e;
      const double horizon = t_end - parent.t;
      const double mean = kappa(p, parent.mag, config.m0) * temporal_kernel_cdf(p, horizon);
      std::poisson_distribution<long> children(mean);
      const long nc = mean > 0.0 ? children(rng) : 0;
      for (long c = 0; c < nc; ++c) {
        const double lag = inverse_temporal_cdf(p, 1.0 - open_uniform(rng), horizon);
        const double radius = inverse_radial_cdf(p, parent.mag, config.m0, 1.0 - open_uniform(rng));
        const double angle = 2.0 * std::numbers::pi * open_uniform(rng);
        Event child{std::min(parent.t + lag, std::nextafter(t_end, 0.0)),
                    parent.lon + radius * std::cos(angle),
                    parent.lat + radius * std::sin(angle),
                    0.0,
                    draw_magnitude(config.magnitude, config.m0, rng),
                    true};
        cluster.push_back({child, static_cast<long>(k), cluster[k].generation + 1, r, cluster.size()});
      }
    }
    // Parent indices become global.
    const long base = static_cast<long>(all.size());
    for (auto& ev : cluster) {
      if (ev.parent >= 0) ev.parent += base;
      all.push_back(ev);
    }
  }

  std::vector<std::size_t> order(all.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (all[a].e.t != all[b].e.t) return all[a].e.t < all[b].e.t;
    if (all[a].cluster != all[b].cluster) return all[a].cluster < all[b].cluster;
    return all[a].order < all[b].order;
  });

  SimCatalog out;
  out.overflow = overflow;
  out.catalog.region = config.region;
  out.catalog.t_start = config.burn_in;
  out.catalog.T = config.T;
  out.catalog.m0 = config.m0;
  std::vector<long> catalog_index(all.size(), -2);
  for (std::size_t k : order) {
    const auto& ev = all[k];
    if (!config.region.contains(ev.e.lon, ev.e.lat)) {
      ++out.out_of_region;
      continue;
    }
    catalog_index[k] = static_cast<long>(out.catalog.events.size());
    Event e = ev.e;
    e.is_target = e.t >= config.burn_in;
    out.catalog.events.push_back(e);
    // Parents precede children in time order, so their index is already known.
    out.parent.push_back(ev.parent < 0 ? -1 : catalog_index[static_cast<std::size_t>(ev.parent)]);
    out.generation.push_back(ev.generation);
  }
  return out;
}

Catalog simulate_ground_thinning(const SimConfig& config) {
  config.validate();
  const EtasParams& p = config.params;
  const double t_end = config.burn_in + config.T;
  std::mt19937_64 rng(split_seed(config.seed, 0));
  Catalog cat;
  cat.region = config.region;
  cat.t_start = config.burn_in;
  cat.T = config.T;
  cat.m0 = config.m0;
  const double m0 = config.m0;
  auto intensity = [&](double t) {
    double s = p.mu;
    for (const auto& e : cat.events) s += kappa(p, e.mag, m0) * temporal_kernel(p, t - e.t);
    return s;
  };
  double t = 0.0;
  while (t < t_end) {
    // The ground intensity only decays between events, so its value now bounds the future.
    const double bound = intensity(t);
    t -= std::log(open_uniform(rng)) / bound;
    if (t >= t_end) break;
    if (open_uniform(rng) * bound <= intensity(t)) {
      cat.events.push_back({t, 0.0, 0.0, 0.0, draw_magnitude(config.magnitude, m0, rng), t >= config.burn_in});
      if (cat.events.size() >= config.max_events) break;
    }
  }
  return cat;
}

void write_genealogy_csv(std::ostream& out, const SimCatalog& sim) {
  out << "# etas-genealogy v1 (parent -1: background, -2: parent outside region)\n";
  out << "child_idx,parent_idx,generation\n";
  for (std::size_t k = 0; k < sim.parent.size(); ++k)
    out << k << ',' << sim.parent[k] << ',' << sim.generation[k] << '\n';
}

}  // namespace etas
