#include "etas/intensity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <string>

#include "etas/error.hpp"
#include "etas/parallel.hpp"
#include "text.hpp"

namespace etas {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double gaussian(double dx, double dy, double h) {
  const double h2 = h * h;
  return std::exp(-(dx * dx + dy * dy) / (2.0 * h2)) / (2.0 * std::numbers::pi * h2);
}

// Triggered contribution of event e at (t, x, y), skipping the checked
// kernel wrappers.
double triggered_term(const EtasParams& p, const Event& e, double m0, double lag, double dx,
                      double dy) {
  const double s = p.D * std::exp(p.gamma * (e.mag - m0));
  const double k = p.A * std::exp(p.alpha * (e.mag - m0));
  const double g = (p.p - 1.0) / p.c * std::exp(-p.p * std::log1p(lag / p.c));
  const double f = (p.q - 1.0) / (std::numbers::pi * s) *
                   std::exp(-p.q * std::log1p((dx * dx + dy * dy) / s));
  return k * g * f;
}

}  // namespace

Grid Grid::over(const Region& region, double cell) {
  region.validate();
  if (!(cell > 0.0)) throw DomainError("grid cell size must be > 0");
  Grid g;
  g.region = region;
  g.nx = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(region.width() / cell - 1e-9)));
  g.ny = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(region.height() / cell - 1e-9)));
  return g;
}

BackgroundField BackgroundField::uniform(const Region& region) {
  region.validate();
  BackgroundField bg;
  bg.region_ = region;
  bg.uniform_ = true;
  bg.region_mass_ = 1.0;
  return bg;
}

BackgroundField BackgroundField::from_kernels(const Region& region, double T,
                                              std::vector<GaussianKernel> kernels) {
  region.validate();
  if (!(T > 0.0)) throw DomainError("background field needs a positive window length");
  BackgroundField bg;
  bg.region_ = region;
  bg.uniform_ = false;
  bg.T_ = T;
  bg.kernels_ = std::move(kernels);
  double mass = 0.0;
  for (const auto& k : bg.kernels_) {
    const double fx = normal_cdf((region.lon_max - k.x) / k.h) - normal_cdf((region.lon_min - k.x) / k.h);
    const double fy = normal_cdf((region.lat_max - k.y) / k.h) - normal_cdf((region.lat_min - k.y) / k.h);
    mass += k.weight * fx * fy;
  }
  bg.region_mass_ = mass / T;
  return bg;
}

double BackgroundField::value(double x, double y) const {
  if (uniform_) return region_.contains(x, y) ? 1.0 / region_.area() : 0.0;
  double sum = 0.0;
  for (const auto& k : kernels_) sum += k.weight * gaussian(x - k.x, y - k.y, k.h);
  return sum / T_;
}

void to_json(nlohmann::json& j, const BackgroundField& bg) {
  const auto& r = bg.region();
  j = {{"uniform", bg.is_uniform()},
       {"region", {r.lon_min, r.lon_max, r.lat_min, r.lat_max}},
       {"T", bg.window()},
       {"region_mass", bg.region_mass()}};
  auto kernels = nlohmann::json::array();
  for (const auto& k : bg.kernels()) kernels.push_back({k.x, k.y, k.weight, k.h});
  j["kernels"] = std::move(kernels);
}

void from_json(const nlohmann::json& j, BackgroundField& bg) {
  const auto r = j.at("region");
  const Region region{r.at(0).get<double>(), r.at(1).get<double>(), r.at(2).get<double>(),
                      r.at(3).get<double>()};
  if (j.at("uniform").get<bool>()) {
    bg = BackgroundField::uniform(region);
    return;
  }
  std::vector<GaussianKernel> kernels;
  for (const auto& k : j.at("kernels"))
    kernels.push_back({k.at(0).get<double>(), k.at(1).get<double>(), k.at(2).get<double>(),
                       k.at(3).get<double>()});
  bg = BackgroundField::from_kernels(region, j.at("T").get<double>(), std::move(kernels));
}

std::vector<double> knn_bandwidths(const Catalog& catalog, const BandwidthConfig& config) {
  if (config.k < 1 || !(config.h_min > 0.0) || !(config.h_max >= config.h_min))
    throw DomainError("bandwidth config needs k >= 1 and 0 < h_min <= h_max");
  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < catalog.size(); ++i)
    if (catalog.events[i].is_target) targets.push_back(i);
  std::vector<double> h(catalog.size(), 0.0);
  std::vector<double> dist;
  for (std::size_t a : targets) {
    dist.clear();
    for (std::size_t b : targets) {
      if (a == b) continue;
      const double dx = catalog.events[a].lon - catalog.events[b].lon;
      const double dy = catalog.events[a].lat - catalog.events[b].lat;
      dist.push_back(std::hypot(dx, dy));
    }
    double d = config.h_max;
    if (!dist.empty()) {
      const auto k = std::min<std::size_t>(static_cast<std::size_t>(config.k), dist.size()) - 1;
      std::nth_element(dist.begin(), dist.begin() + static_cast<long>(k), dist.end());
      d = dist[k];
    }
    h[a] = std::clamp(d, config.h_min, config.h_max);
  }
  return h;
}

BackgroundField smooth_background(const Catalog& catalog, std::span<const double> weights,
                                  const BandwidthConfig& config) {
  if (catalog.empty()) throw DomainError("smooth_background needs a nonempty catalog");
  if (weights.size() != catalog.size())
    throw DomainError("smooth_background needs one weight per event");
  const auto h = knn_bandwidths(catalog, config);
  std::vector<GaussianKernel> kernels;
  double total = 0.0;
  for (std::size_t j = 0; j < catalog.size(); ++j) {
    const double w = weights[j];
    if (!(w >= 0.0 && w <= 1.0)) throw DomainError("background weights must lie in [0, 1]");
    if (!catalog.events[j].is_target || w == 0.0) continue;
    kernels.push_back({catalog.events[j].lon, catalog.events[j].lat, w, h[j]});
    total += w;
  }
  if (!(total > 0.0)) throw NumericalError("smooth_background: no background mass (all weights zero)");
  return BackgroundField::from_kernels(catalog.region, catalog.T, std::move(kernels));
}

double IntensityGrid::integral() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * grid.cell_area();
}

std::size_t IntensityGrid::argmax() const {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

double IntensityGrid::max() const { return values.empty() ? 0.0 : values[argmax()]; }

void write_grid_csv(std::ostream& out, const IntensityGrid& grid, std::string_view value_name) {
  out << "# etas-grid v1 nx=" << grid.grid.nx << " ny=" << grid.grid.ny << '\n';
  out << "lon,lat," << value_name << '\n';
  for (std::size_t j = 0; j < grid.grid.ny; ++j)
    for (std::size_t i = 0; i < grid.grid.nx; ++i)
      out << text::fmt17(grid.grid.lon(i)) << ',' << text::fmt17(grid.grid.lat(j)) << ','
          << text::fmt17(grid.values[grid.grid.index(i, j)]) << '\n';
}

void write_grid_ascii(std::ostream& out, const IntensityGrid& grid, std::string_view value_name) {
  const nlohmann::json header = {{"schema", "etas-grid-ascii"},
                                 {"version", 1},
                                 {"name", value_name},
                                 {"nx", grid.grid.nx},
                                 {"ny", grid.grid.ny},
                                 {"lon_min", grid.grid.region.lon_min},
                                 {"lon_max", grid.grid.region.lon_max},
                                 {"lat_min", grid.grid.region.lat_min},
                                 {"lat_max", grid.grid.region.lat_max},
                                 {"dx", grid.grid.dx()},
                                 {"dy", grid.grid.dy()},
                                 {"row_order", "north_to_south"}};
  out << header.dump() << '\n';
  for (std::size_t jj = grid.grid.ny; jj-- > 0;) {
    for (std::size_t i = 0; i < grid.grid.nx; ++i) {
      if (i) out << ' ';
      out << text::fmt17(grid.values[grid.grid.index(i, jj)]);
    }
    out << '\n';
  }
}

double conditional_intensity(const Catalog& catalog, const EtasParams& params,
                             const BackgroundField& bg, double t, double x, double y) {
  double sum = 0.0;
  for (const auto& e : catalog.events) {
    if (!(e.t < t)) break;
    sum += triggered_term(params, e, catalog.m0, t - e.t, x - e.lon, y - e.lat);
  }
  return params.mu * bg.value(x, y) + sum;
}

double ground_intensity(const Catalog& catalog, const EtasParams& params, double t) {
  double sum = 0.0;
  for (const auto& e : catalog.events) {
    if (!(e.t < t)) break;
    sum += params.A * std::exp(params.alpha * (e.mag - catalog.m0)) * (params.p - 1.0) / params.c *
           std::exp(-params.p * std::log1p((t - e.t) / params.c));
  }
  return params.mu + sum;
}

IntensityGrid background_grid(const BackgroundField& bg, double mu, const Grid& grid) {
  IntensityGrid out{grid, std::vector<double>(grid.size())};
  parallel_for(grid.ny, [&](std::size_t j) {
    for (std::size_t i = 0; i < grid.nx; ++i)
      out.values[grid.index(i, j)] = mu * bg.value(grid.lon(i), grid.lat(j));
  });
  return out;
}

IntensityGrid conditional_intensity_grid(const Catalog& catalog, const EtasParams& params,
                                         const BackgroundField& bg, double t, const Grid& grid) {
  IntensityGrid out{grid, std::vector<double>(grid.size())};
  parallel_for(grid.ny, [&](std::size_t j) {
    for (std::size_t i = 0; i < grid.nx; ++i)
      out.values[grid.index(i, j)] =
          conditional_intensity(catalog, params, bg, t, grid.lon(i), grid.lat(j));
  });
  return out;
}

IntensityGrid total_spatial_intensity(const Catalog& catalog, const EtasParams& params,
                                      const BackgroundField& bg, const Grid& grid) {
  if (!(catalog.T > 0.0)) throw DomainError("total spatial intensity needs T > 0");
  IntensityGrid out{grid, std::vector<double>(grid.size())};
  parallel_for(grid.ny, [&](std::size_t j) {
    const double y = grid.lat(j);
    for (std::size_t i = 0; i < grid.nx; ++i) {
      const double x = grid.lon(i);
      double sum = 0.0;
      for (const auto& e : catalog.events) {
        if (!e.is_target) continue;
        sum += kappa(params, e.mag, catalog.m0) * spatial_kernel(params, x - e.lon, y - e.lat, e.mag, catalog.m0);
      }
      out.values[grid.index(i, j)] = params.mu * bg.value(x, y) + sum / catalog.T;
    }
  });
  return out;
}

ClusteringGrid clustering_coefficient(const BackgroundField& bg, double mu, const IntensityGrid& lambda) {
  ClusteringGrid out;
  out.grid = lambda.grid;
  out.values.resize(lambda.values.size());
  const auto& g = lambda.grid;
  for (std::size_t j = 0; j < g.ny; ++j) {
    for (std::size_t i = 0; i < g.nx; ++i) {
      const std::size_t n = g.index(i, j);
      const double L = lambda.values[n];
      if (!(L > 0.0))
        throw NumericalError("clustering coefficient: total intensity is zero at node (" +
                             std::to_string(i) + "," + std::to_string(j) + ") lon=" +
                             text::fmt17(g.lon(i)) + " lat=" + text::fmt17(g.lat(j)));
      double w = 1.0 - mu * bg.value(g.lon(i), g.lat(j)) / L;
      if (w < 0.0) {
        w = 0.0;
        ++out.clamped;
      } else if (w >= 1.0) {
        w = std::nextafter(1.0, 0.0);
        ++out.clamped;
      }
      out.values[n] = w;
    }
  }
  return out;
}

}  // namespace etas
