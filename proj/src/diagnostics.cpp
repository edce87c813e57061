#include "etas/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "etas/error.hpp"
#include "etas/parallel.hpp"
#include "kernels.hpp"
#include "text.hpp"

namespace etas {

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

std::vector<double> transformed_times(const EtasLikelihood& lik, const EtasParams& params) {
  std::vector<double> times;
  for (const auto& e : lik.catalog().events)
    if (e.is_target) times.push_back(e.t);
  return lik.compensator_at(params, times);
}

std::vector<double> uniform_residuals(std::span<const double> tau) {
  std::vector<double> u(tau.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const double gap = tau[i] - prev;
    if (!(gap >= 0.0))
      throw DomainError("transformed times decrease at index " + std::to_string(i) + " (" + text::fmt17(prev) +
                        " -> " + text::fmt17(tau[i]) + ")");
    u[i] = -std::expm1(-gap);
    prev = tau[i];
  }
  return u;
}

double kolmogorov_survival(double x) {
  if (!(x > 0.0)) return 1.0;
  if (x < 1.0) {
    // Theta-function form, fast for small x.
    const double w = std::numbers::pi * std::numbers::pi / (8.0 * x * x);
    double s = 0.0;
    for (int k = 1; k < 50; ++k) {
      const double term = std::exp(-static_cast<double>((2 * k - 1) * (2 * k - 1)) * w);
      s += term;
      if (term < 1e-300) break;
    }
    return 1.0 - std::sqrt(2.0 * std::numbers::pi) / x * s;
  }
  double s = 0.0;
  for (int k = 1; k < 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-300) break;
  }
  return std::clamp(s, 0.0, 1.0);
}

KsResult ks_uniform_test(std::span<const double> u) {
  if (u.empty()) throw DomainError("KS test needs at least one value");
  std::vector<double> v(u.begin(), u.end());
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = std::clamp(v[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - x, x - static_cast<double>(i) / n});
  }
  KsResult out;
  out.stat = d;
  if (v.size() >= 10) out.p = kolmogorov_survival(std::sqrt(n) * d);
  return out;
}

std::vector<ResidualBin> temporal_residuals(const EtasLikelihood& lik, const EtasParams& params,
                                            std::size_t bins) {
  if (bins == 0) throw DomainError("temporal residuals need at least one bin");
  const Catalog& cat = lik.catalog();
  std::vector<double> edges(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k)
    edges[k] = k == bins ? cat.t_end() : cat.t_start + cat.T * static_cast<double>(k) / static_cast<double>(bins);
  const auto comp = lik.compensator_at(params, edges);
  std::vector<ResidualBin> out(bins);
  for (std::size_t k = 0; k < bins; ++k) out[k] = {edges[k], edges[k + 1], 0, comp[k + 1] - comp[k]};
  for (const auto& e : cat.events) {
    if (!e.is_target || e.t > cat.t_end()) continue;
    auto k = static_cast<std::size_t>(
        std::upper_bound(edges.begin(), edges.end(), e.t) - edges.begin());
    k = std::clamp<std::size_t>(k, 1, bins) - 1;
    ++out[k].observed;
  }
  return out;
}

IntensityGrid spatial_residuals(const EtasLikelihood& lik, const EtasParams& params, const BackgroundField& bg,
                                const Grid& grid, const BandwidthConfig& bandwidth) {
  const Catalog& cat = lik.catalog();
  const bool spatial = lik.variant() == Variant::SpatioTemporal;
  const auto h = knn_bandwidths(cat, bandwidth);
  const auto src = kernels::sources(cat, params);
  // Time-integrated triggering weight of each source over the target window.
  std::vector<double> weight(src.size(), 0.0);
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (!(src[i].t < cat.t_end())) continue;
    weight[i] = params.A * src[i].kappa1 *
                (temporal_kernel_cdf(params, cat.t_end() - src[i].t) -
                 temporal_kernel_cdf(params, std::max(cat.t_start - src[i].t, 0.0)));
  }
  IntensityGrid out{grid, std::vector<double>(grid.size(), 0.0)};
  const BackgroundField uniform = BackgroundField::uniform(cat.region);
  parallel_for(grid.ny, [&](std::size_t jy) {
    for (std::size_t ix = 0; ix < grid.nx; ++ix) {
      const double x = grid.lon(ix), y = grid.lat(jy);
      double observed = 0.0;
      for (std::size_t j = 0; j < cat.size(); ++j) {
        if (!cat.events[j].is_target) continue;
        const double dx = x - cat.events[j].lon, dy = y - cat.events[j].lat, hh = h[j] * h[j];
        observed += std::exp(-(dx * dx + dy * dy) / (2.0 * hh)) / (2.0 * std::numbers::pi * hh);
      }
      // The ground variant has no spatial kernel; spread its expectation uniformly.
      double expected = params.mu * cat.T * (spatial ? bg.value(x, y) : uniform.value(x, y));
      for (std::size_t i = 0; i < src.size(); ++i) {
        if (weight[i] == 0.0) continue;
        if (spatial) {
          const double dx = x - src[i].x, dy = y - src[i].y;
          expected += weight[i] * src[i].fc * std::exp(-params.q * std::log1p((dx * dx + dy * dy) / src[i].s));
        } else {
          expected += weight[i] * uniform.value(x, y);
        }
      }
      out.values[grid.index(ix, jy)] = observed - expected;
    }
  });
  return out;
}

Diagnostics diagnose(const Catalog& catalog, const EtasParams& params, const BackgroundField& bg, Variant variant,
                     SpatialBoundary boundary, const Grid& grid, std::size_t bins, const BandwidthConfig& bandwidth) {
  const EtasLikelihood lik(catalog, variant, &bg, boundary);
  Diagnostics d;
  d.tau = transformed_times(lik, params);
  d.u_seq = uniform_residuals(d.tau);
  if (!d.u_seq.empty()) d.ks = ks_uniform_test(d.u_seq);
  if (d.tau.size() >= 2) {
    const auto n = static_cast<double>(d.tau.size());
    double si = 0.0, st = 0.0, sii = 0.0, sit = 0.0;
    for (std::size_t i = 0; i < d.tau.size(); ++i) {
      const double x = static_cast<double>(i + 1);
      si += x;
      st += d.tau[i];
      sii += x * x;
      sit += x * d.tau[i];
    }
    d.tau_slope = (n * sit - si * st) / (n * sii - si * si);
  }
  d.temporal = temporal_residuals(lik, params, bins);
  d.spatial = spatial_residuals(lik, params, bg, grid, bandwidth);
  return d;
}

void to_json(nlohmann::json& j, const Diagnostics& d) {
  double sum = 0.0;
  for (const auto& b : d.temporal) sum += b.residual();
  j = nlohmann::json{{"schema", "etas-diagnostics/1"},
                     {"n", d.tau.size()},
                     {"ks_stat", d.ks.stat},
                     {"ks_p", d.ks.p ? nlohmann::json(*d.ks.p) : nlohmann::json(nullptr)},
                     {"tau_slope", d.tau_slope},
                     {"tau_final", d.tau.empty() ? 0.0 : d.tau.back()},
                     {"temporal_residual_sum", sum},
                     {"spatial_residual_integral", d.spatial.integral()}};
}

void write_diagnostics(const std::filesystem::path& dir, const Diagnostics& d) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "diagnostics.json");
    out << nlohmann::json(d).dump(2) << '\n';
  }
  {
    auto out = open_out(dir / "tau.csv");
    out << "# etas-tau v1\ni,tau\n";
    for (std::size_t i = 0; i < d.tau.size(); ++i) out << i + 1 << ',' << text::fmt17(d.tau[i]) << '\n';
  }
  {
    auto out = open_out(dir / "u.csv");
    out << "# etas-u v1\ni,u\n";
    for (std::size_t i = 0; i < d.u_seq.size(); ++i) out << i + 1 << ',' << text::fmt17(d.u_seq[i]) << '\n';
  }
  {
    auto out = open_out(dir / "temporal_residuals.csv");
    out << "# etas-temporal-residuals v1\nt_lo,t_hi,observed,expected,residual\n";
    for (const auto& b : d.temporal)
      out << text::fmt17(b.t_lo) << ',' << text::fmt17(b.t_hi) << ',' << b.observed << ','
          << text::fmt17(b.expected) << ',' << text::fmt17(b.residual()) << '\n';
  }
  {
    auto out = open_out(dir / "spatial_residuals.csv");
    write_grid_csv(out, d.spatial, "residual");
  }
}

}  // namespace etas
