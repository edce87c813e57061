#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include <json.hpp>

#include "etas/catalog.hpp"
#include "etas/model.hpp"

namespace etas {

// Regular lattice of cell centres tiling a region.
struct Grid {
  Region region{};
  std::size_t nx{1};
  std::size_t ny{1};

  // Cells of roughly `cell` degrees, adjusted so they tile the region exactly.
  [[nodiscard]] static Grid over(const Region& region, double cell);

  [[nodiscard]] double dx() const noexcept { return region.width() / static_cast<double>(nx); }
  [[nodiscard]] double dy() const noexcept { return region.height() / static_cast<double>(ny); }
  [[nodiscard]] double cell_area() const noexcept { return dx() * dy(); }
  [[nodiscard]] double lon(std::size_t i) const noexcept {
    return region.lon_min + (static_cast<double>(i) + 0.5) * dx();
  }
  [[nodiscard]] double lat(std::size_t j) const noexcept {
    return region.lat_min + (static_cast<double>(j) + 0.5) * dy();
  }
  [[nodiscard]] std::size_t size() const noexcept { return nx * ny; }
  // Node index; longitude varies fastest.
  [[nodiscard]] std::size_t index(std::size_t i, std::size_t j) const noexcept { return j * nx + i; }
};

struct BandwidthConfig {
  int k{5};
  double h_min{0.05};
  double h_max{1.0};
};

struct GaussianKernel {
  double x{0.0};
  double y{0.0};
  double weight{0.0};
  double h{0.0};
};

// Background density u(x, y) in events per day per square degree: either
// uniform 1/|S| over the region or a weighted sum of isotropic Gaussians
// divided by the window length.
class BackgroundField {
 public:
  BackgroundField() = default;

  [[nodiscard]] static BackgroundField uniform(const Region& region);
  [[nodiscard]] static BackgroundField from_kernels(const Region& region, double T,
                                                    std::vector<GaussianKernel> kernels);

  [[nodiscard]] double value(double x, double y) const;
  // Integral of u over the region, in closed form.
  [[nodiscard]] double region_mass() const noexcept { return region_mass_; }
  [[nodiscard]] bool is_uniform() const noexcept { return uniform_; }
  [[nodiscard]] const Region& region() const noexcept { return region_; }
  [[nodiscard]] double window() const noexcept { return T_; }
  [[nodiscard]] const std::vector<GaussianKernel>& kernels() const noexcept { return kernels_; }

 private:
  Region region_{};
  bool uniform_{true};
  double T_{1.0};
  std::vector<GaussianKernel> kernels_;
  double region_mass_{1.0};
};

void to_json(nlohmann::json& j, const BackgroundField& bg);
void from_json(const nlohmann::json& j, BackgroundField& bg);

// Distance from each target event to its k-th nearest target neighbour,
// clipped to [h_min, h_max]. Non-target entries are zero.
[[nodiscard]] std::vector<double> knn_bandwidths(const Catalog& catalog, const BandwidthConfig& config);

// u(x, y) = (1/T) sum_j w_j N_hj(x - x_j, y - y_j) over target events.
// weights has one entry per catalog event (entries for history are ignored).
[[nodiscard]] BackgroundField smooth_background(const Catalog& catalog, std::span<const double> weights,
                                                const BandwidthConfig& config = {});

struct IntensityGrid {
  Grid grid{};
  std::vector<double> values;

  [[nodiscard]] double integral() const;
  [[nodiscard]] std::size_t argmax() const;
  [[nodiscard]] double max() const;
};

void write_grid_csv(std::ostream& out, const IntensityGrid& grid, std::string_view value_name = "value");
// JSON header line followed by ny rows of nx values (north row first).
void write_grid_ascii(std::ostream& out, const IntensityGrid& grid, std::string_view value_name = "value");

// mu u(x, y) + sum over t_i < t of kappa(m_i) g(t - t_i) f(x - x_i, y - y_i; m_i).
[[nodiscard]] double conditional_intensity(const Catalog& catalog, const EtasParams& params,
                                           const BackgroundField& bg, double t, double x, double y);
// mu + sum over t_i < t of kappa(m_i) g(t - t_i).
[[nodiscard]] double ground_intensity(const Catalog& catalog, const EtasParams& params, double t);

[[nodiscard]] IntensityGrid background_grid(const BackgroundField& bg, double mu, const Grid& grid);
[[nodiscard]] IntensityGrid conditional_intensity_grid(const Catalog& catalog, const EtasParams& params,
                                                       const BackgroundField& bg, double t,
                                                       const Grid& grid);
// Lambda(x, y) = mu u(x, y) + (1/T) sum over targets of kappa(m_i) f(x - x_i, y - y_i; m_i).
[[nodiscard]] IntensityGrid total_spatial_intensity(const Catalog& catalog, const EtasParams& params,
                                                    const BackgroundField& bg, const Grid& grid);

struct ClusteringGrid : IntensityGrid {
  std::size_t clamped{0};
};

// omega(x, y) = 1 - mu u(x, y) / Lambda(x, y), clamped to [0, 1).
[[nodiscard]] ClusteringGrid clustering_coefficient(const BackgroundField& bg, double mu,
                                                    const IntensityGrid& lambda);

}  // namespace etas
