#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace etas {

// One earthquake. Times are fractional days since the catalog origin;
// longitude and latitude are used directly as planar coordinates (degrees).
struct Event {
  double t{0.0};
  double lon{0.0};
  double lat{0.0};
  double depth{0.0};
  double mag{0.0};
  bool is_target{true};

  friend bool operator==(const Event&, const Event&) = default;
};

struct Region {
  double lon_min{-180.0};
  double lon_max{180.0};
  double lat_min{-90.0};
  double lat_max{90.0};

  [[nodiscard]] bool contains(double lon, double lat) const noexcept {
    return lon >= lon_min && lon <= lon_max && lat >= lat_min && lat <= lat_max;
  }
  [[nodiscard]] double width() const noexcept { return lon_max - lon_min; }
  [[nodiscard]] double height() const noexcept { return lat_max - lat_min; }
  [[nodiscard]] double area() const noexcept { return width() * height(); }
  void validate() const;

  friend bool operator==(const Region&, const Region&) = default;
};

// 27-30N, 79-88E.
inline constexpr Region kNepalRegion{79.0, 88.0, 27.0, 30.0};

// Events sorted by time, ties broken by descending magnitude then input order.
// Events with t < t_start are history that only enters intensity sums.
struct Catalog {
  std::vector<Event> events;
  Region region{};
  double t_start{0.0};
  double T{0.0};
  double m0{0.0};
  // Seconds since 1970-01-01T00:00:00Z of t = 0.
  double origin_epoch{0.0};
  // Time axis label; "ideal" for natural time, otherwise the scale spec.
  std::string axis{"ideal"};

  [[nodiscard]] double t_end() const noexcept { return t_start + T; }
  [[nodiscard]] std::size_t size() const noexcept { return events.size(); }
  [[nodiscard]] bool empty() const noexcept { return events.empty(); }
  [[nodiscard]] std::size_t target_count() const noexcept;

  friend bool operator==(const Catalog&, const Catalog&) = default;
};

// Header names of the required columns.
struct ColumnMap {
  std::string time{"time"};
  std::string latitude{"latitude"};
  std::string longitude{"longitude"};
  std::string depth{"depth"};
  std::string mag{"mag"};
};

struct ParseReport {
  std::size_t rows{0};
  std::size_t dropped_missing{0};
  std::size_t duplicates{0};
};

struct ParsedCatalog {
  Catalog catalog;
  ParseReport report;
};

// Reads a delimited catalog with a header row. Raw files (ComCat CSV) are
// re-based so the earliest retained event is at t = 0; files written by
// write_catalog carry t_days/is_target columns and a metadata comment and
// are restored exactly.
[[nodiscard]] ParsedCatalog parse_catalog(std::istream& in, const ColumnMap& columns = {});
[[nodiscard]] ParsedCatalog read_catalog_file(const std::filesystem::path& path,
                                              const ColumnMap& columns = {});

void write_catalog(std::ostream& out, const Catalog& catalog);
void write_catalog_file(const std::filesystem::path& path, const Catalog& catalog);

// Keeps events with mag >= m0 inside region and 0 <= t < t_start + T, marks
// targets (t >= t_start), and re-sorts. An empty result appends a warning.
[[nodiscard]] Catalog filter_catalog(const Catalog& catalog, const Region& region, double m0,
                                     double t_start, double T,
                                     std::vector<std::string>* warnings = nullptr);

// Stable sort by (t, mag descending).
void sort_events(std::vector<Event>& events);

// ISO-8601 UTC timestamps: "YYYY-MM-DD", "YYYY-MM-DDThh:mm:ss[.fff][Z]".
[[nodiscard]] double parse_iso8601(std::string_view text);
[[nodiscard]] std::string format_iso8601(double epoch_seconds);

// --- ComCat search client -------------------------------------------------

struct ComcatQuery {
  Region region{kNepalRegion};
  std::string start;  // YYYY-MM-DD
  std::string end;    // YYYY-MM-DD
  double min_mag{5.0};

  [[nodiscard]] std::string path_and_query() const;
};

struct HttpResponse {
  int status{0};
  std::string body;
};

using HttpGet = std::function<HttpResponse(const std::string& host, const std::string& target)>;

// HTTPS GET through cpp-httplib. Connection failures return status 0.
[[nodiscard]] HttpGet default_http_get();

struct FetchOptions {
  std::filesystem::path cache_dir{".etas-cache"};
  std::string host{"https://earthquake.usgs.gov"};
  // Re-download even when a cached copy exists.
  bool refresh{false};
};

struct FetchResult {
  std::string body;
  bool from_cache{false};
  bool stale{false};
  std::string notice;
  std::filesystem::path cache_file;
};

// Cached query against the FDSN event search endpoint. A cached response is
// served without touching the network unless refresh is set; a failed refresh
// falls back to the cache with a staleness notice.
[[nodiscard]] FetchResult fetch_comcat(const ComcatQuery& query, const FetchOptions& options,
                                       const HttpGet& get = default_http_get());

}  // namespace etas
