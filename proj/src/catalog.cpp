#include "etas/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

#include "etas/error.hpp"
#include "text.hpp"

namespace etas {

namespace {

constexpr double kSecondsPerDay = 86400.0;
constexpr std::string_view kMetaTag = "# etas-catalog";

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

int parse_int(std::string_view s, std::string_view what, std::string_view whole) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw DomainError("bad " + std::string(what) + " in timestamp '" + std::string(whole) + "'");
  return v;
}

struct CatalogMeta {
  bool present{false};
  double origin_epoch{0.0};
  double t_start{0.0};
  double T{0.0};
  double m0{0.0};
  Region region{};
  std::string axis{"ideal"};
};

CatalogMeta parse_meta(std::string_view line) {
  CatalogMeta meta;
  meta.present = true;
  std::istringstream in{std::string(line.substr(kMetaTag.size()))};
  std::string token;
  auto number = [&](const std::string& key, const std::string& value) {
    auto v = text::parse_double(value);
    if (!v) throw FormatError("catalog metadata: bad value for " + key);
    return *v;
  };
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;  // version tag
    const std::string key = token.substr(0, eq);
    const std::string value = token.substr(eq + 1);
    if (key == "origin_epoch") {
      meta.origin_epoch = number(key, value);
    } else if (key == "t_start") {
      meta.t_start = number(key, value);
    } else if (key == "T") {
      meta.T = number(key, value);
    } else if (key == "m0") {
      meta.m0 = number(key, value);
    } else if (key == "axis") {
      meta.axis = value;
    } else if (key == "region") {
      const auto parts = text::split_csv(value);
      if (parts.size() != 4) throw FormatError("catalog metadata: region needs 4 values");
      meta.region = {number(key, parts[0]), number(key, parts[1]), number(key, parts[2]),
                     number(key, parts[3])};
    }
  }
  return meta;
}

}  // namespace

void Region::validate() const {
  if (!(lon_min < lon_max) || !(lat_min < lat_max))
    throw DomainError("region bounds must satisfy lon_min < lon_max and lat_min < lat_max");
}

std::size_t Catalog::target_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(events.begin(), events.end(), [](const Event& e) { return e.is_target; }));
}

void sort_events(std::vector<Event>& events) {
  std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
    if (a.t != b.t) return a.t < b.t;
    return a.mag > b.mag;
  });
}

double parse_iso8601(std::string_view text) {
  const std::string_view whole = text::trim(text);
  std::string_view s = whole;
  if (s.size() < 10 || s[4] != '-' || s[7] != '-')
    throw DomainError("unparseable timestamp '" + std::string(whole) + "'");
  const int y = parse_int(s.substr(0, 4), "year", whole);
  const int mo = parse_int(s.substr(5, 2), "month", whole);
  const int d = parse_int(s.substr(8, 2), "day", whole);
  const std::chrono::year_month_day ymd{std::chrono::year{y},
                                        std::chrono::month{static_cast<unsigned>(mo)},
                                        std::chrono::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) throw DomainError("invalid calendar date '" + std::string(whole) + "'");
  double seconds = static_cast<double>(std::chrono::sys_days{ymd}.time_since_epoch().count()) *
                   kSecondsPerDay;
  s.remove_prefix(10);
  if (s.empty()) return seconds;
  if (s.front() != 'T' && s.front() != ' ')
    throw DomainError("unparseable timestamp '" + std::string(whole) + "'");
  s.remove_prefix(1);
  if (s.size() < 5 || s[2] != ':')
    throw DomainError("unparseable time of day in '" + std::string(whole) + "'");
  const int hh = parse_int(s.substr(0, 2), "hour", whole);
  const int mm = parse_int(s.substr(3, 2), "minute", whole);
  s.remove_prefix(5);
  double ss = 0.0;
  if (!s.empty() && s.front() == ':') {
    s.remove_prefix(1);
    std::size_t n = 0;
    while (n < s.size() && (std::isdigit(static_cast<unsigned char>(s[n])) || s[n] == '.')) ++n;
    auto v = text::parse_double(s.substr(0, n));
    if (!v) throw DomainError("bad seconds in timestamp '" + std::string(whole) + "'");
    ss = *v;
    s.remove_prefix(n);
  }
  if (hh > 23 || mm > 59 || ss >= 61.0)
    throw DomainError("time of day out of range in '" + std::string(whole) + "'");
  double offset = 0.0;
  if (s == "Z" || s.empty()) {
    offset = 0.0;
  } else if ((s.front() == '+' || s.front() == '-') && s.size() == 6 && s[3] == ':') {
    const int oh = parse_int(s.substr(1, 2), "offset", whole);
    const int om = parse_int(s.substr(4, 2), "offset", whole);
    offset = (s.front() == '+' ? 1.0 : -1.0) * (oh * 3600.0 + om * 60.0);
  } else {
    throw DomainError("bad zone designator in '" + std::string(whole) + "'");
  }
  return seconds + hh * 3600.0 + mm * 60.0 + ss - offset;
}

std::string format_iso8601(double epoch_seconds) {
  const auto total_ms = static_cast<std::int64_t>(std::llround(epoch_seconds * 1000.0));
  std::int64_t days = total_ms / 86'400'000;
  std::int64_t ms_of_day = total_ms % 86'400'000;
  if (ms_of_day < 0) {
    ms_of_day += 86'400'000;
    --days;
  }
  const std::chrono::year_month_day ymd{
      std::chrono::sys_days{std::chrono::days{static_cast<int>(days)}}};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()), int(ms_of_day / 3'600'000),
                int(ms_of_day / 60'000 % 60), int(ms_of_day / 1000 % 60), int(ms_of_day % 1000));
  return buf;
}

ParsedCatalog parse_catalog(std::istream& in, const ColumnMap& columns) {
  ParsedCatalog result;
  CatalogMeta meta;
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty()) continue;
    if (trimmed.front() == '#') {
      if (trimmed.substr(0, kMetaTag.size()) == kMetaTag) meta = parse_meta(trimmed);
      continue;
    }
    header = text::split_csv(trimmed);
    break;
  }
  if (header.empty()) return result;  // nothing at all, not even a header

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) index[lower(text::trim(header[i]))] = i;
  auto column = [&](const std::string& name, bool required) -> long {
    auto it = index.find(lower(name));
    if (it == index.end()) {
      if (required) throw FormatError("malformed header: missing column '" + name + "'");
      return -1;
    }
    return static_cast<long>(it->second);
  };
  const long c_tdays = column("t_days", false);
  const long c_target = column("is_target", false);
  const long c_time = column(columns.time, c_tdays < 0);
  const long c_lat = column(columns.latitude, true);
  const long c_lon = column(columns.longitude, true);
  const long c_depth = column(columns.depth, true);
  const long c_mag = column(columns.mag, true);

  struct Row {
    double when;  // epoch seconds, or days when t_days is present
    Event e;
  };
  std::vector<Row> rows;
  std::set<std::tuple<double, double, double, double>> seen;

  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = text::trim(line);
    if (trimmed.empty() || trimmed.front() == '#') continue;
    ++result.report.rows;
    const auto fields = text::split_csv(trimmed);
    auto field = [&](long c) -> std::string_view {
      if (c < 0 || static_cast<std::size_t>(c) >= fields.size()) return {};
      return text::trim(fields[static_cast<std::size_t>(c)]);
    };
    const long c_when = c_tdays >= 0 ? c_tdays : c_time;
    const std::string_view f_when = field(c_when), f_lat = field(c_lat), f_lon = field(c_lon),
                           f_depth = field(c_depth), f_mag = field(c_mag);
    if (f_when.empty() || f_lat.empty() || f_lon.empty() || f_depth.empty() || f_mag.empty()) {
      ++result.report.dropped_missing;
      continue;
    }
    Row row;
    if (c_tdays >= 0) {
      auto v = text::parse_double(f_when);
      if (!v || !std::isfinite(*v)) throw RowError(line_no, "unparseable t_days '" + std::string(f_when) + "'");
      row.when = *v;
    } else {
      try {
        row.when = parse_iso8601(f_when);
      } catch (const DomainError& e) {
        throw RowError(line_no, e.what());
      }
    }
    auto num = [&](std::string_view f, const char* name) {
      auto v = text::parse_double(f);
      if (!v || !std::isfinite(*v))
        throw RowError(line_no, std::string("unparseable ") + name + " '" + std::string(f) + "'");
      return *v;
    };
    row.e.lat = num(f_lat, "latitude");
    row.e.lon = num(f_lon, "longitude");
    row.e.depth = std::max(0.0, num(f_depth, "depth"));
    row.e.mag = num(f_mag, "magnitude");
    if (c_target >= 0) {
      const auto f = field(c_target);
      row.e.is_target = !(f == "0" || lower(f) == "false");
    }
    if (!seen.emplace(row.when, row.e.lat, row.e.lon, row.e.mag).second) {
      ++result.report.duplicates;
      continue;
    }
    rows.push_back(row);
  }

  Catalog& cat = result.catalog;
  if (meta.present) {
    cat.origin_epoch = meta.origin_epoch;
    cat.t_start = meta.t_start;
    cat.T = meta.T;
    cat.m0 = meta.m0;
    cat.region = meta.region;
    cat.axis = meta.axis;
  }
  double origin = cat.origin_epoch;
  if (c_tdays < 0 && !rows.empty()) {
    origin = std::min_element(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
               return a.when < b.when;
             })->when;
    if (!meta.present) cat.origin_epoch = origin;
  }
  cat.events.reserve(rows.size());
  for (auto& row : rows) {
    row.e.t = c_tdays >= 0 ? row.when : (row.when - cat.origin_epoch) / kSecondsPerDay;
    cat.events.push_back(row.e);
  }
  sort_events(cat.events);
  if (!meta.present && !cat.events.empty()) {
    cat.T = cat.events.back().t - cat.t_start;
    cat.m0 = std::min_element(cat.events.begin(), cat.events.end(),
                              [](const Event& a, const Event& b) { return a.mag < b.mag; })
                 ->mag;
  }
  return result;
}

ParsedCatalog read_catalog_file(const std::filesystem::path& path, const ColumnMap& columns) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open catalog file " + path.string());
  return parse_catalog(in, columns);
}

void write_catalog(std::ostream& out, const Catalog& catalog) {
  out << kMetaTag << " v1 origin_epoch=" << text::fmt17(catalog.origin_epoch)
      << " t_start=" << text::fmt17(catalog.t_start) << " T=" << text::fmt17(catalog.T)
      << " m0=" << text::fmt17(catalog.m0) << " region=" << text::fmt17(catalog.region.lon_min)
      << ',' << text::fmt17(catalog.region.lon_max) << ',' << text::fmt17(catalog.region.lat_min)
      << ',' << text::fmt17(catalog.region.lat_max) << " axis=" << catalog.axis << '\n';
  out << "time,latitude,longitude,depth,mag,t_days,is_target\n";
  const bool natural = catalog.axis == "ideal";
  for (const auto& e : catalog.events) {
    if (natural) out << format_iso8601(catalog.origin_epoch + e.t * kSecondsPerDay);
    out << ',' << text::fmt17(e.lat) << ',' << text::fmt17(e.lon) << ',' << text::fmt17(e.depth)
        << ',' << text::fmt17(e.mag) << ',' << text::fmt17(e.t) << ',' << (e.is_target ? 1 : 0)
        << '\n';
  }
}

void write_catalog_file(const std::filesystem::path& path, const Catalog& catalog) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write catalog file " + path.string());
  write_catalog(out, catalog);
}

Catalog filter_catalog(const Catalog& catalog, const Region& region, double m0, double t_start,
                       double T, std::vector<std::string>* warnings) {
  region.validate();
  if (!(T > 0.0) || !std::isfinite(T)) throw DomainError("study duration T must be positive");
  if (!std::isfinite(m0)) throw DomainError("magnitude threshold m0 must be finite");
  if (!std::isfinite(t_start) || t_start < 0.0) throw DomainError("t_start must be >= 0");
  Catalog out;
  out.region = region;
  out.m0 = m0;
  out.t_start = t_start;
  out.T = T;
  out.origin_epoch = catalog.origin_epoch;
  out.axis = catalog.axis;
  const double t_end = t_start + T;
  for (Event e : catalog.events) {
    if (e.mag < m0 || !region.contains(e.lon, e.lat) || e.t < 0.0 || !(e.t < t_end)) continue;
    e.is_target = e.t >= t_start;
    out.events.push_back(e);
  }
  sort_events(out.events);
  if (out.events.empty() && warnings)
    warnings->push_back("filter_catalog: no events retained (empty catalog)");
  return out;
}

std::string ComcatQuery::path_and_query() const {
  std::ostringstream q;
  q << "/fdsnws/event/1/query?format=csv&orderby=time-asc&starttime=" << start
    << "&endtime=" << end << "&minlatitude=" << text::fmt17(region.lat_min)
    << "&maxlatitude=" << text::fmt17(region.lat_max)
    << "&minlongitude=" << text::fmt17(region.lon_min)
    << "&maxlongitude=" << text::fmt17(region.lon_max)
    << "&minmagnitude=" << text::fmt17(min_mag);
  return q.str();
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

FetchResult fetch_comcat(const ComcatQuery& query, const FetchOptions& options,
                         const HttpGet& get) {
  query.region.validate();
  const double start = parse_iso8601(query.start);
  const double end = parse_iso8601(query.end);
  if (end < start) throw DomainError("fetch: end date precedes start date");
  if (!std::isfinite(query.min_mag)) throw DomainError("fetch: min magnitude must be finite");

  const std::string target = query.path_and_query();
  char name[40];
  std::snprintf(name, sizeof name, "comcat-%016llx.csv",
                static_cast<unsigned long long>(fnv1a(options.host + target)));
  FetchResult result;
  result.cache_file = options.cache_dir / name;
  const bool cached = std::filesystem::exists(result.cache_file);
  if (cached && !options.refresh) {
    result.body = read_all(result.cache_file);
    result.from_cache = true;
    return result;
  }

  HttpResponse response;
  std::string failure;
  try {
    response = get(options.host, target);
  } catch (const std::exception& e) {
    response.status = 0;
    failure = e.what();
  }
  if (response.status == 200) {
    std::filesystem::create_directories(options.cache_dir);
    std::ofstream out(result.cache_file, std::ios::binary);
    out << response.body;
    if (!out) throw Error("cannot write cache file " + result.cache_file.string());
    result.body = std::move(response.body);
    return result;
  }
  if (failure.empty()) failure = response.body.substr(0, 200);
  if (cached) {
    result.body = read_all(result.cache_file);
    result.from_cache = true;
    result.stale = true;
    result.notice = "network request failed (status " + std::to_string(response.status) +
                    "); serving cached copy " + result.cache_file.string() +
                    " which may be stale";
    return result;
  }
  throw TransportError(response.status, "fetch failed with HTTP status " +
                                            std::to_string(response.status) + ": " + failure);
}

}  // namespace etas
