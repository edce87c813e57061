#include "run_config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "etas/error.hpp"

namespace etas::cli {

namespace {

const std::set<std::string> kKeys{"schema",   "catalog",   "region",        "m0",        "t_start",  "T",
                                  "scale",    "minor_catalog", "major_threshold", "variant", "boundary",
                                  "magnitude", "optimizer", "fixed",         "initial",   "bandwidth", "grid_cell",
                                  "bins",     "threshold", "seed",          "out_dir"};

void one_of(const std::string& key, const std::string& value, std::initializer_list<const char*> allowed) {
  std::string list;
  for (const char* a : allowed) {
    if (value == a) return;
    list += list.empty() ? a : std::string("|") + a;
  }
  throw DomainError(key + " must be one of " + list + ", got '" + value + "'");
}

}  // namespace

std::filesystem::path RunConfig::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

void RunConfig::validate() const {
  if (catalog.empty()) throw DomainError("config: catalog path is required");
  if (!std::filesystem::exists(resolve(catalog)))
    throw DomainError("config: catalog file " + resolve(catalog).string() + " does not exist");
  if (region) region->validate();
  if (m0 && !std::isfinite(*m0)) throw DomainError("config: m0 must be finite");
  if (t_start && !(*t_start >= 0.0)) throw DomainError("config: t_start must be >= 0");
  if (T && !(*T > 0.0)) throw DomainError("config: T must be positive");
  const TimeScale s = parse_scale_spec(scale);
  if (s.kind == ScaleKind::ProportionalHazards) {
    if (!minor_catalog) throw DomainError("config: scale 'ph' needs minor_catalog");
  }
  if (minor_catalog && !std::filesystem::exists(resolve(*minor_catalog)))
    throw DomainError("config: minor catalog " + resolve(*minor_catalog).string() + " does not exist");
  one_of("variant", variant, {"isdm", "ground"});
  one_of("boundary", boundary, {"infinite", "exact"});
  one_of("magnitude", magnitude, {"exp", "gamma"});
  one_of("optimizer", optimizer, {"dfp", "nm"});
  if (bandwidth.k < 1) throw DomainError("config: bandwidth.k must be >= 1");
  if (!(bandwidth.h_min > 0.0) || !(bandwidth.h_max >= bandwidth.h_min))
    throw DomainError("config: bandwidth needs 0 < h_min <= h_max");
  if (!(grid_cell > 0.0)) throw DomainError("config: grid_cell must be positive");
  if (bins == 0) throw DomainError("config: bins must be positive");
  if (!(threshold > 0.0 && threshold <= 1.0)) throw DomainError("config: threshold must lie in (0, 1]");
  for (const auto& [key, value] : initial.items()) {
    (void)param_from_name(key);
    if (!value.is_number()) throw DomainError("config: initial." + key + " must be a number");
  }
}

Region parse_region(const std::string& text) {
  std::vector<double> v;
  std::stringstream in(text);
  std::string field;
  while (std::getline(in, field, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(field, &used));
      if (used != field.size()) throw std::invalid_argument(field);
    } catch (const std::exception&) {
      throw DomainError("region '" + text + "' must be lon_min,lon_max,lat_min,lat_max");
    }
  }
  if (v.size() != 4) throw DomainError("region '" + text + "' must be lon_min,lon_max,lat_min,lat_max");
  Region r{v[0], v[1], v[2], v[3]};
  r.validate();
  return r;
}

void set_fixed(RunConfig& c, const std::vector<std::string>& names) {
  c.fixed = {};
  for (const auto& n : names) c.fixed[static_cast<std::size_t>(param_from_name(n))] = true;
}

RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw DomainError("config: expected a JSON object");
  for (const auto& [key, value] : j.items())
    if (!kKeys.count(key)) throw DomainError("config: unknown key '" + key + "'");
  if (j.value("schema", std::string{}) != kRunSchema)
    throw DomainError(std::string("config: schema must be '") + kRunSchema + "'");
  RunConfig c;
  c.base_dir = base_dir;
  try {
    c.catalog = j.at("catalog").get<std::string>();
    if (j.contains("region")) {
      const auto& r = j.at("region");
      c.region = Region{r.at("lon_min").get<double>(), r.at("lon_max").get<double>(), r.at("lat_min").get<double>(),
                        r.at("lat_max").get<double>()};
    }
    if (j.contains("m0")) c.m0 = j.at("m0").get<double>();
    if (j.contains("t_start")) c.t_start = j.at("t_start").get<double>();
    if (j.contains("T")) c.T = j.at("T").get<double>();
    c.scale = j.value("scale", c.scale);
    if (j.contains("minor_catalog")) c.minor_catalog = j.at("minor_catalog").get<std::string>();
    c.major_threshold = j.value("major_threshold", c.major_threshold);
    c.variant = j.value("variant", c.variant);
    c.boundary = j.value("boundary", c.boundary);
    c.magnitude = j.value("magnitude", c.magnitude);
    c.optimizer = j.value("optimizer", c.optimizer);
    if (j.contains("fixed")) set_fixed(c, j.at("fixed").get<std::vector<std::string>>());
    if (j.contains("initial")) c.initial = j.at("initial");
    if (j.contains("bandwidth")) {
      const auto& b = j.at("bandwidth");
      c.bandwidth.k = b.value("k", c.bandwidth.k);
      c.bandwidth.h_min = b.value("h_min", c.bandwidth.h_min);
      c.bandwidth.h_max = b.value("h_max", c.bandwidth.h_max);
    }
    c.grid_cell = j.value("grid_cell", c.grid_cell);
    c.bins = j.value("bins", c.bins);
    c.threshold = j.value("threshold", c.threshold);
    c.seed = j.value("seed", c.seed);
    c.out_dir = j.value("out_dir", c.out_dir.string());
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("config: ") + e.what());
  }
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DomainError("config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j, path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  std::vector<std::string> fixed;
  for (std::size_t k = 0; k < kParamCount; ++k)
    if (c.fixed[k]) fixed.emplace_back(kParamNames[k]);
  j = nlohmann::json{{"schema", kRunSchema},
                     {"catalog", c.resolve(c.catalog).string()},
                     {"scale", c.scale},
                     {"major_threshold", c.major_threshold},
                     {"variant", c.variant},
                     {"boundary", c.boundary},
                     {"magnitude", c.magnitude},
                     {"optimizer", c.optimizer},
                     {"fixed", fixed},
                     {"initial", c.initial},
                     {"bandwidth", {{"k", c.bandwidth.k}, {"h_min", c.bandwidth.h_min}, {"h_max", c.bandwidth.h_max}}},
                     {"grid_cell", c.grid_cell},
                     {"bins", c.bins},
                     {"threshold", c.threshold},
                     {"seed", c.seed},
                     {"out_dir", c.out_dir.string()}};
  if (c.region)
    j["region"] = {{"lon_min", c.region->lon_min},
                   {"lon_max", c.region->lon_max},
                   {"lat_min", c.region->lat_min},
                   {"lat_max", c.region->lat_max}};
  if (c.m0) j["m0"] = *c.m0;
  if (c.t_start) j["t_start"] = *c.t_start;
  if (c.T) j["T"] = *c.T;
  if (c.minor_catalog) j["minor_catalog"] = c.resolve(*c.minor_catalog).string();
}

Catalog prepare_catalog(const RunConfig& c) {
  const Catalog raw = read_catalog_file(c.resolve(c.catalog)).catalog;
  const double t_start = c.t_start.value_or(raw.t_start);
  const double T = c.T.value_or(raw.t_end() - t_start);
  Catalog cat = filter_catalog(raw, c.region.value_or(raw.region), c.m0.value_or(raw.m0), t_start, T);
  TimeScale scale = parse_scale_spec(c.scale);
  if (scale.kind == ScaleKind::Ideal) return cat;
  if (scale.kind == ScaleKind::ProportionalHazards) {
    const Catalog minor = read_catalog_file(c.resolve(*c.minor_catalog)).catalog;
    scale.usage = build_usage_series(minor, c.major_threshold);
  }
  return apply_scale(cat, scale);
}

EtasParams initial_params(const RunConfig& c, const Catalog& catalog) {
  EtasParams p = default_initial_params(catalog);
  for (const auto& [key, value] : c.initial.items()) p.set(param_from_name(key), value.get<double>());
  return p;
}

IsdmOptions isdm_options(const RunConfig& c) {
  IsdmOptions o;
  o.variant = c.variant == "ground" ? Variant::GroundTemporal : Variant::SpatioTemporal;
  o.boundary = c.boundary == "exact" ? SpatialBoundary::Exact : SpatialBoundary::Infinite;
  o.magnitude = c.magnitude == "gamma" ? MagnitudeKind::Gamma : MagnitudeKind::Exponential;
  o.optimizer = c.optimizer == "nm" ? OptimizerKind::NelderMead : OptimizerKind::Dfp;
  o.fixed = c.fixed;
  o.bandwidth = c.bandwidth;
  return o;
}

}  // namespace etas::cli
