#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "etas/catalog.hpp"
#include "etas/decluster.hpp"
#include "etas/diagnostics.hpp"
#include "etas/error.hpp"
#include "etas/parallel.hpp"
#include "etas/simulate.hpp"
#include "etas/timescale.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using namespace etas;
using etas::cli::RunConfig;

namespace {

enum Exit { kOk = 0, kUsage = 1, kIo = 2, kNoConvergence = 3 };

class IoError : public Error {
 public:
  using Error::Error;
};

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
}

struct RunFlags {
  std::string config;
  std::optional<std::string> scale, variant, mag, optimizer, boundary, out_dir, fit;
  std::optional<std::vector<std::string>> fix;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config, "run file (JSON)")->required();
  cmd->add_option("--out-dir", f.out_dir, "run directory");
}

RunConfig resolve_config(const RunFlags& f) {
  RunConfig c = cli::load_run_config(f.config);
  if (f.scale) c.scale = *f.scale;
  if (f.variant) c.variant = *f.variant;
  if (f.mag) c.magnitude = *f.mag;
  if (f.optimizer) c.optimizer = *f.optimizer;
  if (f.boundary) c.boundary = *f.boundary;
  if (f.fix) cli::set_fixed(c, *f.fix);
  if (f.out_dir) c.out_dir = *f.out_dir;
  c.validate();
  return c;
}

FitResult load_fit(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open fit file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("fit file " + path.string() + ": " + e.what());
  }
  return fit_from_json(j);
}

int cmd_fetch(const std::string& region, const std::string& start, const std::string& end, double minmag,
              const fs::path& out_path, const fs::path& cache_dir, bool refresh) {
  ComcatQuery q;
  q.region = cli::parse_region(region);
  (void)parse_iso8601(start);
  (void)parse_iso8601(end);
  q.start = start;
  q.end = end;
  q.min_mag = minmag;
  FetchOptions o;
  o.cache_dir = cache_dir;
  o.refresh = refresh;
  const FetchResult r = fetch_comcat(q, o);
  if (!r.notice.empty()) std::cerr << "notice: " << r.notice << '\n';
  if (out_path.has_parent_path()) make_dir(out_path.parent_path());
  auto out = open_out(out_path);
  out << r.body;
  std::printf("fetched %s%s\n", out_path.string().c_str(), r.from_cache ? " (from cache)" : "");
  return kOk;
}

int cmd_fit(const RunFlags& flags) {
  const RunConfig c = resolve_config(flags);
  const Catalog cat = cli::prepare_catalog(c);
  const FitResult fit = isdm_fit(cat, cli::initial_params(c, cat), cli::isdm_options(c));
  make_dir(c.out_dir);
  write_json(c.out_dir / "config.json", c);
  write_json(c.out_dir / "fit.json", fit);
  {
    auto out = open_out(c.out_dir / "probs.csv");
    write_probs_csv(out, fit.probs);
  }
  {
    auto out = open_out(c.out_dir / "background.csv");
    write_grid_csv(out, background_grid(fit.bg, fit.params.mu, Grid::over(cat.region, c.grid_cell)), "mu_u");
  }
  {
    auto out = open_out(c.out_dir / "trace.csv");
    out << "# etas-trace v1\niteration,loglik\n";
    for (std::size_t k = 0; k < fit.loglik_trace.size(); ++k)
      out << k << ',' << nlohmann::json(fit.loglik_trace[k]).dump() << '\n';
  }
  std::printf("loglik=%.6f aic=%.6f branching_ratio=%.6f k=%d iterations=%d converged=%s\n", fit.loglik.total,
              fit.aic, fit.branching_ratio, fit.k, fit.iterations, fit.converged ? "true" : "false");
  for (const auto& w : fit.warnings) std::cerr << "warning: " << w << '\n';
  if (!fit.converged) {
    std::cerr << "error: fit did not converge; artifacts written with converged=false\n";
    return kNoConvergence;
  }
  return kOk;
}

int cmd_decluster(const RunFlags& flags, double threshold_flag) {
  RunConfig c = resolve_config(flags);
  if (threshold_flag > 0.0) c.threshold = threshold_flag;
  c.validate();
  const Catalog cat = cli::prepare_catalog(c);
  const FitResult fit = load_fit(flags.fit ? fs::path(*flags.fit) : c.out_dir / "fit.json");
  const BackgroundField* bg = fit.variant == Variant::SpatioTemporal ? &fit.bg : nullptr;
  const TriggerProbs probs = trigger_probs(cat, fit.params, bg, fit.variant);
  const auto labels = classify(probs, c.threshold);
  make_dir(c.out_dir);
  auto out = open_out(c.out_dir / "labels.csv");
  out << "# etas-labels v1 threshold=" << nlohmann::json(c.threshold).dump() << '\n';
  out << "idx,t,lon,lat,mag,bg_prob,label\n";
  std::size_t counts[3] = {0, 0, 0};
  for (std::size_t j = 0; j < cat.size(); ++j) {
    const Event& e = cat.events[j];
    out << j << ',' << nlohmann::json(e.t).dump() << ',' << nlohmann::json(e.lon).dump() << ','
        << nlohmann::json(e.lat).dump() << ',' << nlohmann::json(e.mag).dump() << ','
        << nlohmann::json(probs.bg[j]).dump() << ',' << label_name(labels[j]) << '\n';
    ++counts[static_cast<int>(labels[j])];
  }
  std::printf("background=%zu triggered=%zu uncertain=%zu threshold=%g\n", counts[0], counts[1], counts[2],
              c.threshold);
  return kOk;
}

int cmd_diagnose(const RunFlags& flags) {
  const RunConfig c = resolve_config(flags);
  const Catalog cat = cli::prepare_catalog(c);
  const FitResult fit = load_fit(flags.fit ? fs::path(*flags.fit) : c.out_dir / "fit.json");
  const Diagnostics d =
      diagnose(cat, fit.params, fit.bg, fit.variant, fit.boundary, Grid::over(cat.region, c.grid_cell), c.bins,
               c.bandwidth);
  const fs::path dir = c.out_dir / "diagnostics";
  make_dir(dir);
  write_diagnostics(dir, d);
  if (d.ks.p)
    std::printf("ks_stat=%.6f ks_p=%.6f tau_slope=%.6f\n", d.ks.stat, *d.ks.p, d.tau_slope);
  else
    std::printf("ks_stat=%.6f ks_p=NA tau_slope=%.6f\n", d.ks.stat, d.tau_slope);
  return kOk;
}

struct SimFlags {
  std::optional<std::string> params_file;
  std::optional<std::string> region;
  std::optional<std::string> background_fit;
  EtasParams params{0.3, 0.15, 1.2, 0.01, 1.3, 0.005, 1.0, 1.8};
  double beta{2.3};
  double T{3650.0};
  double burn_in{0.0};
  double m0{5.0};
  std::uint64_t seed{1};
  std::size_t max_events{1'000'000};
  std::string out_dir{"sim"};
};

int cmd_simulate(SimFlags& f, const CLI::App& app) {
  SimConfig cfg;
  if (f.params_file) {
    std::ifstream in(*f.params_file);
    if (!in) throw IoError("cannot open params file " + *f.params_file);
    nlohmann::json j;
    in >> j;
    const EtasParams from_file = j.get<EtasParams>();
    // Explicit flags win over the file.
    for (std::size_t k = 0; k < kParamCount; ++k) {
      const auto param = static_cast<Param>(k);
      if (app.count("--" + std::string(kParamNames[k])) == 0) f.params.set(param, from_file.get(param));
    }
  }
  cfg.params = f.params;
  cfg.magnitude = ExponentialMagnitude{f.beta};
  if (f.region) cfg.region = cli::parse_region(*f.region);
  cfg.T = f.T;
  cfg.burn_in = f.burn_in;
  cfg.m0 = f.m0;
  cfg.seed = f.seed;
  cfg.max_events = f.max_events;
  if (f.background_fit) {
    const FitResult fit = load_fit(*f.background_fit);
    cfg.background = fit.bg;
  }
  const SimCatalog sim = simulate(cfg);
  const fs::path dir = f.out_dir;
  make_dir(dir);
  write_catalog_file(dir / "catalog.csv", sim.catalog);
  {
    auto out = open_out(dir / "genealogy.csv");
    write_genealogy_csv(out, sim);
  }
  nlohmann::json summary{{"schema", "etas-sim/1"},
                         {"seed", cfg.seed},
                         {"params", cfg.params},
                         {"magnitude", cfg.magnitude},
                         {"T", cfg.T},
                         {"burn_in", cfg.burn_in},
                         {"m0", cfg.m0},
                         {"events", sim.catalog.size()},
                         {"out_of_region", sim.out_of_region},
                         {"overflow", sim.overflow}};
  write_json(dir / "sim.json", summary);
  std::printf("events=%zu out_of_region=%zu overflow=%s\n", sim.catalog.size(), sim.out_of_region,
              sim.overflow ? "true" : "false");
  return sim.overflow ? kNoConvergence : kOk;
}

int cmd_scale(const std::string& catalog_path, const std::string& spec, const std::optional<std::string>& minor,
              double major_threshold, const std::string& out_path, const std::optional<std::string>& usage_out) {
  const Catalog cat = read_catalog_file(catalog_path).catalog;
  TimeScale scale = parse_scale_spec(spec);
  if (scale.kind == ScaleKind::ProportionalHazards) {
    if (!minor) throw DomainError("--scale ph needs --minor-catalog");
    scale.usage = build_usage_series(read_catalog_file(*minor).catalog, major_threshold);
    if (usage_out) {
      auto out = open_out(*usage_out);
      write_usage_series(out, *scale.usage);
    }
  }
  const Catalog scaled = apply_scale(cat, scale);
  write_catalog_file(out_path, scaled);
  std::printf("scaled %zu events onto axis %s\n", scaled.size(), scaled.axis.c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Time-scaled ETAS modelling of earthquake catalogs"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker thread cap (0 = hardware)");

  auto* fetch = app.add_subcommand("fetch", "download a catalog from the ComCat search service");
  std::string region = "79,88,27,30", start, end, cache_dir = ".etas-cache", fetch_out;
  double minmag = 5.0;
  bool refresh = false;
  fetch->add_option("--region", region, "lon_min,lon_max,lat_min,lat_max");
  fetch->add_option("--start", start, "YYYY-MM-DD")->required();
  fetch->add_option("--end", end, "YYYY-MM-DD")->required();
  fetch->add_option("--minmag", minmag);
  fetch->add_option("--out", fetch_out)->required();
  fetch->add_option("--cache-dir", cache_dir);
  fetch->add_flag("--refresh", refresh, "ignore a cached response");

  RunFlags fit_flags;
  auto* fit = app.add_subcommand("fit", "ISDM fit and run artifacts");
  add_run_flags(fit, fit_flags);
  fit->add_option("--scale", fit_flags.scale, "ideal|calib:W|ph|log|power:W");
  fit->add_option("--variant", fit_flags.variant, "isdm|ground");
  fit->add_option("--mag", fit_flags.mag, "exp|gamma");
  fit->add_option("--optimizer", fit_flags.optimizer, "dfp|nm");
  fit->add_option("--boundary", fit_flags.boundary, "infinite|exact");
  fit->add_option("--fix", fit_flags.fix, "parameters held at their initial values")->delimiter(',');

  RunFlags dec_flags;
  double threshold = 0.0;
  auto* dec = app.add_subcommand("decluster", "label events from a fitted model");
  add_run_flags(dec, dec_flags);
  dec->add_option("--fit", dec_flags.fit, "fit.json (default: <out-dir>/fit.json)");
  dec->add_option("--threshold", threshold, "probability threshold (default 0.95)");

  RunFlags diag_flags;
  auto* diag = app.add_subcommand("diagnose", "time-rescaling and residual diagnostics");
  add_run_flags(diag, diag_flags);
  diag->add_option("--fit", diag_flags.fit, "fit.json (default: <out-dir>/fit.json)");

  SimFlags sim_flags;
  auto* sim = app.add_subcommand("simulate", "simulate an ETAS catalog with genealogy");
  sim->add_option("--params", sim_flags.params_file, "EtasParams JSON");
  sim->add_option("--mu", sim_flags.params.mu);
  sim->add_option("--A", sim_flags.params.A);
  sim->add_option("--alpha", sim_flags.params.alpha);
  sim->add_option("--c", sim_flags.params.c);
  sim->add_option("--p", sim_flags.params.p);
  sim->add_option("--D", sim_flags.params.D);
  sim->add_option("--gamma", sim_flags.params.gamma);
  sim->add_option("--q", sim_flags.params.q);
  sim->add_option("--beta", sim_flags.beta);
  sim->add_option("--region", sim_flags.region, "lon_min,lon_max,lat_min,lat_max");
  sim->add_option("--background-fit", sim_flags.background_fit, "use the background field of a fit.json");
  sim->add_option("--T", sim_flags.T);
  sim->add_option("--burn-in", sim_flags.burn_in);
  sim->add_option("--m0", sim_flags.m0);
  sim->add_option("--seed", sim_flags.seed);
  sim->add_option("--max-events", sim_flags.max_events);
  sim->add_option("--out-dir", sim_flags.out_dir);

  std::string scale_catalog, scale_spec, scale_out;
  std::optional<std::string> minor, usage_out;
  double major_threshold = 5.0;
  auto* sc = app.add_subcommand("scale", "rewrite a catalog onto a transformed time axis");
  sc->add_option("--catalog", scale_catalog)->required();
  sc->add_option("--scale", scale_spec, "ideal|calib:W|ph|log|power:W")->required();
  sc->add_option("--minor-catalog", minor, "catalog of minor events for the usage series");
  sc->add_option("--major-threshold", major_threshold);
  sc->add_option("--usage-out", usage_out, "write the usage series CSV");
  sc->add_option("--out", scale_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    (void)app.exit(e);
    return kUsage;
  }

  try {
    set_thread_count(threads);
    if (*fetch) return cmd_fetch(region, start, end, minmag, fetch_out, cache_dir, refresh);
    if (*fit) return cmd_fit(fit_flags);
    if (*dec) return cmd_decluster(dec_flags, threshold);
    if (*diag) return cmd_diagnose(diag_flags);
    if (*sim) return cmd_simulate(sim_flags, *sim);
    if (*sc) return cmd_scale(scale_catalog, scale_spec, minor, major_threshold, scale_out, usage_out);
  } catch (const TransportError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNoConvergence;
  } catch (const DomainError& e) {
    std::cerr << "error: " << e.what() << '\n' << app.help() << '\n';
    return kUsage;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  }
  return kUsage;
}
