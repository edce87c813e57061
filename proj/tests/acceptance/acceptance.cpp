// Acceptance suite: one PASS/FAIL/SKIP line per criterion.
// Usage: etas_acceptance [criterion numbers...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "etas/catalog.hpp"
#include "etas/decluster.hpp"
#include "etas/diagnostics.hpp"
#include "etas/intensity.hpp"
#include "etas/likelihood.hpp"
#include "etas/model.hpp"
#include "etas/optimize.hpp"
#include "etas/simulate.hpp"
#include "etas/timescale.hpp"
#include "support.hpp"

using namespace etas;
using etas::testing::integrate;
using etas::testing::reference_config;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status{Status::Fail};
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Integral over [0, inf) of a density in lag, via lag = scale (e^s - 1).
double integrate_heavy_tail(const std::function<double(double)>& pdf, double scale, double upper_s,
                            double tail, int panels) {
  auto in_s = [&](double s) { return pdf(scale * std::expm1(s)) * scale * std::exp(s); };
  return integrate(in_s, 0.0, upper_s, panels) + tail;
}

// 1. Kernel normalisation and closed-form cdfs.
Outcome kernel_normalisation() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_t = 0.0, worst_s = 0.0, worst_m = 0.0, worst_cdf = 0.0;
  for (double c : {0.001, 0.01, 0.5}) {
    for (double pp : {1.05, 1.3, 2.0}) {
      EtasParams p;
      p.c = c;
      p.p = pp;
      const double upper = 300.0;
      const double tail = 1.0 - temporal_kernel_cdf(p, c * std::expm1(upper));
      const double total = integrate_heavy_tail([&](double lag) { return temporal_kernel(p, lag); }, c, upper, tail, 6000);
      worst_t = std::max(worst_t, std::abs(total - 1.0));
      for (double lag : {1e-3, 0.1, 1.0, 100.0, 3650.0}) {
        const double numeric = integrate_heavy_tail([&](double x) { return temporal_kernel(p, x); }, c,
                                                    std::log1p(lag / c), 0.0, 2000);
        worst_cdf = std::max(worst_cdf, std::abs(numeric / temporal_kernel_cdf(p, lag) - 1.0));
      }
    }
  }
  for (double q : {1.3, 1.8, 2.5}) {
    for (double m : {5.0, 7.0}) {
      EtasParams p;
      p.D = 0.005;
      p.gamma = 1.0;
      p.q = q;
      const double s = sigma(p, m, 5.0);
      // Radial density 2 pi r f(r) in r = sqrt(s) (e^u - 1).
      auto radial = [&](double r) { return 2.0 * std::numbers::pi * r * spatial_kernel(p, r, 0.0, m, 5.0); };
      const double upper = 300.0;
      const double tail = 1.0 - spatial_kernel_disk_mass(p, std::sqrt(s) * std::expm1(upper), m, 5.0);
      const double total = integrate_heavy_tail(radial, std::sqrt(s), upper, tail, 6000);
      worst_s = std::max(worst_s, std::abs(total - 1.0));
      for (double r : {0.01, 0.1, 1.0, 5.0}) {
        const double numeric = integrate_heavy_tail(radial, std::sqrt(s), std::log1p(r / std::sqrt(s)), 0.0, 2000);
        worst_cdf = std::max(worst_cdf, std::abs(numeric / spatial_kernel_disk_mass(p, r, m, 5.0) - 1.0));
      }
    }
  }
  for (const MagnitudeModel& model :
       {MagnitudeModel{ExponentialMagnitude{2.3}}, MagnitudeModel{ExponentialMagnitude{0.8}},
        MagnitudeModel{GammaMagnitude{2.4, 3.7}}, MagnitudeModel{GammaMagnitude{1.5, 1.0}}}) {
    const double total = integrate([&](double x) { return magnitude_pdf(model, 5.0 + x, 5.0); }, 0.0, 80.0, 8000);
    worst_m = std::max(worst_m, std::abs(total - 1.0));
  }
  const double secs = seconds_since(t0);
  const bool ok = worst_t < 1e-6 && worst_s < 1e-4 && worst_m < 1e-6 && worst_cdf < 1e-6 && secs < 10.0;
  return {ok ? Status::Pass : Status::Fail,
          "temporal " + fmt("%.1e", worst_t) + " (tol 1e-6), spatial " + fmt("%.1e", worst_s) +
              " (tol 1e-4), magnitude " + fmt("%.1e", worst_m) + " (tol 1e-6), cdf rel " + fmt("%.1e", worst_cdf) +
              " (tol 1e-6), " + fmt("%.2f", secs) + " s (limit 10 s)"};
}

// 2. Closed-form beta against a numeric argmax of the magnitude log-likelihood.
Outcome beta_mle() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double beta_true = std::uniform_real_distribution<double>(0.8, 3.5)(rng);
    const int n = std::uniform_int_distribution<int>(20, 2000)(rng);
    std::exponential_distribution<double> draw(beta_true);
    Catalog c;
    c.m0 = 4.5;
    c.T = 1.0;
    for (int i = 0; i < n; ++i) c.events.push_back({i * 1e-3, 0.0, 0.0, 0.0, 4.5 + draw(rng), true});
    const double closed = magnitude_mle_exponential(c);
    auto negative = [&](double beta) { return -magnitude_loglik(c, ExponentialMagnitude{beta}); };
    const double argmax = boost::math::tools::brent_find_minima(negative, 0.01, 50.0, 52).first;
    worst = std::max(worst, std::abs(argmax - closed));
  }
  return {worst < 1e-6 ? Status::Pass : Status::Fail,
          "max |numeric - closed form| " + fmt("%.2e", worst) + " over 20 catalogs (tol 1e-6)"};
}

// 3. Branching ratio against Monte Carlo expectation of kappa.
Outcome branching_ratio_mc() {
  // Estimates reported for the Nepal exponential fit: A, alpha, beta.
  EtasParams p;
  p.A = 0.2102;
  p.alpha = 1.5979;
  const std::vector<MagnitudeModel> models{ExponentialMagnitude{3.5912}, GammaMagnitude{2.0, 4.5}};
  std::mt19937_64 rng(77);
  double worst = 0.0;
  std::string detail;
  for (const auto& model : models) {
    double sum = 0.0;
    const int n = 1'000'000;
    if (const auto* e = std::get_if<ExponentialMagnitude>(&model)) {
      std::exponential_distribution<double> draw(e->beta);
      for (int i = 0; i < n; ++i) sum += kappa(p, 5.0 + draw(rng), 5.0);
    } else {
      const auto& g = std::get<GammaMagnitude>(model);
      std::gamma_distribution<double> draw(g.shape, 1.0 / g.rate);
      for (int i = 0; i < n; ++i) sum += kappa(p, 5.0 + draw(rng), 5.0);
    }
    const double closed = branching_ratio(p, model);
    const double rel = std::abs(sum / n / closed - 1.0);
    worst = std::max(worst, rel);
    detail += (detail.empty() ? "" : ", ") + std::string(std::holds_alternative<ExponentialMagnitude>(model) ? "exp " : "gamma ") +
              fmt("%.4f", closed) + " rel " + fmt("%.2e", rel);
  }
  return {worst < 0.01 ? Status::Pass : Status::Fail, detail + " (tol 1%, 1e6 draws)"};
}

// 4. Declustering identity on a 1000-event simulated catalog.
Outcome decluster_identity() {
  auto cfg = reference_config(404, 3000.0);
  Catalog c = simulate(cfg).catalog;
  if (c.size() < 1000) return {Status::Fail, "simulation produced only " + std::to_string(c.size()) + " events"};
  c.events.resize(1000);
  c.T = c.events.back().t + 1e-9;
  const auto uniform = BackgroundField::uniform(c.region);
  const std::vector<double> half(c.size(), 0.5);
  const auto smooth = smooth_background(c, half);
  EtasParams smooth_params = cfg.params;
  smooth_params.mu = 1.0;
  double worst = 0.0, truncated = 0.0;
  struct Run {
    const EtasParams* p;
    const BackgroundField* bg;
    Variant v;
  };
  for (const Run& r : {Run{&cfg.params, &uniform, Variant::SpatioTemporal}, Run{&smooth_params, &smooth, Variant::SpatioTemporal},
                       Run{&cfg.params, nullptr, Variant::GroundTemporal}}) {
    const auto t = trigger_probs(c, *r.p, r.bg, r.v);
    for (std::size_t j = 0; j < t.size(); ++j) {
      // Every p_ij of the row: the stored entries plus the mass below the storage threshold.
      double row = t.bg[j] + t.truncated[j];
      for (const auto& e : t.rows[j]) {
        if (!(e.p >= 0.0 && e.p <= 1.0) || !(c.events[e.i].t < c.events[j].t))
          return {Status::Fail, "invalid entry in row " + std::to_string(j)};
        row += e.p;
      }
      worst = std::max(worst, std::abs(row - 1.0));
    }
    truncated = std::max(truncated, t.max_truncated());
  }
  const bool ok = worst < 1e-10 && truncated < 1e-6;
  return {ok ? Status::Pass : Status::Fail,
          "max |bg_j + sum_i p_ij - 1| " + fmt("%.2e", worst) + " (tol 1e-10) over 3 models, 1000 events; max truncated row mass " +
              fmt("%.1e", truncated) + " (limit 1e-6)"};
}

// 5. Simulate-then-fit recovery.
Outcome simulate_then_fit() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto truth = reference_config(0);
  const std::vector<std::string> names{"bg_rate", "A", "alpha", "c", "p", "D", "gamma", "q", "beta"};
  const std::vector<double> target{truth.params.mu, truth.params.A, truth.params.alpha, truth.params.c, truth.params.p,
                                   truth.params.D, truth.params.gamma, truth.params.q, 2.3};
  const int runs = 20;
  std::vector<std::vector<double>> est(runs);
  IsdmOptions options;
  options.compute_stderr = false;
  // A 5 x 5 degree region loses a visible share of offspring across the edges.
  options.boundary = SpatialBoundary::Exact;
  for (int r = 0; r < runs; ++r) {
    const Catalog c = simulate(reference_config(1000 + static_cast<std::uint64_t>(r))).catalog;
    const FitResult fit = isdm_fit(c, default_initial_params(c), options);
    const auto& v = fit.params;
    est[static_cast<std::size_t>(r)] = {fit.background_rate(), v.A, v.alpha, v.c, v.p, v.D, v.gamma, v.q,
                                        std::get<ExponentialMagnitude>(fit.magnitude).beta};
  }
  // Bootstrap standard error: spread of the estimates across replicate catalogs.
  std::vector<double> se(names.size());
  for (std::size_t k = 0; k < names.size(); ++k) {
    double m = 0.0, s = 0.0;
    for (const auto& e : est) m += e[k] / runs;
    for (const auto& e : est) s += (e[k] - m) * (e[k] - m);
    se[k] = std::sqrt(s / (runs - 1));
  }
  int inside = 0;
  std::vector<int> misses(names.size(), 0);
  for (const auto& e : est) {
    bool all = true;
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (std::abs(e[k] - target[k]) > 3.0 * se[k]) {
        all = false;
        ++misses[k];
      }
    }
    inside += all ? 1 : 0;
  }
  const double secs = seconds_since(t0);
  std::string miss;
  for (std::size_t k = 0; k < names.size(); ++k)
    if (misses[k]) miss += " " + names[k] + "x" + std::to_string(misses[k]);
  const bool ok = inside >= 16 && secs < 600.0;
  return {ok ? Status::Pass : Status::Fail,
          std::to_string(inside) + "/20 runs within 3 bootstrap SE on all 9 parameters (need 16)" +
              (miss.empty() ? "" : "; misses:" + miss) + "; " + fmt("%.0f", secs) + " s (target 600 s)"};
}

// 6. DFP and Nelder-Mead agree on the ETAS argmin.
Outcome optimizer_cross_check() {
  auto cfg = reference_config(606, 3650.0);
  Catalog c = simulate(cfg).catalog;
  c.events.resize(std::min<std::size_t>(c.size(), 200));
  c.T = c.events.back().t + 1e-9;
  const auto bg = BackgroundField::uniform(c.region);
  const EtasLikelihood lik(c, Variant::SpatioTemporal, &bg);
  const Objective f = [&](const Vector& z) {
    try {
      const double v = lik.negative(untransform_params(z));
      return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    } catch (const DomainError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const ValueAndGradient fg = [&](const Vector& z, Vector& g) {
    ParamGradient grad{};
    try {
      const double v = lik.negative(untransform_params(z), grad);
      g.resize(z.size());
      for (std::size_t k = 0; k < kParamCount; ++k) g[k] = grad[k] * untransform_derivative(static_cast<Param>(k), z[k]);
      return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
    } catch (const DomainError&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const Vector z0 = transform_params(default_initial_params(c));
  OptimOptions o;
  o.max_iter = 20000;
  o.f_tol = 1e-14;
  o.nm_restarts = 20;
  const auto d = dfp(fg, z0, o);
  const auto n = nelder_mead(f, z0, o);
  double worst = 0.0;
  for (std::size_t k = 0; k < kParamCount; ++k) worst = std::max(worst, std::abs(d.x_min[k] - n.x_min[k]));
  const bool ok = worst < 1e-2 && d.f_min <= n.f_min + 1e-6;
  return {ok ? Status::Pass : Status::Fail,
          "max |z_dfp - z_nm| " + fmt("%.2e", worst) + " (tol 1e-2); f_dfp - f_nm " + fmt("%.2e", d.f_min - n.f_min) +
              " (limit 1e-6); " + std::to_string(c.size()) + " events"};
}

// 7. Calibration-scale equivariance.
Outcome calibration_equivariance() {
  const Catalog c = simulate(reference_config(707)).catalog;
  IsdmOptions options;
  options.variant = Variant::GroundTemporal;
  options.compute_stderr = false;
  options.optim.g_tol = 1e-8;
  auto fit_at = [&](double w) {
    const Catalog s = apply_scale(c, TimeScale::calibration(w));
    EtasParams init = default_initial_params(c);
    init.mu *= w;
    init.c /= w;
    return isdm_fit(s, init, options);
  };
  const FitResult base = fit_at(1.0);
  const double n = static_cast<double>(c.target_count());
  double worst_param = 0.0, worst_shift = 0.0;
  for (double w : {5.0, 1000.0}) {
    const FitResult f = fit_at(w);
    const double mapped[] = {base.params.mu * w, base.params.A, base.params.alpha, base.params.c / w, base.params.p};
    const double got[] = {f.params.mu, f.params.A, f.params.alpha, f.params.c, f.params.p};
    for (int k = 0; k < 5; ++k) worst_param = std::max(worst_param, std::abs(got[k] / mapped[k] - 1.0));
    worst_shift = std::max(worst_shift, std::abs((f.loglik.total - base.loglik.total) - n * std::log(w)));
  }
  const std::vector<double> grid{1.0, 5.0, 1000.0};
  const auto search = grid_search_omega(grid, c.target_count(), [&](double w) { return fit_at(w).loglik.total; });
  double lo = INFINITY, hi = -INFINITY;
  for (const auto& s : search.scores) {
    lo = std::min(lo, s.adjusted);
    hi = std::max(hi, s.adjusted);
  }
  const bool ok = worst_param < 0.02 && worst_shift < 0.1 && hi - lo < 0.1;
  return {ok ? Status::Pass : Status::Fail,
          "max rel param deviation " + fmt("%.2e", worst_param) + " (tol 2%), loglik shift error " + fmt("%.2e", worst_shift) +
              " (tol 0.1), adjusted score spread " + fmt("%.2e", hi - lo) + " over omega {1,5,1000} (tol 0.1)"};
}

// 8. Time-rescaling KS test with the true parameters, plus the AIC pairing.
Outcome time_rescaling() {
  int passed = 0;
  const int runs = 50;
  for (int r = 0; r < runs; ++r) {
    const auto cfg = reference_config(800 + static_cast<std::uint64_t>(r));
    const Catalog c = simulate(cfg).catalog;
    const auto bg = BackgroundField::uniform(c.region);
    const EtasLikelihood lik(c, Variant::SpatioTemporal, &bg, SpatialBoundary::Exact);
    const auto ks = ks_uniform_test(uniform_residuals(transformed_times(lik, cfg.params)));
    if (ks.p && *ks.p > 0.05) ++passed;
  }
  const double a = aic(-497.874, 8);
  const bool aic_ok = std::abs(a - 1011.748) < 1e-9 && std::abs(a - 1011.749) < 1.5e-3;
  const bool ok = passed >= 45 && aic_ok;
  return {ok ? Status::Pass : Status::Fail,
          std::to_string(passed) + "/50 runs with KS p > 0.05 (need 45); AIC(-497.874, k=8) = " + fmt("%.3f", a) +
              " vs reported 1011.749"};
}

// 9. Nepal catalog anchor (network).
Outcome nepal_anchor() {
  if (!std::getenv("ETAS_NETWORK")) return {Status::Skip, "set ETAS_NETWORK=1 to fetch the ComCat catalog"};
  try {
    const ComcatQuery q{kNepalRegion, "1990-01-11", "2022-05-20", 5.0};
    FetchOptions fo;
    if (const char* dir = std::getenv("ETAS_CACHE_DIR")) fo.cache_dir = dir;
    const auto fetched = fetch_comcat(q, fo);
    std::istringstream in(fetched.body);
    const Catalog raw = parse_catalog(in).catalog;
    const double T = (parse_iso8601(q.end) - raw.origin_epoch) / 86400.0;
    Catalog c = filter_catalog(raw, kNepalRegion, 5.0, 0.0, T);
    const FitResult fit = isdm_fit(c, default_initial_params(c));
    const Grid grid = Grid::over(kNepalRegion, 0.05);
    const auto lambda = total_spatial_intensity(c, fit.params, fit.bg, grid);
    const auto omega = clustering_coefficient(fit.bg, fit.params.mu, lambda);
    const auto background = background_grid(fit.bg, fit.params.mu, grid);
    const double lon_omega = grid.lon(omega.argmax() % grid.nx);
    const double lon_bg = grid.lon(background.argmax() % grid.nx);
    const double third = kNepalRegion.width() / 3.0;
    const bool central = lon_omega >= kNepalRegion.lon_min + third && lon_omega <= kNepalRegion.lon_max - third;
    const bool western = lon_bg <= kNepalRegion.lon_min + third;
    const bool ok = is_subcritical(fit.branching_ratio) && central && western;
    return {ok ? Status::Pass : Status::Fail,
            std::to_string(c.target_count()) + " events; branching ratio " + fmt("%.3f", fit.branching_ratio) +
                "; clustering max at lon " + fmt("%.2f", lon_omega) + " (central third wanted); background max at lon " +
                fmt("%.2f", lon_bg) + " (western third wanted)"};
  } catch (const std::exception& e) {
    return {Status::Fail, std::string("error: ") + e.what()};
  }
}

// 10. Determinism of the simulate -> fit -> decluster -> diagnose pipeline.
Outcome determinism() {
  auto run = [] {
    const auto sim = simulate(reference_config(1010, 1500.0));
    std::ostringstream cat;
    write_catalog(cat, sim.catalog);
    std::istringstream in(cat.str());
    const Catalog c = parse_catalog(in).catalog;
    const FitResult fit = isdm_fit(c, default_initial_params(c));
    std::ostringstream probs;
    write_probs_csv(probs, fit.probs);
    const auto d = diagnose(c, fit.params, fit.bg, fit.variant, fit.boundary, Grid::over(c.region, 0.1));
    return cat.str() + nlohmann::json(fit).dump() + probs.str() + nlohmann::json(d).dump();
  };
  const std::string a = run();
  const std::string b = run();
  return {a == b ? Status::Pass : Status::Fail,
          "two runs " + std::string(a == b ? "byte-identical" : "differ") + " (" + std::to_string(a.size()) + " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const std::vector<Criterion> all{{1, "kernel normalisation", kernel_normalisation},
                                   {2, "closed-form beta MLE", beta_mle},
                                   {3, "branching ratio vs Monte Carlo", branching_ratio_mc},
                                   {4, "declustering identity", decluster_identity},
                                   {5, "simulate-then-fit recovery", simulate_then_fit},
                                   {6, "DFP / Nelder-Mead cross-check", optimizer_cross_check},
                                   {7, "calibration equivariance", calibration_equivariance},
                                   {8, "time-rescaling KS and AIC", time_rescaling},
                                   {9, "Nepal qualitative anchor", nepal_anchor},
                                   {10, "determinism", determinism}};
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Skip ? "SKIP" : "FAIL";
    std::printf("%s %2d %s: %s\n", tag, c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
    if (o.status == Status::Fail) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
