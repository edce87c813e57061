#include "etas/decluster.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

#include "etas/error.hpp"
#include "etas/parallel.hpp"
#include "etas/simulate.hpp"
#include "kernels.hpp"
#include "text.hpp"

namespace etas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string_view variant_name(Variant v) { return v == Variant::SpatioTemporal ? "spatio-temporal" : "ground"; }
std::string_view boundary_name(SpatialBoundary b) { return b == SpatialBoundary::Exact ? "exact" : "infinite"; }

// Branching ratio divided by A, as a function of alpha.
double ratio_per_A(const MagnitudeModel& model, double alpha) {
  EtasParams unit;
  unit.A = 1.0;
  unit.alpha = alpha;
  return branching_ratio(unit, model);
}

double fit_branching_ratio(const EtasParams& p, const MagnitudeModel& model) {
  return p.A * ratio_per_A(model, p.alpha);
}

// Largest alpha for which the ratio per unit A stays finite, scaled by 0.9.
double alpha_cap(const MagnitudeModel& model) {
  if (const auto* e = std::get_if<ExponentialMagnitude>(&model)) return 0.9 * e->beta;
  return 0.9 * std::get<GammaMagnitude>(model).rate;
}

StdErrors finish_stderr(Eigen::MatrixXd H, const Vector& jacobian) {
  StdErrors out;
  H = 0.5 * (H + H.transpose());
  if (!H.allFinite()) {
    out.reason = "Hessian has non-finite entries";
    return out;
  }
  const Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) {
    out.reason = "observed information is not positive definite";
    return out;
  }
  const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(H.rows(), H.cols()));
  out.se.resize(jacobian.size());
  for (std::size_t k = 0; k < jacobian.size(); ++k) {
    const double v = cov(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    out.se[k] = std::sqrt(std::max(v, 0.0)) * std::abs(jacobian[k]);
  }
  out.ok = true;
  return out;
}

}  // namespace

double TriggerProbs::max_truncated() const {
  double m = 0.0;
  for (double t : truncated) m = std::max(m, t);
  return m;
}

TriggerProbs trigger_probs(const Catalog& catalog, const EtasParams& params, const BackgroundField* bg,
                           Variant variant, double truncate) {
  params.validate();
  const bool spatial = variant == Variant::SpatioTemporal;
  if (spatial && bg == nullptr) throw DomainError("trigger_probs needs a background field");
  const auto src = kernels::sources(catalog, params);
  const std::size_t n = src.size();
  TriggerProbs out;
  out.rows.resize(n);
  out.p.assign(n, 0.0);
  out.bg.assign(n, 0.0);
  out.truncated.assign(n, 0.0);
  std::vector<char> zero(n, 0);
  parallel_for(n, [&](std::size_t j) {
    const auto& e = catalog.events[j];
    const double u = spatial ? bg->value(e.lon, e.lat) : 1.0;
    std::vector<double> terms;
    terms.reserve(j);
    double S = 0.0;
    for (std::size_t i = 0; i < j && src[i].t < e.t; ++i) {
      const double term = params.A * kernels::pair_term(params, src[i], e.t, e.lon, e.lat, spatial);
      terms.push_back(term);
      S += term;
    }
    const double lambda = params.mu * u + S;
    if (!(lambda > 0.0)) {
      zero[j] = 1;
      return;
    }
    out.bg[j] = params.mu * u / lambda;
    double kept = 0.0, dropped = 0.0;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      const double pij = terms[i] / lambda;
      if (pij < truncate) {
        dropped += pij;
      } else {
        out.rows[j].push_back({i, pij});
        kept += pij;
      }
    }
    out.p[j] = kept;
    out.truncated[j] = dropped;
  });
  for (std::size_t j = 0; j < n; ++j)
    if (zero[j])
      throw NumericalError("conditional intensity is zero at event " + std::to_string(j) + " (t=" +
                           text::fmt17(catalog.events[j].t) + "); trigger probabilities undefined");
  return out;
}

void write_probs_csv(std::ostream& out, const TriggerProbs& probs) {
  out << "# etas-probs v1 (i = -1 is the background probability)\n";
  out << "j,i,p\n";
  for (std::size_t j = 0; j < probs.size(); ++j) {
    out << j << ",-1," << text::fmt17(probs.bg[j]) << '\n';
    for (const auto& e : probs.rows[j]) out << j << ',' << e.i << ',' << text::fmt17(e.p) << '\n';
  }
}

std::string_view label_name(Label label) {
  switch (label) {
    case Label::Background:
      return "background";
    case Label::Triggered:
      return "triggered";
    case Label::Uncertain:
      return "uncertain";
  }
  return "uncertain";
}

std::vector<Label> classify(const TriggerProbs& probs, double threshold) {
  if (!(threshold > 0.5 && threshold <= 1.0)) throw DomainError("classification threshold must lie in (0.5, 1]");
  std::vector<Label> out(probs.size(), Label::Uncertain);
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (probs.bg[j] > threshold || (threshold == 1.0 && probs.bg[j] == 1.0))
      out[j] = Label::Background;
    else if (probs.p[j] > threshold || (threshold == 1.0 && probs.p[j] == 1.0))
      out[j] = Label::Triggered;
  }
  return out;
}

std::vector<long> realize(const TriggerProbs& probs, std::uint64_t seed) {
  std::vector<long> parent(probs.size(), -1);
  std::mt19937_64 rng(split_seed(seed, 0));
  for (std::size_t j = 0; j < probs.size(); ++j) {
    // 53-bit uniform in [0, 1); the truncated mass falls to the background.
    double v = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    for (const auto& e : probs.rows[j]) {
      if (v < e.p) {
        parent[j] = static_cast<long>(e.i);
        break;
      }
      v -= e.p;
    }
  }
  return parent;
}

StdErrors stderr_from_hessian(const Objective& objective, const Vector& x_min, const Vector& jacobian,
                              double step) {
  if (x_min.size() != jacobian.size()) throw DomainError("stderr: jacobian size mismatch");
  if (x_min.empty()) return {true, "", {}};
  return finish_stderr(fd_hessian(objective, x_min, step), jacobian);
}

StdErrors stderr_from_gradient(const ValueAndGradient& fg, const Vector& x_min, const Vector& jacobian,
                               double step) {
  if (x_min.size() != jacobian.size()) throw DomainError("stderr: jacobian size mismatch");
  const std::size_t n = x_min.size();
  if (n == 0) return {true, "", {}};
  Eigen::MatrixXd H(n, n);
  Vector gp(n), gm(n);
  for (std::size_t b = 0; b < n; ++b) {
    const double h = step * (1.0 + std::abs(x_min[b]));
    Vector xp = x_min, xm = x_min;
    xp[b] += h;
    xm[b] -= h;
    const double fp = fg(xp, gp);
    const double fm = fg(xm, gm);
    if (!std::isfinite(fp) || !std::isfinite(fm)) return {false, "objective not finite near the minimum", {}};
    for (std::size_t a = 0; a < n; ++a)
      H(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = (gp[a] - gm[a]) / (2.0 * h);
  }
  return finish_stderr(H, jacobian);
}

EtasParams default_initial_params(const Catalog& catalog) {
  EtasParams p;
  const auto n = static_cast<double>(catalog.target_count());
  if (!(catalog.T > 0.0)) throw DomainError("catalog window length must be > 0");
  p.mu = std::max(n, 1.0) / catalog.T;
  return p;
}

FitResult isdm_fit(const Catalog& catalog, const EtasParams& init, const IsdmOptions& options) {
  options.optim.validate();
  init.validate();
  catalog.region.validate();
  if (catalog.target_count() < 10)
    throw DomainError("ISDM needs at least 10 target events (have " + std::to_string(catalog.target_count()) + ")");
  if (options.max_outer < 1) throw DomainError("max_outer must be >= 1");

  FitResult fit;
  fit.variant = options.variant;
  fit.boundary = options.variant == Variant::SpatioTemporal ? options.boundary : SpatialBoundary::Infinite;
  fit.axis = catalog.axis;
  fit.fixed = options.fixed;
  const bool spatial = options.variant == Variant::SpatioTemporal;
  if (!spatial) fit.fixed[5] = fit.fixed[6] = fit.fixed[7] = true;

  if (options.magnitude == MagnitudeKind::Exponential)
    fit.magnitude = ExponentialMagnitude{magnitude_mle_exponential(catalog)};
  else
    fit.magnitude = magnitude_mle_gamma(catalog);
  const double l1 = magnitude_loglik(catalog, fit.magnitude);

  std::vector<Param> free;
  for (std::size_t k = 0; k < kParamCount; ++k)
    if (!fit.fixed[k]) free.push_back(static_cast<Param>(k));

  EtasParams params = init;
  if (!spatial) {
    // The ground likelihood does not depend on the spatial kernel; report the
    // conventional hyperparameters and leave D at its starting value.
    params.gamma = 0.0;
    params.q = 1.5;
  }
  auto to_z = [&](const EtasParams& th) {
    Vector z;
    for (Param k : free) z.push_back(transform_value(k, th.get(k)));
    return z;
  };
  auto from_z = [&](const Vector& z) {
    EtasParams th = params;
    for (std::size_t a = 0; a < free.size(); ++a) th.set(free[a], untransform_value(free[a], z[a]));
    return th;
  };

  fit.bg = BackgroundField::uniform(catalog.region);

  auto optimise = [&](const EtasLikelihood& lik) {
    const ValueAndGradient fg = [&](const Vector& z, Vector& g) {
      try {
        const EtasParams th = from_z(z);
        ParamGradient grad{};
        const double v = lik.negative(th, grad);
        g.resize(z.size());
        for (std::size_t a = 0; a < free.size(); ++a)
          g[a] = grad[static_cast<std::size_t>(free[a])] * untransform_derivative(free[a], z[a]);
        return std::isnan(v) ? kInf : v;
      } catch (const DomainError&) {
        return kInf;
      }
    };
    const Objective f = [&](const Vector& z) {
      try {
        const double v = lik.negative(from_z(z));
        return std::isnan(v) ? kInf : v;
      } catch (const DomainError&) {
        return kInf;
      }
    };
    const Vector z0 = to_z(params);
    if (free.empty()) return;
    OptimResult r;
    if (options.optimizer == OptimizerKind::Dfp) {
      try {
        r = dfp(fg, z0, options.optim);
      } catch (const OptimStallError& e) {
        r.x_min = e.x();
        r.f_min = e.f();
        r.message = e.what();
      }
    } else {
      r = nelder_mead(f, z0, options.optim);
    }
    params = from_z(r.x_min);
    fit.last_optim = std::move(r);
  };

  auto project = [&] {
    const double ratio = fit_branching_ratio(params, fit.magnitude);
    if (is_subcritical(ratio)) return;
    const double cap = alpha_cap(fit.magnitude);
    if (params.alpha > cap) params.alpha = cap;
    params.A = 0.99 / ratio_per_A(fit.magnitude, params.alpha);
    fit.warnings.push_back("supercritical iterate (branching ratio " + text::fmt17(ratio) +
                           ") projected to 0.99");
  };

  // Warm start under the uniform background so the first declustering uses a fitted theta.
  std::vector<double> prev_bg;
  double prev_ll = -kInf;
  {
    const EtasLikelihood lik(catalog, options.variant, &fit.bg, fit.boundary);
    optimise(lik);
    project();
    prev_ll = l1 + lik.l2(params);
    fit.loglik_trace.push_back(prev_ll);
  }
  if (!spatial) {
    fit.iterations = 1;
    fit.converged = fit.last_optim.converged || free.empty();
  }

  for (int outer = 1; spatial && outer <= options.max_outer; ++outer) {
    fit.iterations = outer;
    const TriggerProbs probs = trigger_probs(catalog, params, &fit.bg, options.variant);
    double max_change = kInf;
    if (!prev_bg.empty()) {
      max_change = 0.0;
      for (std::size_t j = 0; j < probs.bg.size(); ++j)
        max_change = std::max(max_change, std::abs(probs.bg[j] - prev_bg[j]));
    }
    prev_bg = probs.bg;
    if (max_change < options.bg_tol) {
      fit.converged = true;
      break;
    }

    const EtasParams kept_params = params;
    BackgroundField kept_bg = fit.bg;
    const double old_mass = fit.bg.region_mass();
    fit.bg = smooth_background(catalog, probs.bg, options.bandwidth);
    // Keep the background rate mu * mass while the meaning of mu changes.
    params.mu *= old_mass / fit.bg.region_mass();

    const EtasLikelihood lik(catalog, options.variant, &fit.bg, fit.boundary);
    optimise(lik);
    project();
    const double ll = l1 + lik.l2(params);
    if (ll < prev_ll) {
      // No improvement: keep the previous iterate.
      params = kept_params;
      fit.bg = std::move(kept_bg);
      fit.converged = true;
      break;
    }
    fit.loglik_trace.push_back(ll);
    const bool small_gain = ll - prev_ll < options.ll_tol;
    prev_ll = ll;
    if (small_gain) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged)
    fit.warnings.push_back("ISDM did not converge within " + std::to_string(options.max_outer) + " outer iterations");

  fit.params = params;
  const EtasLikelihood lik(catalog, options.variant, &fit.bg, fit.boundary);
  fit.loglik.l1 = l1;
  fit.loglik.l2 = lik.l2(params);
  fit.loglik.total = fit.loglik.l1 + fit.loglik.l2;
  fit.loglik.n_target = catalog.target_count();
  fit.k = static_cast<int>(free.size() + parameter_count(fit.magnitude));
  fit.aic = aic(fit.loglik, fit.k);
  fit.branching_ratio = fit_branching_ratio(params, fit.magnitude);
  fit.probs = trigger_probs(catalog, params, &fit.bg, options.variant);

  if (options.compute_stderr) {
    const ValueAndGradient fg = [&](const Vector& z, Vector& g) {
      try {
        ParamGradient grad{};
        const double v = lik.negative(from_z(z), grad);
        g.resize(z.size());
        for (std::size_t a = 0; a < free.size(); ++a)
          g[a] = grad[static_cast<std::size_t>(free[a])] * untransform_derivative(free[a], z[a]);
        return v;
      } catch (const DomainError&) {
        return kInf;
      }
    };
    const Vector z = to_z(params);
    Vector jac(free.size());
    for (std::size_t a = 0; a < free.size(); ++a) jac[a] = untransform_derivative(free[a], z[a]);
    const StdErrors se = stderr_from_gradient(fg, z, jac);
    if (se.ok) {
      std::array<double, kParamCount> out{};
      for (std::size_t a = 0; a < free.size(); ++a) out[static_cast<std::size_t>(free[a])] = se.se[a];
      fit.stderr_params = out;
    } else {
      fit.stderr_reason = se.reason;
    }
    if (const auto* e = std::get_if<ExponentialMagnitude>(&fit.magnitude))
      fit.stderr_beta = e->beta / std::sqrt(static_cast<double>(fit.loglik.n_target));
  } else {
    fit.stderr_reason = "not computed";
  }

  fit.settings = {{"variant", variant_name(options.variant)},
                  {"boundary", boundary_name(fit.boundary)},
                  {"magnitude", options.magnitude == MagnitudeKind::Exponential ? "exp" : "gamma"},
                  {"optimizer", options.optimizer == OptimizerKind::Dfp ? "dfp" : "nm"},
                  {"max_outer", options.max_outer},
                  {"bg_tol", options.bg_tol},
                  {"ll_tol", options.ll_tol},
                  {"bandwidth", {{"k", options.bandwidth.k}, {"h_min", options.bandwidth.h_min},
                                 {"h_max", options.bandwidth.h_max}}},
                  {"optim", {{"max_iter", options.optim.max_iter}, {"f_tol", options.optim.f_tol},
                             {"x_tol", options.optim.x_tol}, {"g_tol", options.optim.g_tol}}},
                  {"init", init}};
  return fit;
}

void to_json(nlohmann::json& j, const FitResult& fit) {
  nlohmann::json fixed = nlohmann::json::array();
  for (std::size_t k = 0; k < kParamCount; ++k)
    if (fit.fixed[k]) fixed.push_back(kParamNames[k]);
  nlohmann::json se = nullptr;
  if (fit.stderr_params) {
    se = nlohmann::json::object();
    for (std::size_t k = 0; k < kParamCount; ++k)
      se[std::string(kParamNames[k])] = fit.fixed[k] ? nlohmann::json(nullptr) : nlohmann::json((*fit.stderr_params)[k]);
  }
  nlohmann::json beta = nullptr;
  if (const auto* e = std::get_if<ExponentialMagnitude>(&fit.magnitude)) beta = e->beta;
  const double ratio = fit.branching_ratio;
  j = nlohmann::json{{"schema", "etas-fit/1"},
                     {"variant", variant_name(fit.variant)},
                     {"boundary", boundary_name(fit.boundary)},
                     {"axis", fit.axis},
                     {"params", fit.params},
                     {"fixed", fixed},
                     {"magnitude", fit.magnitude},
                     {"beta", beta},
                     {"loglik", fit.loglik},
                     {"aic", fit.aic},
                     {"k", fit.k},
                     {"branching_ratio", std::isfinite(ratio) ? nlohmann::json(ratio) : nlohmann::json(nullptr)},
                     {"background_rate", fit.background_rate()},
                     {"iterations", fit.iterations},
                     {"converged", fit.converged},
                     {"stderr", se},
                     {"stderr_beta", fit.stderr_beta ? nlohmann::json(*fit.stderr_beta) : nlohmann::json(nullptr)},
                     {"stderr_reason", fit.stderr_reason},
                     {"loglik_trace", fit.loglik_trace},
                     {"warnings", fit.warnings},
                     {"settings", fit.settings},
                     {"background", fit.bg}};
}

FitResult fit_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != "etas-fit/1") throw FormatError("unsupported fit schema");
    FitResult fit;
    fit.params = j.at("params").get<EtasParams>();
    fit.magnitude = j.at("magnitude").get<MagnitudeModel>();
    fit.bg = j.at("background").get<BackgroundField>();
    fit.variant = j.at("variant").get<std::string>() == "ground" ? Variant::GroundTemporal : Variant::SpatioTemporal;
    fit.boundary = j.at("boundary").get<std::string>() == "exact" ? SpatialBoundary::Exact : SpatialBoundary::Infinite;
    fit.axis = j.at("axis").get<std::string>();
    fit.iterations = j.at("iterations").get<int>();
    fit.converged = j.at("converged").get<bool>();
    fit.k = j.at("k").get<int>();
    fit.aic = j.at("aic").get<double>();
    const auto& ll = j.at("loglik");
    fit.loglik = {ll.at("l1").get<double>(), ll.at("l2").get<double>(), ll.at("total").get<double>(),
                  ll.at("n_target").get<std::size_t>()};
    for (const auto& name : j.at("fixed")) fit.fixed[static_cast<std::size_t>(param_from_name(name.get<std::string>()))] = true;
    fit.branching_ratio = j.at("branching_ratio").is_null() ? kInf : j.at("branching_ratio").get<double>();
    return fit;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed fit JSON: ") + e.what());
  }
}

}  // namespace etas
