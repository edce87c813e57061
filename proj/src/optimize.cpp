#include "etas/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "etas/parallel.hpp"
#include "text.hpp"

namespace etas {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double sanitize(double f) { return std::isnan(f) ? kInf : f; }

double max_abs(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

Eigen::VectorXd to_eigen(const Vector& v) { return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())); }

Vector to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

void OptimOptions::validate() const {
  if (max_iter < 1) throw DomainError("max_iter must be >= 1");
  if (!(f_tol > 0.0) || !(x_tol > 0.0) || !(g_tol > 0.0) || !(fd_step > 0.0) || !(max_step > 0.0) ||
      !(nm_step > 0.0))
    throw DomainError("optimizer tolerances and steps must be > 0");
  if (nm_restarts < 0) throw DomainError("nm_restarts must be >= 0");
}

OptimResult nelder_mead(const Objective& f, Vector x0, const OptimOptions& opts) {
  opts.validate();
  const std::size_t n = x0.size();
  const double f0 = f(x0);
  if (std::isnan(f0)) throw NumericalError("Nelder-Mead: objective is NaN at the starting point");

  OptimResult res;
  std::vector<Vector> pts(n + 1, x0);
  std::vector<double> fv(n + 1, f0);
  auto build = [&](const Vector& centre, double fc) {
    pts.assign(n + 1, centre);
    fv.assign(n + 1, fc);
    for (std::size_t k = 0; k < n; ++k) {
      pts[k + 1][k] += opts.nm_step;
      fv[k + 1] = sanitize(f(pts[k + 1]));
    }
  };
  build(x0, sanitize(f0));

  std::vector<std::size_t> order(n + 1);
  auto sort_simplex = [&] {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    std::vector<Vector> p2(n + 1);
    std::vector<double> f2(n + 1);
    for (std::size_t k = 0; k <= n; ++k) {
      p2[k] = std::move(pts[order[k]]);
      f2[k] = fv[order[k]];
    }
    pts = std::move(p2);
    fv = std::move(f2);
  };
  auto affine = [&](const Vector& a, const Vector& b, double t) {
    // a + t (b - a)
    Vector out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = a[k] + t * (b[k] - a[k]);
    return out;
  };

  int restarts_left = opts.nm_restarts;
  double last_restart_best = kInf;
  sort_simplex();
  while (res.iterations < opts.max_iter) {
    const double spread = fv[n] - fv[0];
    if (n == 0 || spread <= opts.f_tol * (std::abs(fv[0]) + 1e-10)) {
      const bool improved = fv[0] < last_restart_best - opts.f_tol * (std::abs(fv[0]) + 1e-10);
      if (restarts_left == 0 || !improved || n == 0) {
        res.converged = true;
        break;
      }
      --restarts_left;
      last_restart_best = fv[0];
      build(pts[0], fv[0]);
      sort_simplex();
      continue;
    }
    ++res.iterations;

    Vector centroid(n, 0.0);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t d = 0; d < n; ++d) centroid[d] += pts[k][d] / static_cast<double>(n);

    const Vector xr = affine(centroid, pts[n], -1.0);
    const double fr = sanitize(f(xr));
    bool shrink = false;
    if (fr < fv[0]) {
      const Vector xe = affine(centroid, pts[n], -2.0);
      const double fe = sanitize(f(xe));
      if (fe < fr) {
        pts[n] = xe;
        fv[n] = fe;
      } else {
        pts[n] = xr;
        fv[n] = fr;
      }
    } else if (fr < fv[n - 1]) {
      pts[n] = xr;
      fv[n] = fr;
    } else if (fr < fv[n]) {
      const Vector xc = affine(centroid, xr, 0.5);
      const double fc = sanitize(f(xc));
      if (fc <= fr) {
        pts[n] = xc;
        fv[n] = fc;
      } else {
        shrink = true;
      }
    } else {
      const Vector xcc = affine(centroid, pts[n], 0.5);
      const double fcc = sanitize(f(xcc));
      if (fcc < fv[n]) {
        pts[n] = xcc;
        fv[n] = fcc;
      } else {
        shrink = true;
      }
    }
    if (shrink) {
      for (std::size_t k = 1; k <= n; ++k) {
        pts[k] = affine(pts[0], pts[k], 0.5);
        fv[k] = sanitize(f(pts[k]));
      }
    }
    sort_simplex();
    res.trace.push_back(fv[0]);
  }
  res.x_min = pts[0];
  res.f_min = fv[0];
  res.message = res.converged ? "simplex spread below tolerance" : "iteration limit reached";
  return res;
}

Vector fd_gradient(const Objective& f, const Vector& x, double step) {
  Vector g(x.size());
  parallel_for(x.size(), [&](std::size_t k) {
    const double h = step * (1.0 + std::abs(x[k]));
    Vector a = x, b = x;
    a[k] += h;
    b[k] -= h;
    g[k] = (f(a) - f(b)) / (2.0 * h);
  });
  return g;
}

Eigen::MatrixXd fd_hessian(const Objective& f, const Vector& x, double step) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd H(n, n);
  const double f0 = f(x);
  std::vector<double> h(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) h[k] = step * (1.0 + std::abs(x[k]));
  for (Eigen::Index a = 0; a < n; ++a) {
    const auto ka = static_cast<std::size_t>(a);
    Vector xp = x, xm = x;
    xp[ka] += h[ka];
    xm[ka] -= h[ka];
    H(a, a) = (f(xp) - 2.0 * f0 + f(xm)) / (h[ka] * h[ka]);
    for (Eigen::Index b = 0; b < a; ++b) {
      const auto kb = static_cast<std::size_t>(b);
      Vector pp = x, pm = x, mp = x, mm = x;
      pp[ka] += h[ka], pp[kb] += h[kb];
      pm[ka] += h[ka], pm[kb] -= h[kb];
      mp[ka] -= h[ka], mp[kb] += h[kb];
      mm[ka] -= h[ka], mm[kb] -= h[kb];
      H(a, b) = H(b, a) = (f(pp) - f(pm) - f(mp) + f(mm)) / (4.0 * h[ka] * h[kb]);
    }
  }
  return H;
}

OptimResult dfp(const Objective& f, Vector x0, const OptimOptions& opts) {
  const ValueAndGradient fg = [&](const Vector& x, Vector& g) {
    const double v = f(x);
    if (std::isfinite(v)) g = fd_gradient(f, x, opts.fd_step);
    return v;
  };
  return dfp(fg, std::move(x0), opts);
}

OptimResult dfp(const ValueAndGradient& fg, Vector x0, const OptimOptions& opts) {
  opts.validate();
  const auto n = static_cast<Eigen::Index>(x0.size());
  Vector gbuf(x0.size());
  double fx = fg(x0, gbuf);
  if (!std::isfinite(fx)) throw NumericalError("DFP: objective is not finite at the starting point");
  Eigen::VectorXd x = to_eigen(x0), g = to_eigen(gbuf);
  if (!g.allFinite()) throw NumericalError("DFP: gradient is NaN at the starting point");

  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool h_is_identity = true;
  OptimResult res;
  while (res.iterations < opts.max_iter) {
    if (max_abs(g) < opts.g_tol) {
      res.converged = true;
      res.message = "gradient below tolerance";
      break;
    }
    Eigen::VectorXd d = -H * g;
    if (!(g.dot(d) < 0.0)) {
      H.setIdentity();
      h_is_identity = true;
      d = -g;
    }
    const double slope = g.dot(d);
    double step = std::min(1.0, opts.max_step / max_abs(d));
    Eigen::VectorXd x_new;
    double f_new = kInf;
    Vector g_new(x0.size());
    bool accepted = false;
    for (int k = 0; k < 50; ++k, step *= 0.5) {
      x_new = x + step * d;
      f_new = fg(to_vector(x_new), g_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (!h_is_identity) {
        H.setIdentity();
        h_is_identity = true;
        continue;
      }
      throw OptimStallError("DFP line search failed after 50 backtracks (f=" + text::fmt17(fx) +
                                ", max|grad|=" + text::fmt17(max_abs(g)) + ")",
                            to_vector(x), fx, max_abs(g));
    }
    // Secant step on the directional derivative; exact along quadratics.
    const double slope_new = to_eigen(g_new).dot(d);
    if (std::isfinite(slope_new) && std::abs(slope_new) > 0.1 * std::abs(slope) && slope_new != slope) {
      const double trial = step * slope / (slope - slope_new);
      if (trial > 0.0 && trial <= 4.0 * step && trial != step) {
        Vector g_try(x0.size());
        const Eigen::VectorXd x_try = x + trial * d;
        const double f_try = fg(to_vector(x_try), g_try);
        if (std::isfinite(f_try) && f_try < f_new) {
          x_new = x_try;
          f_new = f_try;
          g_new = std::move(g_try);
        }
      }
    }
    ++res.iterations;
    const Eigen::VectorXd gn = to_eigen(g_new);
    if (!gn.allFinite()) throw NumericalError("DFP: gradient is NaN at iteration " + std::to_string(res.iterations));
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = gn - g;
    const double df = fx - f_new;
    x = x_new;
    g = gn;
    const double f_old = fx;
    fx = f_new;
    res.trace.push_back(fx);

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const Eigen::VectorXd Hy = H * y;
      H += (s * s.transpose()) / sy - (Hy * Hy.transpose()) / y.dot(Hy);
      h_is_identity = false;
    }
    if (df <= opts.f_tol * (std::abs(f_old) + 1e-10) && max_abs(s) <= opts.x_tol * (1.0 + max_abs(x))) {
      res.converged = true;
      res.message = "step and decrease below tolerance";
      break;
    }
  }
  if (!res.converged) res.message = "iteration limit reached";
  res.x_min = to_vector(x);
  res.f_min = fx;
  res.inverse_hessian = H;
  return res;
}

void write_trace_csv(std::ostream& out, const OptimResult& result) {
  out << "# etas-trace v1\n";
  out << "iteration,f\n";
  for (std::size_t k = 0; k < result.trace.size(); ++k)
    out << k + 1 << ',' << text::fmt17(result.trace[k]) << '\n';
}

double transform_value(Param k, double v) {
  const bool shifted = k == Param::p || k == Param::q;
  const double base = shifted ? v - 1.0 : v;
  if (!(base > 0.0) || !std::isfinite(base))
    throw DomainError("cannot transform " + std::string(kParamNames[static_cast<std::size_t>(k)]) + " = " +
                      text::fmt17(v) + (shifted ? " (needs > 1)" : " (needs > 0)"));
  return std::log(base);
}

double untransform_value(Param k, double z) {
  const double e = std::exp(z);
  return k == Param::p || k == Param::q ? 1.0 + e : e;
}

double untransform_derivative(Param, double z) { return std::exp(z); }

Vector transform_params(const EtasParams& p) {
  Vector z(kParamCount);
  const auto v = p.values();
  for (std::size_t k = 0; k < kParamCount; ++k) z[k] = transform_value(static_cast<Param>(k), v[k]);
  return z;
}

EtasParams untransform_params(std::span<const double> z) {
  if (z.size() != kParamCount) throw DomainError("transformed parameter vector must have 8 entries");
  std::array<double, kParamCount> v{};
  for (std::size_t k = 0; k < kParamCount; ++k) v[k] = untransform_value(static_cast<Param>(k), z[k]);
  return EtasParams::from_values(v);
}

double transform_beta(double beta) {
  if (!(beta > 0.0)) throw DomainError("cannot transform beta = " + text::fmt17(beta) + " (needs > 0)");
  return std::log(beta);
}

double untransform_beta(double z) { return std::exp(z); }

OmegaSearch grid_search_omega(std::span<const double> omegas, std::size_t n_target,
                              const std::function<double(double)>& fit) {
  if (omegas.empty()) throw DomainError("omega grid is empty");
  for (double w : omegas)
    if (!(w > 0.0)) throw DomainError("omega grid values must be > 0");
  OmegaSearch out;
  out.scores.resize(omegas.size());
  parallel_for(omegas.size(), [&](std::size_t k) {
    auto& s = out.scores[k];
    s.omega = omegas[k];
    try {
      s.loglik = fit(omegas[k]);
      s.adjusted = s.loglik - static_cast<double>(n_target) * std::log(omegas[k]);
      s.ok = std::isfinite(s.loglik);
      if (!s.ok) s.error = "non-finite log-likelihood";
    } catch (const std::exception& e) {
      s.error = e.what();
    }
  });
  bool any = false;
  for (std::size_t k = 0; k < out.scores.size(); ++k) {
    if (!out.scores[k].ok) continue;
    if (!any || out.scores[k].adjusted > out.scores[out.best].adjusted) out.best = k;
    any = true;
  }
  if (!any) {
    std::string msg = "every omega fit failed:";
    for (const auto& s : out.scores) msg += " [omega=" + text::fmt17(s.omega) + ": " + s.error + "]";
    throw NumericalError(msg);
  }
  return out;
}

}  // namespace etas
