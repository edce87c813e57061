#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "etas/error.hpp"
#include "etas/model.hpp"

namespace etas {

using Vector = std::vector<double>;
using Objective = std::function<double(const Vector&)>;
// Returns f(x) and writes the gradient into the second argument (same size as x).
using ValueAndGradient = std::function<double(const Vector&, Vector&)>;

struct OptimOptions {
  int max_iter{2000};
  double f_tol{1e-12};   // relative change in f
  double x_tol{1e-9};    // largest step component
  double g_tol{1e-6};    // largest gradient component (DFP)
  double fd_step{1e-6};  // central differences use fd_step * (1 + |x|)
  double max_step{5.0};  // largest first trial step component in a DFP line search
  double nm_step{0.1};   // initial simplex edge
  int nm_restarts{2};    // simplex rebuilt around the best point after convergence

  void validate() const;
};

struct OptimResult {
  Vector x_min;
  double f_min{0.0};
  int iterations{0};
  bool converged{false};
  Vector trace;  // best f after each iteration
  std::string message;
  // Final DFP inverse-Hessian approximation (empty for Nelder-Mead).
  Eigen::MatrixXd inverse_hessian;
};

// Line search could not reduce the objective even along steepest descent.
class OptimStallError : public NumericalError {
 public:
  OptimStallError(const std::string& what, Vector x, double f, double grad_norm)
      : NumericalError(what), x_(std::move(x)), f_(f), grad_norm_(grad_norm) {}
  [[nodiscard]] const Vector& x() const noexcept { return x_; }
  [[nodiscard]] double f() const noexcept { return f_; }
  [[nodiscard]] double grad_norm() const noexcept { return grad_norm_; }

 private:
  Vector x_;
  double f_;
  double grad_norm_;
};

[[nodiscard]] OptimResult nelder_mead(const Objective& f, Vector x0, const OptimOptions& opts = {});

// Gradient by central finite differences.
[[nodiscard]] OptimResult dfp(const Objective& f, Vector x0, const OptimOptions& opts = {});
// Gradient supplied by the caller.
[[nodiscard]] OptimResult dfp(const ValueAndGradient& fg, Vector x0, const OptimOptions& opts = {});

[[nodiscard]] Vector fd_gradient(const Objective& f, const Vector& x, double step);
// Symmetric central-difference Hessian.
[[nodiscard]] Eigen::MatrixXd fd_hessian(const Objective& f, const Vector& x, double step);

void write_trace_csv(std::ostream& out, const OptimResult& result);

// log for mu, A, alpha, c, D, gamma (and beta); log(x - 1) for p and q.
[[nodiscard]] double transform_value(Param k, double v);
[[nodiscard]] double untransform_value(Param k, double z);
// d(natural) / d(transformed) at z.
[[nodiscard]] double untransform_derivative(Param k, double z);
[[nodiscard]] Vector transform_params(const EtasParams& p);
[[nodiscard]] EtasParams untransform_params(std::span<const double> z);
[[nodiscard]] double transform_beta(double beta);
[[nodiscard]] double untransform_beta(double z);

struct OmegaScore {
  double omega{1.0};
  double loglik{0.0};   // raw total
  double adjusted{0.0}; // loglik - N' log omega
  bool ok{false};
  std::string error;
};

struct OmegaSearch {
  std::vector<OmegaScore> scores;
  std::size_t best{0};
};

// Fits at each omega (fit returns the total log-likelihood on the scaled axis)
// and picks the largest Jacobian-adjusted score. Throws when every fit fails.
[[nodiscard]] OmegaSearch grid_search_omega(std::span<const double> omegas, std::size_t n_target,
                                            const std::function<double(double)>& fit);

}  // namespace etas
