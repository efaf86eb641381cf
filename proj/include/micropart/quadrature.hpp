#pragma once

#include <functional>

namespace micropart::quadrature {

struct Result {
  double value = 0.0;
  double error_estimate = 0.0;
  bool converged = true;
};

// Adaptive Gauss-Kronrod (G7/K15) on [a, b]. Splits the worst interval until
// the summed error estimate is below max(abs_tol, rel_tol * |integral|).
// Throws numerical_error when the interval budget is exhausted, unless
// `nothrow` is set, in which case the partial result is returned with
// converged = false.
Result integrate(const std::function<double(double)>& f, double a, double b,
                 double abs_tol = 1e-10, double rel_tol = 1e-12, int max_intervals = 4000,
                 bool nothrow = false);

// Single non-adaptive K15 panel with embedded error estimate.
Result panel_k15(const std::function<double(double)>& f, double a, double b);

}  // namespace micropart::quadrature
