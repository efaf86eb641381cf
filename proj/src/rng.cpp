#include "micropart/rng.hpp"

#include <cmath>
#include <stdexcept>

#include "micropart/special.hpp"

namespace micropart {

double Rng::normal() { return special::norm_ppf(uniform()); }

// Marsaglia & Tsang (2000); shape < 1 handled by the usual boost
// Gamma(a) = Gamma(a+1) * U^(1/a).
double Rng::gamma(double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw std::invalid_argument("Rng::gamma: shape and rate must be > 0");
  double boost = 1.0;
  double a = shape;
  if (a < 1.0) {
    boost = std::pow(uniform(), 1.0 / a);
    a += 1.0;
  }
  const double d = a - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return boost * d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return boost * d * v / rate;
  }
}

long Rng::poisson(double mean) {
  if (!(mean >= 0.0)) throw std::invalid_argument("Rng::poisson: mean must be >= 0");
  if (mean < 30.0) {
    // inversion by sequential search
    const double l = std::exp(-mean);
    long k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > l);
    return k - 1;
  }
  // Atkinson's PTRS-style rejection for large means
  const double c = 0.767 - 3.36 / mean;
  const double beta = M_PI / std::sqrt(3.0 * mean);
  const double alpha = beta * mean;
  const double k = std::log(c) - mean - std::log(beta);
  for (;;) {
    const double u = uniform();
    const double x = (alpha - std::log((1.0 - u) / u)) / beta;
    const long n = static_cast<long>(std::floor(x + 0.5));
    if (n < 0) continue;
    const double v = uniform();
    const double y = alpha - beta * x;
    const double t = 1.0 + std::exp(y);
    const double lhs = y + std::log(v / (t * t));
    const double rhs = k + n * std::log(mean) - std::lgamma(n + 1.0);
    if (lhs <= rhs) return n;
  }
}

}  // namespace micropart
