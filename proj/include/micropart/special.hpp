#pragma once

namespace micropart::special {

// standard normal CDF and its inverse (Wichura's PPND16, ~1e-16 accurate);
// the inverse is kept inline and allocation-free because the SMC proposal
// draws one per particle per step
double norm_cdf(double x);
double norm_ppf(double p);

// upper incomplete gamma Gamma(a, x) for a in (-1, 1], x > 0 (unnormalized).
// a = 0 gives the exponential integral E1(x). Wraps GSL.
double gamma_upper(double a, double x);

double lgamma(double x);

}  // namespace micropart::special
