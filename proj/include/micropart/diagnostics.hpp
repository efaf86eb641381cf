#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "micropart/generative.hpp"
#include "micropart/params.hpp"
#include "micropart/partition.hpp"

namespace micropart {

struct ExponentFit {
  double slope = 0.0;
  double intercept = 0.0;
  double n_min = 0.0;
  double n_max = 0.0;
  double residual_rms = 0.0;
};

// Least-squares slope of log(value) against log(n) over the last
// tail_fraction of the points. Requires positive values and at least 10
// points in the fitted tail.
ExponentFit growth_exponent(const std::vector<std::pair<double, double>>& trajectory,
                            double tail_fraction);

// Asymptotic proportion of clusters of size r, sigma * Gamma(r-sigma) / (r! Gamma(1-sigma)),
// for sigma in (0,1). The degenerate regimes sigma = 0 (all proportions
// vanish) and sigma = 1 (all singletons) are reported via sigma_regime.
double powerlaw_ratio(double sigma, std::int64_t r);

enum class SizeRatioRegime { vanishing, power_law, all_singletons };
SizeRatioRegime sigma_regime(double sigma);
std::string to_string(SizeRatioRegime regime);

struct ReportCheck {
  std::string name;
  double empirical = 0.0;
  double theoretical = 0.0;
  double gap = 0.0;
  double tolerance = 0.0;
  bool pass = true;
};

struct AsymptoticReport {
  SizeRatioRegime regime = SizeRatioRegime::power_law;
  std::vector<ReportCheck> checks;
  bool all_pass = true;
};

struct DiagnosticTolerances {
  double exponent = 0.1;         // growth exponents, sigma > 0
  double exponent_sigma0 = 0.15; // K-growth at sigma = 0 (log correction)
  double ratio_r1 = 0.05;
  double ratio_r2 = 0.03;
  double m1_linearity = 0.10;    // relative
  double tail_fraction = 0.5;
};

// Empirical-versus-theory checks on a simulated trajectory: N(t) growth with
// exponent xi+1 and prefactor kappa(1,0) gamma/(xi+1), K(t) growth with
// exponent sigma+xi, linear growth of the first cluster, and the size-r
// proportions against powerlaw_ratio. Needs the latent state (t-indexed
// views come from the arrival times).
AsymptoticReport asymptotic_report(const LatentState& state, const ModelParams& params,
                                   const DiagnosticTolerances& tol = {});

// Density of the first cluster's CRM weight,
//   f(w) = w rho(w) int_0^inf int_0^tau exp(-w (tau-theta)) exp(-Psi(tau)) alpha(dtheta) dtau,
// by nested adaptive quadrature; the outer integral is truncated where
// exp(-Psi) drops below 1e-14.
double first_weight_density(double w, const ModelParams& params);

// Same, reusing a prepared Psi table covering [0, horizon]; horizon comes
// from first_weight_horizon. Useful when the density is evaluated many times.
double first_weight_density(double w, const ModelParams& params, const PsiTable& table,
                            double horizon);
double first_weight_horizon(PsiTable& table);

// CDF of the above on [0, w]; used by goodness-of-fit tests.
double first_weight_cdf(double w, const ModelParams& params);

}  // namespace micropart
