#pragma once

#include <cstdint>
#include <vector>

#include "micropart/params.hpp"
#include "micropart/rng.hpp"

namespace micropart {

// Laplace exponent psi(t) of the GGP Levy measure:
//   sigma = 0:      log(1 + t/zeta)
//   sigma in (0,1): ((t+zeta)^sigma - zeta^sigma) / sigma
double laplace_exponent(double t, const GGPParams& levy);

// Exponentially tilted moment kappa(m, u) = Gamma(m-sigma) / (Gamma(1-sigma) (zeta+u)^(m-sigma)),
// the predictive weight kernel of a cluster of size m at lag u.
double kappa(std::int64_t m, double u, const GGPParams& levy);
double log_kappa(std::int64_t m, double u, const GGPParams& levy);

// Psi(tau) = int_0^tau psi(tau - theta) alpha(dtheta), the exponent of the
// joint density. Adaptive Gauss-Kronrod to abs tolerance 1e-10; the xi < 1
// endpoint singularity of alpha is removed by the substitution
// theta = tau * u^(1/xi).
double psi_base_integral(double tau, const ModelParams& params, double abs_tol = 1e-10);

// Hbar(tau) = int_0^tau alpha(theta) (zeta + tau - theta)^(sigma-1) dtheta
//           = d/dtau Psi(tau),
// the unnormalized mass of a new cluster at arrival time tau.
double new_cluster_intensity(double tau, const ModelParams& params, double abs_tol = 1e-12);

// d/dtau Hbar(tau); used to build the interpolation table.
double new_cluster_intensity_deriv(double tau, const ModelParams& params, double abs_tol = 1e-12);

// Tail of the Levy measure rho_bar(x) = int_x^infty rho(dw); upper incomplete
// gamma, with a dedicated exponential-integral branch at sigma = 0.
double levy_tail(double x, const GGPParams& levy);

// int_x^infty w rho(dw); x = 0 gives kappa(1,0) = zeta^(sigma-1).
double levy_tail_first_moment(double x, const GGPParams& levy);

struct CrmAtom {
  double weight;
  double location;
};

// All atoms of W with weight > eps and location in (0, t_max]: a Poisson
// number (mean alpha_bar(t_max) * rho_bar(eps)) of i.i.d. pairs; weights by
// numeric inversion of rho_bar, locations via theta = t_max * U^(1/xi).
std::vector<CrmAtom> sample_truncated_crm(double t_max, double eps, const ModelParams& params,
                                          Rng& rng);

// Tabulated Psi and Hbar over [0, coverage], cubic-Hermite interpolated
// between adaptively placed knots (relative accuracy ~1e-8, which biases a
// full SMC log-evidence by at most ~2e-5 since per-step increments
// telescope). Queries below the first knot fall back to direct quadrature.
// Not safe for concurrent extension; clone per thread instead.
class PsiTable {
public:
  explicit PsiTable(const ModelParams& params);

  // extends coverage to at least t (appending knots; earlier values unchanged)
  void ensure(double t);
  double coverage() const { return knots_.empty() ? 0.0 : knots_.back(); }

  double psi(double tau) const;     // Psi(tau)
  double hazard(double tau) const;  // Hbar(tau)

  // psi with a caller-owned interval hint; cheap for slowly moving queries
  double psi(double tau, std::uint32_t& hint) const;

  const ModelParams& params() const { return params_; }

private:
  std::size_t locate(double tau) const;

  ModelParams params_;
  double floor_ = 0.0;  // below this, direct quadrature
  std::vector<double> knots_;
  std::vector<double> hbar_;
  std::vector<double> hbar_deriv_;
  std::vector<double> psi_;
};

}  // namespace micropart
