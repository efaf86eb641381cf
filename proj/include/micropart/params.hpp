#pragma once

#include <stdexcept>
#include <string>

namespace micropart {

// Levy-measure parameters of the generalized gamma process
//   rho(dw) = w^(-1-sigma) exp(-zeta w) / Gamma(1-sigma) dw
// with sigma in [0,1) and zeta > 0. sigma = 0 is the gamma process.
struct GGPParams {
  double sigma = 0.0;
  double zeta = 1.0;

  GGPParams() = default;
  GGPParams(double sigma_, double zeta_) : sigma(sigma_), zeta(zeta_) { validate(); }

  void validate() const {
    if (!(sigma >= 0.0 && sigma < 1.0))
      throw std::invalid_argument("GGPParams: sigma must lie in [0,1), got " + std::to_string(sigma));
    if (!(zeta > 0.0))
      throw std::invalid_argument("GGPParams: zeta must be > 0, got " + std::to_string(zeta));
  }
};

// Base measure alpha(dtheta) = gamma_coef * xi * theta^(xi-1) dtheta on (0,inf),
// cumulative gamma_coef * t^xi.
struct BaseMeasureParams {
  double xi = 1.0;
  double gamma_coef = 1.0;

  BaseMeasureParams() = default;
  BaseMeasureParams(double xi_, double gamma_coef_) : xi(xi_), gamma_coef(gamma_coef_) { validate(); }

  void validate() const {
    if (!(xi > 0.0))
      throw std::invalid_argument("BaseMeasureParams: xi must be > 0, got " + std::to_string(xi));
    if (!(gamma_coef > 0.0))
      throw std::invalid_argument("BaseMeasureParams: gamma_coef must be > 0, got " +
                                  std::to_string(gamma_coef));
  }

  // density alpha(theta)
  double density(double theta) const;
  double log_density(double theta) const;
  // cumulative alpha_bar(t) = gamma_coef * t^xi
  double cumulative(double t) const;
};

struct ModelParams {
  BaseMeasureParams base;
  GGPParams levy;

  ModelParams() = default;
  ModelParams(BaseMeasureParams base_, GGPParams levy_) : base(base_), levy(levy_) { validate(); }
  ModelParams(double xi, double gamma_coef, double sigma, double zeta)
      : base(xi, gamma_coef), levy(sigma, zeta) {}

  void validate() const {
    base.validate();
    levy.validate();
  }
};

// Two-parameter Chinese restaurant process: discount in [0,1), strength > -discount.
struct CrpParams {
  double discount = 0.0;
  double strength = 1.0;

  CrpParams() = default;
  CrpParams(double discount_, double strength_) : discount(discount_), strength(strength_) {
    validate();
  }

  void validate() const {
    if (!(discount >= 0.0 && discount < 1.0))
      throw std::invalid_argument("CrpParams: discount must lie in [0,1), got " +
                                  std::to_string(discount));
    if (!(strength > -discount))
      throw std::invalid_argument("CrpParams: strength must exceed -discount, got " +
                                  std::to_string(strength));
  }
};

}  // namespace micropart
