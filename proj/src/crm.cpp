#include "micropart/crm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "micropart/errors.hpp"
#include "micropart/quadrature.hpp"
#include "micropart/special.hpp"

namespace micropart {

double BaseMeasureParams::density(double theta) const {
  return gamma_coef * xi * std::pow(theta, xi - 1.0);
}

double BaseMeasureParams::log_density(double theta) const {
  if (xi == 1.0) return std::log(gamma_coef);
  return std::log(gamma_coef * xi) + (xi - 1.0) * std::log(theta);
}

double BaseMeasureParams::cumulative(double t) const { return gamma_coef * std::pow(t, xi); }

double laplace_exponent(double t, const GGPParams& levy) {
  if (!(t >= 0.0)) throw std::invalid_argument("laplace_exponent: t must be >= 0");
  if (levy.sigma == 0.0) return std::log1p(t / levy.zeta);
  // zeta^sigma * expm1(sigma * log1p(t/zeta)) / sigma, accurate for small t
  return std::pow(levy.zeta, levy.sigma) * std::expm1(levy.sigma * std::log1p(t / levy.zeta)) /
         levy.sigma;
}

double log_kappa(std::int64_t m, double u, const GGPParams& levy) {
  if (m < 1) throw std::invalid_argument("kappa: m must be a positive integer");
  if (!(u >= 0.0)) throw std::invalid_argument("kappa: u must be >= 0");
  const double md = static_cast<double>(m);
  return std::lgamma(md - levy.sigma) - std::lgamma(1.0 - levy.sigma) -
         (md - levy.sigma) * std::log(levy.zeta + u);
}

double kappa(std::int64_t m, double u, const GGPParams& levy) {
  return std::exp(log_kappa(m, u, levy));
}

double psi_base_integral(double tau, const ModelParams& params, double abs_tol) {
  if (!(tau >= 0.0)) throw std::invalid_argument("psi_base_integral: tau must be >= 0");
  if (tau == 0.0) return 0.0;
  const double xi = params.base.xi;
  const double gamma_coef = params.base.gamma_coef;
  if (xi >= 1.0) {
    auto f = [&](double theta) {
      return laplace_exponent(tau - theta, params.levy) * params.base.density(theta);
    };
    return quadrature::integrate(f, 0.0, tau, abs_tol, 1e-13).value;
  }
  // theta = tau * u^(1/xi) removes the theta^(xi-1) endpoint singularity
  auto f = [&](double u) {
    const double theta = tau * std::pow(u, 1.0 / xi);
    return laplace_exponent(tau - theta, params.levy);
  };
  const double scale = gamma_coef * std::pow(tau, xi);
  return scale * quadrature::integrate(f, 0.0, 1.0, abs_tol / scale, 1e-13).value;
}

double new_cluster_intensity(double tau, const ModelParams& params, double abs_tol) {
  if (!(tau >= 0.0)) throw std::invalid_argument("new_cluster_intensity: tau must be >= 0");
  if (tau == 0.0) return 0.0;
  const double xi = params.base.xi;
  const double sm1 = params.levy.sigma - 1.0;
  const double zeta = params.levy.zeta;
  if (xi >= 1.0) {
    auto f = [&](double theta) {
      return params.base.density(theta) * std::pow(zeta + tau - theta, sm1);
    };
    return quadrature::integrate(f, 0.0, tau, abs_tol, 1e-12).value;
  }
  auto f = [&](double u) {
    const double theta = tau * std::pow(u, 1.0 / xi);
    return std::pow(zeta + tau - theta, sm1);
  };
  const double scale = params.base.gamma_coef * std::pow(tau, xi);
  return scale * quadrature::integrate(f, 0.0, 1.0, abs_tol / scale, 1e-12).value;
}

double new_cluster_intensity_deriv(double tau, const ModelParams& params, double abs_tol) {
  if (!(tau > 0.0)) throw std::invalid_argument("new_cluster_intensity_deriv: tau must be > 0");
  const double xi = params.base.xi;
  const double sigma = params.levy.sigma;
  const double zeta = params.levy.zeta;
  const double boundary = params.base.density(tau) * std::pow(zeta, sigma - 1.0);
  double integral;
  if (xi >= 1.0) {
    auto f = [&](double theta) {
      return params.base.density(theta) * std::pow(zeta + tau - theta, sigma - 2.0);
    };
    integral = quadrature::integrate(f, 0.0, tau, abs_tol, 1e-12).value;
  } else {
    auto f = [&](double u) {
      const double theta = tau * std::pow(u, 1.0 / xi);
      return std::pow(zeta + tau - theta, sigma - 2.0);
    };
    const double scale = params.base.gamma_coef * std::pow(tau, xi);
    integral = scale * quadrature::integrate(f, 0.0, 1.0, abs_tol / scale, 1e-12).value;
  }
  return boundary + (sigma - 1.0) * integral;
}

double levy_tail(double x, const GGPParams& levy) {
  if (!(x > 0.0))
    throw std::invalid_argument("levy_tail: truncation level must be > 0 (infinite activity at 0)");
  if (levy.sigma == 0.0) return special::gamma_upper(0.0, levy.zeta * x);
  return std::pow(levy.zeta, levy.sigma) * special::gamma_upper(-levy.sigma, levy.zeta * x) /
         std::tgamma(1.0 - levy.sigma);
}

double levy_tail_first_moment(double x, const GGPParams& levy) {
  if (!(x >= 0.0)) throw std::invalid_argument("levy_tail_first_moment: x must be >= 0");
  const double k10 = std::pow(levy.zeta, levy.sigma - 1.0);
  if (x == 0.0) return k10;
  return k10 * special::gamma_upper(1.0 - levy.sigma, levy.zeta * x) /
         std::tgamma(1.0 - levy.sigma);
}

std::vector<CrmAtom> sample_truncated_crm(double t_max, double eps, const ModelParams& params,
                                          Rng& rng) {
  if (!(t_max > 0.0)) throw std::invalid_argument("sample_truncated_crm: t_max must be > 0");
  if (!(eps > 0.0)) throw std::invalid_argument("sample_truncated_crm: eps must be > 0");
  const double tail_at_eps = levy_tail(eps, params.levy);
  const double mean_count = params.base.cumulative(t_max) * tail_at_eps;
  const long count = rng.poisson(mean_count);

  std::vector<CrmAtom> atoms;
  atoms.reserve(static_cast<std::size_t>(count));
  for (long i = 0; i < count; ++i) {
    // invert rho_bar(w) = u * rho_bar(eps) for w > eps by bisection on log w
    const double target = rng.uniform() * tail_at_eps;
    double lo = eps, hi = eps;
    while (levy_tail(hi, params.levy) > target) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e300) throw numerical_error("sample_truncated_crm: bracket expansion failed");
    }
    double log_lo = std::log(lo), log_hi = std::log(hi);
    for (int it = 0; it < 200 && log_hi - log_lo > 1e-14; ++it) {
      const double mid = 0.5 * (log_lo + log_hi);
      if (levy_tail(std::exp(mid), params.levy) > target)
        log_lo = mid;
      else
        log_hi = mid;
    }
    const double weight = std::exp(0.5 * (log_lo + log_hi));
    const double location = t_max * std::pow(rng.uniform(), 1.0 / params.base.xi);
    atoms.push_back({weight, location});
  }
  return atoms;
}

// ---------------------------------------------------------------------------
// PsiTable

namespace {
// cubic Hermite value on [a,b] from endpoint values/derivatives
inline double hermite(double s, double h, double f0, double d0, double f1, double d1) {
  const double s2 = s * s;
  const double s3 = s2 * s;
  return f0 * (2 * s3 - 3 * s2 + 1) + h * d0 * (s3 - 2 * s2 + s) + f1 * (-2 * s3 + 3 * s2) +
         h * d1 * (s3 - s2);
}

// integral of the Hermite cubic from 0 to s (scaled by h)
inline double hermite_integral(double s, double h, double f0, double d0, double f1, double d1) {
  const double s2 = s * s;
  const double s3 = s2 * s;
  const double s4 = s3 * s;
  const double i00 = 0.5 * s4 - s3 + s;
  const double i10 = 0.25 * s4 - (2.0 / 3.0) * s3 + 0.5 * s2;
  const double i01 = -0.5 * s4 + s3;
  const double i11 = 0.25 * s4 - s3 / 3.0;
  return h * (f0 * i00 + h * d0 * i10 + f1 * i01 + h * d1 * i11);
}
}  // namespace

PsiTable::PsiTable(const ModelParams& params) : params_(params) {
  params_.validate();
  floor_ = 1e-3 * std::min(params_.levy.zeta, 1.0);
  knots_.push_back(floor_);
  hbar_.push_back(new_cluster_intensity(floor_, params_));
  hbar_deriv_.push_back(new_cluster_intensity_deriv(floor_, params_));
  psi_.push_back(psi_base_integral(floor_, params_));
}

void PsiTable::ensure(double t) {
  constexpr double kRelTol = 1e-8;
  double step = 0.0;
  while (knots_.back() < t) {
    const double a = knots_.back();
    if (step <= 0.0) step = 0.2 * (a + floor_);
    for (;;) {
      const double b = a + step;
      // accept the interval if the Hermite midpoint value matches quadrature
      const double hb = new_cluster_intensity(b, params_);
      const double hd = new_cluster_intensity_deriv(b, params_);
      const double mid = 0.5 * (a + b);
      const double exact = new_cluster_intensity(mid, params_);
      const double interp =
          hermite(0.5, step, hbar_.back(), hbar_deriv_.back(), hb, hd);
      if (std::abs(interp - exact) <= kRelTol * (std::abs(exact) + 1e-12 * hbar_.back())) {
        knots_.push_back(b);
        hbar_.push_back(hb);
        hbar_deriv_.push_back(hd);
        psi_.push_back(psi_[psi_.size() - 1] +
                       hermite_integral(1.0, step, hbar_[hbar_.size() - 2],
                                        hbar_deriv_[hbar_deriv_.size() - 2], hb, hd));
        if (std::abs(interp - exact) <= 0.05 * kRelTol * (std::abs(exact) + 1e-300))
          step *= 1.6;
        step = std::min(step, 0.5 * (params_.levy.zeta + b));
        break;
      }
      step *= 0.5;
      if (step < 1e-12 * (1.0 + a))
        throw numerical_error("PsiTable: knot refinement stalled near t = " + std::to_string(a));
    }
  }
}

std::size_t PsiTable::locate(double tau) const {
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), tau);
  std::size_t i = static_cast<std::size_t>(std::max<std::ptrdiff_t>(1, it - knots_.begin())) - 1;
  if (i + 1 >= knots_.size()) i = knots_.size() - 2;
  return i;
}

double PsiTable::psi(double tau) const {
  if (tau <= floor_) return psi_base_integral(std::max(tau, 0.0), params_);
  if (tau > knots_.back())
    throw std::logic_error("PsiTable::psi: query beyond coverage; call ensure() first");
  const std::size_t i = locate(tau);
  const double h = knots_[i + 1] - knots_[i];
  const double s = (tau - knots_[i]) / h;
  return psi_[i] + hermite_integral(s, h, hbar_[i], hbar_deriv_[i], hbar_[i + 1],
                                    hbar_deriv_[i + 1]);
}

double PsiTable::psi(double tau, std::uint32_t& hint) const {
  if (tau <= floor_) return psi_base_integral(std::max(tau, 0.0), params_);
  if (tau > knots_.back())
    throw std::logic_error("PsiTable::psi: query beyond coverage; call ensure() first");
  std::size_t i = hint;
  if (!(i + 1 < knots_.size() && knots_[i] <= tau && tau <= knots_[i + 1])) {
    // queries drift slowly upward; try the next interval before searching
    if (i + 2 < knots_.size() && knots_[i + 1] <= tau && tau <= knots_[i + 2])
      ++i;
    else
      i = locate(tau);
    hint = static_cast<std::uint32_t>(i);
  }
  const double h = knots_[i + 1] - knots_[i];
  const double s = (tau - knots_[i]) / h;
  return psi_[i] + hermite_integral(s, h, hbar_[i], hbar_deriv_[i], hbar_[i + 1],
                                    hbar_deriv_[i + 1]);
}

double PsiTable::hazard(double tau) const {
  if (tau <= floor_) return tau <= 0.0 ? 0.0 : new_cluster_intensity(tau, params_);
  if (tau > knots_.back())
    throw std::logic_error("PsiTable::hazard: query beyond coverage; call ensure() first");
  const std::size_t i = locate(tau);
  const double h = knots_[i + 1] - knots_[i];
  const double s = (tau - knots_[i]) / h;
  return hermite(s, h, hbar_[i], hbar_deriv_[i], hbar_[i + 1], hbar_deriv_[i + 1]);
}

}  // namespace micropart
