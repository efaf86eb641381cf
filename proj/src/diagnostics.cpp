#include "micropart/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "micropart/crm.hpp"
#include "micropart/errors.hpp"
#include "micropart/quadrature.hpp"

namespace micropart {

ExponentFit growth_exponent(const std::vector<std::pair<double, double>>& trajectory,
                            double tail_fraction) {
  if (!(tail_fraction > 0.0 && tail_fraction <= 1.0))
    throw std::invalid_argument("growth_exponent: tail_fraction must lie in (0,1]");
  const auto total = trajectory.size();
  const auto take = static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(total)));
  if (take < 10) throw std::invalid_argument("growth_exponent: need at least 10 points in the tail");
  const std::size_t begin = total - take;

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = begin; i < total; ++i) {
    const auto& [n, value] = trajectory[i];
    if (!(n > 0.0) || !(value > 0.0))
      throw std::invalid_argument("growth_exponent: trajectory must be positive");
    const double x = std::log(n);
    const double y = std::log(value);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = static_cast<double>(take);
  const double denom = m * sxx - sx * sx;
  if (!(std::abs(denom) > 0.0))
    throw std::invalid_argument("growth_exponent: degenerate abscissae");
  ExponentFit fit;
  fit.slope = (m * sxy - sx * sy) / denom;
  fit.intercept = (sy - fit.slope * sx) / m;
  fit.n_min = trajectory[begin].first;
  fit.n_max = trajectory.back().first;
  double rss = 0.0;
  for (std::size_t i = begin; i < total; ++i) {
    const double r =
        std::log(trajectory[i].second) - (fit.intercept + fit.slope * std::log(trajectory[i].first));
    rss += r * r;
  }
  fit.residual_rms = std::sqrt(rss / m);
  return fit;
}

double powerlaw_ratio(double sigma, std::int64_t r) {
  if (!(sigma > 0.0 && sigma < 1.0))
    throw std::invalid_argument(
        "powerlaw_ratio: sigma must lie in (0,1); see sigma_regime for the boundary cases");
  if (r < 1) throw std::invalid_argument("powerlaw_ratio: r must be >= 1");
  const double rd = static_cast<double>(r);
  return std::exp(std::log(sigma) + std::lgamma(rd - sigma) - std::lgamma(rd + 1.0) -
                  std::lgamma(1.0 - sigma));
}

SizeRatioRegime sigma_regime(double sigma) {
  if (sigma == 0.0) return SizeRatioRegime::vanishing;
  if (sigma >= 1.0) return SizeRatioRegime::all_singletons;
  return SizeRatioRegime::power_law;
}

std::string to_string(SizeRatioRegime regime) {
  switch (regime) {
    case SizeRatioRegime::vanishing: return "vanishing";
    case SizeRatioRegime::power_law: return "power_law";
    case SizeRatioRegime::all_singletons: return "all_singletons";
  }
  return "unknown";
}

AsymptoticReport asymptotic_report(const LatentState& state, const ModelParams& params,
                                   const DiagnosticTolerances& tol) {
  if (state.arrivals.size() != state.labels.size() || state.arrivals.empty())
    throw std::invalid_argument("asymptotic_report: full latent trajectory required");
  const std::size_t n = state.arrivals.size();
  const double sigma = params.levy.sigma;
  const double xi = params.base.xi;

  AsymptoticReport report;
  report.regime = sigma_regime(sigma);

  // t-indexed trajectories at the arrival times
  std::vector<std::pair<double, double>> n_traj, k_traj, m1_traj;
  n_traj.reserve(n);
  k_traj.reserve(n);
  m1_traj.reserve(n);
  std::int32_t k_running = 0;
  std::int64_t m1_running = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = state.arrivals[i];
    k_running = std::max(k_running, state.labels[i]);
    if (state.labels[i] == 1) ++m1_running;
    n_traj.emplace_back(t, static_cast<double>(i + 1));
    k_traj.emplace_back(t, static_cast<double>(k_running));
    m1_traj.emplace_back(t, static_cast<double>(m1_running));
  }

  auto add_check = [&](std::string name, double empirical, double theoretical, double tolerance) {
    ReportCheck check;
    check.name = std::move(name);
    check.empirical = empirical;
    check.theoretical = theoretical;
    check.gap = std::abs(empirical - theoretical);
    check.tolerance = tolerance;
    check.pass = check.gap <= tolerance;
    report.all_pass = report.all_pass && check.pass;
    report.checks.push_back(check);
  };

  const auto n_fit = growth_exponent(n_traj, tol.tail_fraction);
  add_check("N(t) growth exponent", n_fit.slope, xi + 1.0, tol.exponent);

  // prefactor of N(t) ~ kappa(1,0) * gamma/(xi+1) * t^(xi+1)
  const double t_end = state.arrivals.back();
  const double prefactor_theory =
      kappa(1, 0.0, params.levy) * params.base.gamma_coef / (xi + 1.0);
  const double prefactor_emp = static_cast<double>(n) / std::pow(t_end, xi + 1.0);
  add_check("N(t) prefactor (relative)", prefactor_emp / prefactor_theory, 1.0, 0.2);

  const auto k_fit = growth_exponent(k_traj, tol.tail_fraction);
  add_check("K(t) growth exponent", k_fit.slope, sigma + xi,
            sigma == 0.0 ? tol.exponent_sigma0 : tol.exponent);

  // first-cluster linearity: tail increment rate of M_1(t) against its end
  // ratio. Both estimate the same atom weight; the tolerance cannot be below
  // the Poisson noise of the increment count, so a count-driven floor is
  // applied.
  {
    const double t_end = m1_traj.back().first;
    const double t_mid = 0.5 * t_end;
    double m_mid = 0.0;
    for (const auto& [t, value] : m1_traj) {
      if (t > t_mid) break;
      m_mid = value;
    }
    const double m_end = m1_traj.back().second;
    const double increment = m_end - m_mid;
    const double slope = increment / (t_end - t_mid);
    const double ratio = m_end / t_end;
    const double noise_floor = 4.5 / std::sqrt(std::max(1.0, increment));
    add_check("M_1(t) linearity (tail rate / end ratio)", slope / ratio, 1.0,
              std::max(tol.m1_linearity, noise_floor));
  }

  if (report.regime == SizeRatioRegime::power_law) {
    const auto st = stats(state.partition());
    auto count_of = [&](std::int64_t r) {
      const auto it = st.size_histogram.find(r);
      return it == st.size_histogram.end() ? 0.0 : static_cast<double>(it->second);
    };
    add_check("K_{n,1}/K_n", count_of(1) / static_cast<double>(st.k), powerlaw_ratio(sigma, 1),
              tol.ratio_r1);
    add_check("K_{n,2}/K_n", count_of(2) / static_cast<double>(st.k), powerlaw_ratio(sigma, 2),
              tol.ratio_r2);
  }
  return report;
}

// ---------------------------------------------------------------------------

namespace {

// inner integral int_0^tau exp(-w (tau-theta)) alpha(dtheta)
double tilted_base_integral(double w, double tau, const ModelParams& params) {
  const double xi = params.base.xi;
  if (xi >= 1.0) {
    auto f = [&](double theta) { return std::exp(-w * (tau - theta)) * params.base.density(theta); };
    return quadrature::integrate(f, 0.0, tau, 1e-13, 1e-10).value;
  }
  auto f = [&](double u) {
    const double theta = tau * std::pow(u, 1.0 / xi);
    return std::exp(-w * (tau - theta));
  };
  const double scale = params.base.gamma_coef * std::pow(tau, xi);
  return scale * quadrature::integrate(f, 0.0, 1.0, 1e-13 / scale, 1e-10).value;
}

double find_psi_horizon(PsiTable& table) {
  // smallest t with Psi(t) >= 14 log 10 (the exponential factor's 1e-14 cut)
  const double cut = 14.0 * std::log(10.0);
  double hi = 1.0;
  table.ensure(hi);
  while (table.psi(hi) < cut) {
    hi *= 2.0;
    table.ensure(hi);
    if (hi > 1e12) throw numerical_error("first_weight_density: Psi grows too slowly");
  }
  double lo = hi / 2.0;
  for (int it = 0; it < 80 && hi - lo > 1e-9 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (table.psi(mid) < cut ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace

double first_weight_density(double w, const ModelParams& params, const PsiTable& table,
                            double horizon) {
  if (!(w > 0.0)) throw std::invalid_argument("first_weight_density: w must be > 0");
  const double sigma = params.levy.sigma;
  const double zeta = params.levy.zeta;
  // w rho(w) = w^(-sigma) exp(-zeta w) / Gamma(1-sigma)
  const double levy_part =
      std::exp(-sigma * std::log(w) - zeta * w - std::lgamma(1.0 - sigma));
  auto outer = [&](double tau) {
    return tilted_base_integral(w, tau, params) * std::exp(-table.psi(tau));
  };
  const double j = quadrature::integrate(outer, 0.0, horizon, 1e-12, 1e-9).value;
  return levy_part * j;
}

double first_weight_density(double w, const ModelParams& params) {
  PsiTable table(params);
  const double horizon = find_psi_horizon(table);
  return first_weight_density(w, params, table, horizon);
}

double first_weight_horizon(PsiTable& table) { return find_psi_horizon(table); }

double first_weight_cdf(double w, const ModelParams& params) {
  if (!(w >= 0.0)) throw std::invalid_argument("first_weight_cdf: w must be >= 0");
  if (w == 0.0) return 0.0;
  auto f = [&](double v) { return first_weight_density(v, params); };
  // the density may diverge like v^-sigma at 0; substitute v = s^(1/(1-sigma))
  const double p = 1.0 / (1.0 - params.levy.sigma);
  auto g = [&](double s) {
    const double v = std::pow(s, p);
    return f(v) * p * std::pow(s, p - 1.0);
  };
  return quadrature::integrate(g, 0.0, std::pow(w, 1.0 - params.levy.sigma), 1e-6, 1e-6, 200)
      .value;
}

}  // namespace micropart
