#include "micropart/generative.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "micropart/errors.hpp"
#include "micropart/quadrature.hpp"

namespace micropart {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

void LatentState::check_consistency() const {
  if (labels.size() != arrivals.size())
    throw std::invalid_argument("LatentState: labels/arrivals length mismatch");
  for (std::size_t i = 1; i < arrivals.size(); ++i)
    if (!(arrivals[i] > arrivals[i - 1]))
      throw std::invalid_argument("LatentState: arrivals must be strictly increasing");
  std::vector<std::int64_t> m(locations.size(), 0);
  std::int32_t max_label = 0;
  for (const auto c : labels) {
    if (c < 1 || c > max_label + 1)
      throw std::invalid_argument("LatentState: allocation sequence not canonical");
    max_label = std::max(max_label, c);
    if (static_cast<std::size_t>(c) > m.size())
      throw std::invalid_argument("LatentState: label exceeds number of locations");
    ++m[static_cast<std::size_t>(c) - 1];
  }
  if (m != multiplicities)
    throw std::invalid_argument("LatentState: multiplicities inconsistent with allocations");
}

double log_joint(const LatentState& state, const ModelParams& params) {
  if (state.size() == 0) return 0.0;
  const double tau_n = state.arrivals.back();
  for (std::size_t i = 1; i < state.arrivals.size(); ++i)
    if (!(state.arrivals[i] > state.arrivals[i - 1])) return kNegInf;
  // indicator constraints: theta_(i) <= tau_(i) reduces to a check at each
  // cluster's first appearance because arrivals increase
  std::int32_t seen = 0;
  for (std::size_t i = 0; i < state.labels.size(); ++i) {
    const std::int32_t c = state.labels[i];
    if (c == seen + 1) {
      const double theta = state.locations[static_cast<std::size_t>(c) - 1];
      if (!(theta > 0.0) || theta > state.arrivals[i]) return kNegInf;
      ++seen;
    }
  }
  double acc = 0.0;
  for (std::size_t j = 0; j < state.locations.size(); ++j) {
    acc += log_kappa(state.multiplicities[j], tau_n - state.locations[j], params.levy);
    acc += params.base.log_density(state.locations[j]);
  }
  return acc - psi_base_integral(tau_n, params);
}

double predictive_log_factor(const LatentState& prev, double tau_n, const AllocationChoice& choice,
                             const ModelParams& params) {
  const double sigma = params.levy.sigma;
  const double zeta = params.levy.zeta;
  const double tau_prev = prev.last_arrival();
  if (!(tau_n > tau_prev)) return kNegInf;
  double acc = 0.0;
  for (std::size_t j = 0; j < prev.locations.size(); ++j) {
    const double coef = static_cast<double>(prev.multiplicities[j]) - sigma;
    acc -= coef * std::log1p((tau_n - tau_prev) / (zeta + tau_prev - prev.locations[j]));
  }
  acc -= psi_base_integral(tau_n, params) - psi_base_integral(tau_prev, params);
  if (choice.is_new()) {
    if (!(choice.location > 0.0) || choice.location > tau_n) return kNegInf;
    acc += params.base.log_density(choice.location) +
           (sigma - 1.0) * std::log(zeta + tau_n - choice.location);
  } else {
    const auto j = static_cast<std::size_t>(choice.cluster) - 1;
    if (choice.cluster < 1 || j >= prev.locations.size())
      throw std::invalid_argument("predictive_log_factor: cluster index out of range");
    const double coef = static_cast<double>(prev.multiplicities[j]) - sigma;
    acc += std::log(coef) - std::log(zeta + tau_n - prev.locations[j]);
  }
  return acc;
}

namespace {

// Inverts Lambda(tau) = target for the next arrival; Lambda is the integrated
// hazard from tau_prev, psi_prev = Psi(tau_prev). Newton safeguarded by
// bisection on a bracket found by doubling.
template <class Potential>
double invert_arrival(const Potential& pot, double tau_prev, double psi_prev, double target,
                      PsiTable& table) {
  auto lambda_of = [&](double tau) {
    return (table.psi(tau) - psi_prev) + pot.delta_log_sum(tau_prev, tau);
  };
  auto rate_of = [&](double tau) { return table.hazard(tau) + pot.hazard_sum(tau); };

  // initial step from the current total intensity
  table.ensure(tau_prev * 1.5 + 1.0);
  double rate0 = rate_of(tau_prev > 0.0 ? tau_prev : std::min(1e-8, 0.5 * table.coverage()));
  double step = rate0 > 0.0 ? target / rate0 : 1.0;
  if (!(step > 0.0) || !std::isfinite(step)) step = 1.0;
  step = std::clamp(step, 1e-9, 1e5);
  double lo = tau_prev, hi = tau_prev + step;
  table.ensure(hi);
  double f_hi = lambda_of(hi) - target;
  int guard = 0;
  while (f_hi < 0.0) {
    lo = hi;
    hi = tau_prev + (hi - tau_prev) * 2.0;
    table.ensure(hi);
    f_hi = lambda_of(hi) - target;
    if (++guard > 400) throw numerical_error("sample_next_arrival: bracket expansion failed");
  }
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 100; ++it) {
    const double f = lambda_of(x) - target;
    if (f > 0.0)
      hi = x;
    else
      lo = x;
    if (std::abs(f) <= 1e-12 * (1.0 + target) || hi - lo <= 1e-14 * (1.0 + x)) break;
    const double deriv = rate_of(x);
    double next = deriv > 0.0 ? x - f / deriv : 0.5 * (lo + hi);
    if (!(next > lo) || !(next < hi)) next = 0.5 * (lo + hi);
    x = next;
  }
  return x;
}

// CDF inversion for the diffuse location distribution H_t: in u-coordinates
// (theta = t u^(1/xi)) the density is proportional to
// f(u) = (t (1 - u^(1/xi)) + zeta)^(sigma-1) on [0,1], bounded and increasing.
double sample_h_location(double t, const ModelParams& params, double target_quantile) {
  const double xi = params.base.xi;
  const double sigma = params.levy.sigma;
  const double zeta = params.levy.zeta;
  auto f = [&](double u) {
    return std::pow(t * (1.0 - std::pow(u, 1.0 / xi)) + zeta, sigma - 1.0);
  };
  // adaptive panel list refined toward u = 1 where the density peaks
  struct Panel {
    double a, b, mass;
  };
  std::vector<Panel> panels;
  std::vector<Panel> stack{{0.0, 1.0, quadrature::panel_k15(f, 0.0, 1.0).value}};
  // refine until each panel's K15 estimate is stable to 1e-9 relative
  while (!stack.empty()) {
    Panel p = stack.back();
    stack.pop_back();
    const double mid = 0.5 * (p.a + p.b);
    const double left = quadrature::panel_k15(f, p.a, mid).value;
    const double right = quadrature::panel_k15(f, mid, p.b).value;
    if (std::abs(left + right - p.mass) <= 1e-9 * (left + right) || p.b - p.a < 1e-13) {
      panels.push_back({p.a, mid, left});
      panels.push_back({mid, p.b, right});
    } else {
      stack.push_back({p.a, mid, left});
      stack.push_back({mid, p.b, right});
    }
  }
  std::sort(panels.begin(), panels.end(), [](const Panel& x, const Panel& y) { return x.a < y.a; });
  double total = 0.0;
  for (const auto& p : panels) total += p.mass;
  double want = target_quantile * total;
  std::size_t idx = 0;
  while (idx + 1 < panels.size() && want > panels[idx].mass) {
    want -= panels[idx].mass;
    ++idx;
  }
  // bisect inside the panel on the local cumulative
  double lo = panels[idx].a, hi = panels[idx].b;
  for (int it = 0; it < 60 && hi - lo > 1e-14; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double cum = quadrature::panel_k15(f, panels[idx].a, mid).value;
    if (cum < want)
      lo = mid;
    else
      hi = mid;
  }
  const double u = 0.5 * (lo + hi);
  return t * std::pow(u, 1.0 / xi);
}

template <class Potential>
Potential potential_from(const LatentState& state, const ModelParams& params) {
  Potential pot(params.levy.zeta, params.levy.sigma);
  for (std::size_t j = 0; j < state.locations.size(); ++j) {
    pot.add_cluster(state.locations[j]);
    for (std::int64_t r = 1; r < state.multiplicities[j]; ++r) pot.bump(j);
  }
  if (!state.arrivals.empty()) pot.advance(state.arrivals.back());
  return pot;
}

template <class Potential>
struct Engine {
  const ModelParams& params;
  PsiTable& table;
  LatentState& state;
  Potential pot;
  double psi_prev;
  std::vector<double> scratch;

  Engine(const ModelParams& params_, PsiTable& table_, LatentState& state_)
      : params(params_), table(table_), state(state_),
        pot(potential_from<Potential>(state_, params_)) {
    table.ensure(std::max(state.last_arrival(), 1.0));
    psi_prev = state.arrivals.empty() ? 0.0 : table.psi(state.last_arrival());
  }

  void step(Rng& rng) {
    const double target = rng.exponential();
    const double tau = invert_arrival(pot, state.last_arrival(), psi_prev, target, table);
    table.ensure(tau);

    // allocation masses: existing clusters and Hbar for a new one
    pot.masses(tau, scratch);
    double total = table.hazard(tau);
    const double new_mass = total;
    for (const double mass : scratch) total += mass;
    double draw = rng.uniform() * total;
    std::int32_t label = 0;
    if (draw >= new_mass) {
      draw -= new_mass;
      std::size_t j = 0;
      for (; j + 1 < scratch.size(); ++j) {
        if (draw < scratch[j]) break;
        draw -= scratch[j];
      }
      label = static_cast<std::int32_t>(j) + 1;
    }
    if (label == 0) {
      const double theta = sample_h_location(tau, params, rng.uniform());
      state.locations.push_back(theta);
      state.multiplicities.push_back(1);
      pot.add_cluster(theta);
      label = static_cast<std::int32_t>(state.locations.size());
    } else {
      ++state.multiplicities[static_cast<std::size_t>(label) - 1];
      pot.bump(static_cast<std::size_t>(label) - 1);
    }
    state.arrivals.push_back(tau);
    state.labels.push_back(label);
    psi_prev = table.psi(tau);
    pot.advance(tau);
  }
};

template <class Potential>
void run_steps(LatentState& state, std::size_t m, const ModelParams& params, PsiTable& table,
               Rng& rng) {
  Engine<Potential> engine(params, table, state);
  for (std::size_t i = 0; i < m; ++i) engine.step(rng);
}

template <class Potential>
void run_until(LatentState& state, double t_horizon, const ModelParams& params, PsiTable& table,
               Rng& rng) {
  Engine<Potential> engine(params, table, state);
  while (true) {
    const double before = state.last_arrival();
    engine.step(rng);
    if (state.last_arrival() > t_horizon) {
      // the step crossed the horizon; drop the overshooting item
      state.arrivals.pop_back();
      const auto label = state.labels.back();
      state.labels.pop_back();
      auto& mult = state.multiplicities[static_cast<std::size_t>(label) - 1];
      if (--mult == 0) {
        state.multiplicities.pop_back();
        state.locations.pop_back();
      }
      (void)before;
      return;
    }
  }
}

}  // namespace

double sample_next_arrival(const LatentState& state, const ModelParams& params, PsiTable& table,
                           Rng& rng) {
  auto pot = potential_from<ClusterPotentialRef>(state, params);
  table.ensure(std::max(state.last_arrival(), 1.0));
  const double psi_prev = state.arrivals.empty() ? 0.0 : table.psi(state.last_arrival());
  return invert_arrival(pot, state.last_arrival(), psi_prev, rng.exponential(), table);
}

AllocationChoice sample_next_location(const LatentState& state, double tau_n,
                                      const ModelParams& params, PsiTable& table, Rng& rng) {
  if (!(tau_n > state.last_arrival()))
    throw std::invalid_argument("sample_next_location: tau_n must exceed the last arrival");
  table.ensure(tau_n);
  const double sigma = params.levy.sigma;
  const double zeta = params.levy.zeta;
  const double new_mass = table.hazard(tau_n);
  double total = new_mass;
  for (std::size_t j = 0; j < state.locations.size(); ++j)
    total += (static_cast<double>(state.multiplicities[j]) - sigma) /
             (zeta + tau_n - state.locations[j]);
  double draw = rng.uniform() * total;
  if (draw < new_mass) return AllocationChoice::opened(sample_h_location(tau_n, params, rng.uniform()));
  draw -= new_mass;
  for (std::size_t j = 0; j + 1 < state.locations.size(); ++j) {
    const double mass = (static_cast<double>(state.multiplicities[j]) - sigma) /
                        (zeta + tau_n - state.locations[j]);
    if (draw < mass) return AllocationChoice::existing(static_cast<std::int32_t>(j) + 1);
    draw -= mass;
  }
  return AllocationChoice::existing(static_cast<std::int32_t>(state.locations.size()));
}

std::pair<Partition, LatentState> simulate_partition(std::size_t n, const ModelParams& params,
                                                     Rng& rng, Kernel kernel) {
  if (n < 1) throw std::invalid_argument("simulate_partition: n must be >= 1");
  params.validate();
  LatentState state;
  PsiTable table(params);
  if (kernel == Kernel::fast)
    run_steps<ClusterPotentialFast>(state, n, params, table, rng);
  else
    run_steps<ClusterPotentialRef>(state, n, params, table, rng);
  return {state.partition(), std::move(state)};
}

void continue_simulation(LatentState& state, std::size_t m, const ModelParams& params,
                         PsiTable& table, Rng& rng, Kernel kernel) {
  if (kernel == Kernel::fast)
    run_steps<ClusterPotentialFast>(state, m, params, table, rng);
  else
    run_steps<ClusterPotentialRef>(state, m, params, table, rng);
}

void continue_until_time(LatentState& state, double t_horizon, const ModelParams& params,
                         PsiTable& table, Rng& rng, Kernel kernel) {
  if (kernel == Kernel::fast)
    run_until<ClusterPotentialFast>(state, t_horizon, params, table, rng);
  else
    run_until<ClusterPotentialRef>(state, t_horizon, params, table, rng);
}

Partition simulate_two_param_crp(std::size_t n, const CrpParams& crp, Rng& rng) {
  if (n < 1) throw std::invalid_argument("simulate_two_param_crp: n must be >= 1");
  crp.validate();
  return continue_two_param_crp(Partition(std::vector<std::int32_t>{1}), n - 1, crp, rng);
}

Partition continue_two_param_crp(const Partition& prefix, std::size_t m, const CrpParams& crp,
                                 Rng& rng) {
  auto st = stats(prefix);
  std::vector<std::int32_t> labels = prefix.labels();
  std::vector<std::int64_t> sizes = st.sizes;
  for (std::size_t i = prefix.size(); i < prefix.size() + m; ++i) {
    const double k = static_cast<double>(sizes.size());
    const double total = static_cast<double>(i) + crp.strength;
    double draw = rng.uniform() * total;
    const double new_mass = crp.strength + crp.discount * k;
    std::int32_t label;
    if (draw < new_mass) {
      sizes.push_back(1);
      label = static_cast<std::int32_t>(sizes.size());
    } else {
      draw -= new_mass;
      std::size_t j = 0;
      for (; j + 1 < sizes.size(); ++j) {
        const double mass = static_cast<double>(sizes[j]) - crp.discount;
        if (draw < mass) break;
        draw -= mass;
      }
      ++sizes[j];
      label = static_cast<std::int32_t>(j) + 1;
    }
    labels.push_back(label);
  }
  return Partition(std::move(labels));
}

double eppf_two_param_crp(const Partition& p, const CrpParams& crp) {
  crp.validate();
  std::vector<std::int64_t> sizes;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto c = static_cast<std::size_t>(p.label(i));
    if (i == 0) {
      sizes.push_back(1);
      continue;
    }
    const double total = static_cast<double>(i) + crp.strength;
    if (c == sizes.size() + 1) {
      acc += std::log(crp.strength + crp.discount * static_cast<double>(sizes.size())) -
             std::log(total);
      sizes.push_back(1);
    } else {
      acc += std::log(static_cast<double>(sizes[c - 1]) - crp.discount) - std::log(total);
      ++sizes[c - 1];
    }
  }
  return acc;
}

}  // namespace micropart
