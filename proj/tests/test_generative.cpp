#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "micropart/crm.hpp"
#include "micropart/generative.hpp"
#include "micropart/quadrature.hpp"
#include "micropart/rng.hpp"

using namespace micropart;

namespace {

// two-sided Kolmogorov-Smirnov distance between sorted draws and a CDF
template <class Cdf>
double ks_distance(std::vector<double> draws, Cdf&& cdf) {
  std::sort(draws.begin(), draws.end());
  const double n = static_cast<double>(draws.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double f = cdf(draws[i]);
    ks = std::max(ks, std::abs(f - static_cast<double>(i) / n));
    ks = std::max(ks, std::abs(f - static_cast<double>(i + 1) / n));
  }
  return ks;
}

// builds the prefix states of a simulated latent state and yields the choice
// made at each step
struct Replay {
  LatentState prefix;  // state after i items
  AllocationChoice choice_at(const LatentState& full, std::size_t i) const {
    const auto label = full.labels[i];
    const bool is_new = label > (prefix.locations.empty()
                                     ? 0
                                     : static_cast<std::int32_t>(prefix.locations.size()));
    if (is_new) return AllocationChoice::opened(full.locations[static_cast<std::size_t>(label) - 1]);
    return AllocationChoice::existing(label);
  }
  void apply(const LatentState& full, std::size_t i) {
    const auto label = full.labels[i];
    if (label > static_cast<std::int32_t>(prefix.locations.size())) {
      prefix.locations.push_back(full.locations[static_cast<std::size_t>(label) - 1]);
      prefix.multiplicities.push_back(1);
    } else {
      ++prefix.multiplicities[static_cast<std::size_t>(label) - 1];
    }
    prefix.labels.push_back(label);
    prefix.arrivals.push_back(full.arrivals[i]);
  }
};

}  // namespace

TEST_CASE("log_joint: gamma-case hand value and indicator") {
  const ModelParams p(1, 1, 0.0, 1);
  LatentState state;
  state.arrivals = {1.0};
  state.locations = {0.5};
  state.labels = {1};
  state.multiplicities = {1};
  const double expected = -std::log(1.5) - (2.0 * std::log(2.0) - 1.0);
  CHECK(log_joint(state, p) == doctest::Approx(expected).epsilon(1e-10));

  // location above the first-appearance arrival violates the indicator
  LatentState bad = state;
  bad.locations = {1.5};
  CHECK(log_joint(bad, p) == -std::numeric_limits<double>::infinity());

  // non-increasing arrivals violate the ordering indicator
  LatentState unordered;
  unordered.arrivals = {1.0, 0.8};
  unordered.locations = {0.5, 0.1};
  unordered.labels = {1, 2};
  unordered.multiplicities = {1, 1};
  CHECK(log_joint(unordered, p) == -std::numeric_limits<double>::infinity());
}

TEST_CASE("predictive_log_factor: hand value, indicator, telescoping") {
  const ModelParams p(1, 1, 0.0, 1);
  LatentState empty;
  const double plf = predictive_log_factor(empty, 1.0, AllocationChoice::opened(0.5), p);
  CHECK(plf == doctest::Approx(-std::log(1.5) - (2.0 * std::log(2.0) - 1.0)).epsilon(1e-10));

  CHECK(predictive_log_factor(empty, 1.0, AllocationChoice::opened(1.5), p) ==
        -std::numeric_limits<double>::infinity());

  // telescoping over simulated trajectories, several parameter regimes
  for (const auto& params : {ModelParams(1, 1, 0.0, 1), ModelParams(1.5, 0.8, 0.5, 2),
                             ModelParams(0.5, 1, 0.3, 0.5)}) {
    Rng rng(314);
    const auto [partition, full] = simulate_partition(40, params, rng, Kernel::reference);
    (void)partition;
    Replay replay;
    double acc = 0.0;
    for (std::size_t i = 0; i < full.size(); ++i) {
      const double before = log_joint(replay.prefix, params);
      const auto choice = replay.choice_at(full, i);
      const double step = predictive_log_factor(replay.prefix, full.arrivals[i], choice, params);
      replay.apply(full, i);
      const double after = log_joint(replay.prefix, params);
      CHECK(after - before == doctest::Approx(step).epsilon(1e-9));
      acc += step;
    }
    CHECK(acc == doctest::Approx(log_joint(full, params)).epsilon(1e-9));
    CHECK(std::isfinite(log_joint(full, params)));
  }
}

TEST_CASE("sample_next_arrival: KS against the quadrature oracle, n = 1") {
  const ModelParams p(1, 1, 0.0, 1);
  // density f(tau) proportional to Hbar(tau) exp(-Psi(tau)) with
  // Hbar = log(1+tau), Psi = (1+tau)log(1+tau) - tau; oracle CDF by trapezoid
  const double t_hi = 12.0;
  const int grid = 60000;
  std::vector<double> cdf(grid + 1, 0.0);
  auto density = [](double t) {
    return std::log1p(t) * std::exp(-((1.0 + t) * std::log1p(t) - t));
  };
  for (int i = 1; i <= grid; ++i) {
    const double a = t_hi * (i - 1) / grid, b = t_hi * i / grid;
    cdf[i] = cdf[i - 1] + 0.5 * (density(a) + density(b)) * (b - a);
  }
  const double total = cdf[grid];
  auto oracle_cdf = [&](double t) {
    if (t >= t_hi) return 1.0;
    const double pos = t / t_hi * grid;
    const int lo = static_cast<int>(pos);
    const double frac = pos - lo;
    return (cdf[lo] * (1 - frac) + cdf[std::min(lo + 1, grid)] * frac) / total;
  };

  LatentState empty;
  PsiTable table(p);
  Rng rng(2718);
  std::vector<double> draws(100000);
  for (auto& d : draws) d = sample_next_arrival(empty, p, table, rng);
  CHECK(ks_distance(draws, oracle_cdf) < 0.01);
}

TEST_CASE("sample_next_arrival: KS with one existing cluster") {
  const ModelParams p(1, 1, 0.0, 1);
  LatentState state;
  state.arrivals = {0.5};
  state.locations = {0.3};
  state.labels = {1};
  state.multiplicities = {1};
  // f(tau) = (1/(1+tau-0.3)) e^(-Psi(tau)) [1/(1+tau-0.3) + log(1+tau)] on tau > 0.5
  auto density = [](double t) {
    const double d = 1.0 + t - 0.3;
    return (1.0 / d) * std::exp(-((1.0 + t) * std::log1p(t) - t)) *
           (1.0 / d + std::log1p(t));
  };
  const double t_lo = 0.5, t_hi = 14.0;
  const int grid = 60000;
  std::vector<double> cdf(grid + 1, 0.0);
  for (int i = 1; i <= grid; ++i) {
    const double a = t_lo + (t_hi - t_lo) * (i - 1) / grid;
    const double b = t_lo + (t_hi - t_lo) * i / grid;
    cdf[i] = cdf[i - 1] + 0.5 * (density(a) + density(b)) * (b - a);
  }
  const double total = cdf[grid];
  auto oracle_cdf = [&](double t) {
    if (t >= t_hi) return 1.0;
    if (t <= t_lo) return 0.0;
    const double pos = (t - t_lo) / (t_hi - t_lo) * grid;
    const int lo = static_cast<int>(pos);
    const double frac = pos - lo;
    return (cdf[lo] * (1 - frac) + cdf[std::min(lo + 1, grid)] * frac) / total;
  };

  PsiTable table(p);
  Rng rng(99991);
  std::vector<double> draws(100000);
  for (auto& d : draws) {
    d = sample_next_arrival(state, p, table, rng);
    CHECK(d > 0.5);
  }
  CHECK(ks_distance(draws, oracle_cdf) < 0.01);

  // reproducibility under a fixed stream
  Rng a(5), b(5);
  CHECK(sample_next_arrival(state, p, table, a) == sample_next_arrival(state, p, table, b));
}

TEST_CASE("sample_next_location: analytic masses") {
  const ModelParams p(1, 1, 0.0, 1);
  // one cluster of size 1 at theta* = 0, tau_n = e - 1: P(new) = 1/(1+1/e)
  LatentState state;
  state.arrivals = {0.4};
  state.locations = {0.0};
  state.labels = {1};
  state.multiplicities = {1};
  const double tau_n = std::exp(1.0) - 1.0;
  const double p_new = 1.0 / (1.0 + std::exp(-1.0));

  PsiTable table(p);
  Rng rng(1234);
  const int reps = 100000;
  int news = 0;
  for (int r = 0; r < reps; ++r) {
    const auto choice = sample_next_location(state, tau_n, p, table, rng);
    if (choice.is_new()) {
      ++news;
      CHECK(choice.location > 0.0);
      CHECK(choice.location <= tau_n);
    }
  }
  const double se = std::sqrt(p_new * (1.0 - p_new) / reps);
  CHECK(std::abs(static_cast<double>(news) / reps - p_new) < 3.0 * se);

  // with no clusters the draw is always new
  LatentState empty;
  for (int r = 0; r < 50; ++r)
    CHECK(sample_next_location(empty, 1.0, p, table, rng).is_new());
}

TEST_CASE("sample_next_location: empirical allocation frequencies, three clusters") {
  const ModelParams p(2, 1, 0.4, 1.5);
  LatentState state;
  state.arrivals = {0.6, 1.0, 1.4, 1.9, 2.2};
  state.locations = {0.5, 0.9, 1.3};
  state.labels = {1, 2, 3, 1, 1};
  state.multiplicities = {3, 1, 1};
  const double tau_n = 2.5;

  std::vector<double> mass(4, 0.0);
  mass[0] = new_cluster_intensity(tau_n, p);
  for (int j = 0; j < 3; ++j)
    mass[static_cast<std::size_t>(j) + 1] =
        (static_cast<double>(state.multiplicities[static_cast<std::size_t>(j)]) - 0.4) /
        (1.5 + tau_n - state.locations[static_cast<std::size_t>(j)]);
  double total = 0.0;
  for (const double m : mass) total += m;

  PsiTable table(p);
  Rng rng(4321);
  const int reps = 100000;
  std::vector<int> counts(4, 0);
  for (int r = 0; r < reps; ++r) {
    const auto choice = sample_next_location(state, tau_n, p, table, rng);
    ++counts[choice.is_new() ? 0 : static_cast<std::size_t>(choice.cluster)];
  }
  for (std::size_t k = 0; k < 4; ++k) {
    const double prob = mass[k] / total;
    const double se = std::sqrt(prob * (1.0 - prob) / reps);
    CHECK(std::abs(static_cast<double>(counts[k]) / reps - prob) < 3.5 * se);
  }
}

TEST_CASE("new-cluster locations follow H_t (KS, singular base measure)") {
  const ModelParams p(0.5, 1, 0.3, 0.8);
  const double tau = 3.0;
  // oracle CDF over theta by direct quadrature away from the singular origin
  auto h_density = [&](double theta) {
    return p.base.density(theta) * std::pow(0.8 + tau - theta, -0.7);
  };
  const double eps = 1e-12;
  const double head = p.base.cumulative(eps) * std::pow(0.8 + tau, -0.7);
  const double total =
      head + quadrature::integrate(h_density, eps, tau, 1e-11, 1e-9).value;
  auto oracle_cdf = [&](double theta) {
    if (theta <= eps) return 0.0;
    return (head + quadrature::integrate(h_density, eps, std::min(theta, tau), 1e-11, 1e-9).value) /
           total;
  };

  LatentState empty;
  PsiTable table(p);
  Rng rng(31337);
  std::vector<double> draws(20000);
  for (auto& d : draws) d = sample_next_location(empty, tau, p, table, rng).location;
  CHECK(ks_distance(draws, oracle_cdf) < 0.015);
}

TEST_CASE("simulate_partition: basic contracts") {
  const ModelParams p(1, 1, 0.5, 1);
  Rng rng(11);
  const auto [one, one_state] = simulate_partition(1, p, rng);
  CHECK(one.labels() == std::vector<std::int32_t>{1});
  CHECK(one_state.locations.size() == 1);

  const auto [partition, state] = simulate_partition(1000, p, rng);
  state.check_consistency();
  const auto s = stats(partition);
  std::int64_t total = 0;
  for (const auto m : s.sizes) total += m;
  CHECK(total == 1000);
  CHECK(std::isfinite(log_joint(state, p)));

  // reference and fast kernels draw identical trajectories from equal seeds
  Rng ra(123), rb(123);
  const auto [pa, sa] = simulate_partition(400, p, ra, Kernel::reference);
  const auto [pb, sb] = simulate_partition(400, p, rb, Kernel::fast);
  CHECK(pa.labels() == pb.labels());
  for (std::size_t i = 0; i < sa.arrivals.size(); ++i)
    CHECK(sa.arrivals[i] == doctest::Approx(sb.arrivals[i]).epsilon(1e-9));
}

TEST_CASE("continue_until_time stops at the horizon") {
  const ModelParams p(1, 1, 0.0, 1);
  LatentState state;
  PsiTable table(p);
  Rng rng(8);
  continue_until_time(state, 25.0, p, table, rng);
  CHECK(!state.arrivals.empty());
  CHECK(state.arrivals.back() <= 25.0);
  state.check_consistency();
}

namespace {
void enumerate_partitions(std::vector<std::int32_t>& labels, std::int32_t k, std::size_t n,
                          const std::function<void(const std::vector<std::int32_t>&)>& visit) {
  if (labels.size() == n) {
    visit(labels);
    return;
  }
  for (std::int32_t c = 1; c <= k + 1; ++c) {
    labels.push_back(c);
    enumerate_partitions(labels, std::max(k, c), n, visit);
    labels.pop_back();
  }
}
}  // namespace

TEST_CASE("two-parameter CRP: seating rule, EPPF normalization, closed form") {
  // P([1,1]) = 1/2 for sigma2 = 0, kappa2 = 1
  CHECK(eppf_two_param_crp(Partition({1, 1}), CrpParams(0.0, 1.0)) ==
        doctest::Approx(std::log(0.5)).epsilon(1e-14));
  CHECK(eppf_two_param_crp(Partition({1}), CrpParams(0.3, 2.0)) == 0.0);

  // normalization over the 15 canonical partitions of [4]
  double mass = 0.0;
  int count = 0;
  std::vector<std::int32_t> labels;
  enumerate_partitions(labels, 0, 4, [&](const std::vector<std::int32_t>& l) {
    mass += std::exp(eppf_two_param_crp(Partition(l), CrpParams(0.3, 2.0)));
    ++count;
  });
  CHECK(count == 15);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));

  // one-parameter closed form alpha^K Gamma(alpha)/Gamma(alpha+n) prod Gamma(m_j)
  Rng rng(21);
  for (int rep = 0; rep < 25; ++rep) {
    const double alpha = 0.5 + 2.0 * rng.uniform();
    const auto p = simulate_two_param_crp(30, CrpParams(0.0, alpha), rng);
    const auto s = stats(p);
    double closed = s.k * std::log(alpha) + std::lgamma(alpha) - std::lgamma(alpha + 30.0);
    for (const auto m : s.sizes) closed += std::lgamma(static_cast<double>(m));
    CHECK(eppf_two_param_crp(p, CrpParams(0.0, alpha)) ==
          doctest::Approx(closed).epsilon(1e-12));
  }

  // CRP grows logarithmically: K_n < 10 log n at sigma2 = 0
  Rng rng2(77);
  const auto crp = simulate_two_param_crp(10000, CrpParams(0.0, 1.0), rng2);
  CHECK(stats(crp).k < 10.0 * std::log(10000.0));

  // continuation extends the prefix
  const Partition prefix({1, 2, 1});
  const auto extended = continue_two_param_crp(prefix, 5, CrpParams(0.2, 1.0), rng2);
  CHECK(extended.size() == 8);
  CHECK(restrict(extended, 3) == prefix);
}
