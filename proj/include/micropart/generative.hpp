#pragma once

#include <cstdint>
#include <vector>

#include "micropart/crm.hpp"
#include "micropart/params.hpp"
#include "micropart/partition.hpp"
#include "micropart/potential.hpp"
#include "micropart/rng.hpp"

namespace micropart {

// Arrival-ordered latent state: arrival times tau_(1..n), cluster locations
// theta*_(1..K) in appearance order, the allocation sequence, and cluster
// multiplicities.
struct LatentState {
  std::vector<double> arrivals;
  std::vector<double> locations;
  std::vector<std::int32_t> labels;
  std::vector<std::int64_t> multiplicities;

  std::size_t size() const { return arrivals.size(); }
  std::int32_t num_clusters() const { return static_cast<std::int32_t>(locations.size()); }
  double last_arrival() const { return arrivals.empty() ? 0.0 : arrivals.back(); }
  Partition partition() const { return Partition(labels); }

  // structural invariants that hold for any simulated state; the density
  // indicator constraints are handled by log_joint instead
  void check_consistency() const;
};

// choice of cluster for the next item: existing 1-based index, or kNew with
// the location of the opened cluster
struct AllocationChoice {
  static constexpr std::int32_t kNew = 0;
  std::int32_t cluster = kNew;
  double location = 0.0;

  bool is_new() const { return cluster == kNew; }
  static AllocationChoice existing(std::int32_t j) { return {j, 0.0}; }
  static AllocationChoice opened(double theta) { return {kNew, theta}; }
};

// log joint density of (theta_(1:n), tau_(1:n)) w.r.t. Lebesgue in
// (tau_(1:n), theta*_(1:K)); -infinity if any indicator constraint fails.
double log_joint(const LatentState& state, const ModelParams& params);

// log of the one-step increment of the unnormalized joint when item n arrives
// at tau_n and makes the given choice; log_joint telescopes over these.
double predictive_log_factor(const LatentState& prev, double tau_n, const AllocationChoice& choice,
                             const ModelParams& params);

// Draws tau_(n) given the state, by inverting the integrated hazard
// Lambda(tau) = Psi(tau) - Psi(tau_prev) + sum_j coef_j log((zeta+tau-theta_j)/(zeta+tau_prev-theta_j)):
// the predictive tau-density is exactly hazard * exp(-Lambda), so solving
// Lambda(tau) = Exp(1) inverts its CDF without any grid bias.
double sample_next_arrival(const LatentState& state, const ModelParams& params, PsiTable& table,
                           Rng& rng);

// Existing cluster j with mass (m_j - sigma)/(tau_n - theta*_j + zeta), new
// cluster with mass Hbar(tau_n); a new location is drawn from the normalized
// H_t distribution by numeric CDF inversion in u = (theta/tau)^xi.
AllocationChoice sample_next_location(const LatentState& state, double tau_n,
                                      const ModelParams& params, PsiTable& table, Rng& rng);

std::pair<Partition, LatentState> simulate_partition(std::size_t n, const ModelParams& params,
                                                     Rng& rng, Kernel kernel = Kernel::fast);

// Extends `state` by m further items in place (used for posterior-predictive
// continuation and long-horizon diagnostics).
void continue_simulation(LatentState& state, std::size_t m, const ModelParams& params,
                         PsiTable& table, Rng& rng, Kernel kernel = Kernel::fast);

// Runs the simulation until the arrival clock passes t_horizon, instead of a
// fixed item count.
void continue_until_time(LatentState& state, double t_horizon, const ModelParams& params,
                         PsiTable& table, Rng& rng, Kernel kernel = Kernel::fast);

// --- two-parameter CRP baseline ---

Partition simulate_two_param_crp(std::size_t n, const CrpParams& crp, Rng& rng);

// continuation of the seating process from an observed prefix
Partition continue_two_param_crp(const Partition& prefix, std::size_t m, const CrpParams& crp,
                                 Rng& rng);

// log EPPF in order-of-appearance form (product of seating conditionals)
double eppf_two_param_crp(const Partition& p, const CrpParams& crp);

}  // namespace micropart
