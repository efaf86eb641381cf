#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "micropart/crm.hpp"
#include "micropart/generative.hpp"
#include "micropart/params.hpp"
#include "micropart/partition.hpp"
#include "micropart/potential.hpp"
#include "micropart/rng.hpp"

namespace micropart {

struct FitConfig {
  std::size_t n_particles = 10000;
  double ess_threshold = 0.5;          // resample when ESS < threshold * N
  double proposal_scale_init = 1.0;    // truncated-normal scale before any gap is observed
  std::size_t sigma_grid = 25;         // equidistant points in [0,1)
  std::vector<double> xi_grid = {1.0, 2.0, 3.0};
  double zeta_lo = 0.0;
  double zeta_hi = 100.0;
  int zeta_depth = 8;                  // golden-section iterations after the two seeds
  int replicates = 3;                  // SMC replicates averaged per objective evaluation
  double gamma_coef = 1.0;             // base-measure multiplier, held fixed
  std::uint64_t seed = 1;
  Kernel kernel = Kernel::fast;
  int threads = 0;                     // 0 = library default; grid points run in parallel
  bool keep_trajectories = false;      // retain per-particle arrival histories
};

// Weighted particle approximation of Pr(theta, tau | Pi_n) built one observed
// item at a time. Particles carry their own RNG substream, so results are
// identical no matter how many threads propagate them.
class ParticleSystem {
public:
  ParticleSystem(Partition observed, const ModelParams& params, const FitConfig& config,
                 std::uint64_t seed);
  ~ParticleSystem();
  ParticleSystem(ParticleSystem&&) noexcept;
  ParticleSystem& operator=(ParticleSystem&&) noexcept;

  // consume the next observed item; throws degeneracy_error when every
  // particle's weight vanishes
  void step();
  void run_to_end();

  std::size_t current_step() const;  // items consumed so far
  std::size_t total_steps() const;
  double log_evidence() const;
  double ess() const;
  const std::vector<double>& ess_trace() const;
  std::size_t num_particles() const;

  const Partition& observed() const;
  const ModelParams& params() const;

  // normalized log weights, fixed particle order
  std::vector<double> normalized_log_weights() const;
  // draws a particle index proportionally to weight
  std::size_t sample_particle_index(Rng& rng) const;
  // latent state of one particle; arrival history is full when the system
  // was built with keep_trajectories, otherwise only the last arrival is set
  LatentState particle_state(std::size_t p) const;

  // permutes the particle order in place (the estimator must not care)
  void permute_particles(const std::vector<std::size_t>& perm);

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct LoglikResult {
  double log_evidence = 0.0;
  std::vector<double> ess_trace;
};

// Unbiased SMC estimate of log Pr(Pi_n | params).
LoglikResult smc_marginal_loglik(const Partition& p, const ModelParams& params,
                                 const FitConfig& config, std::uint64_t seed);

struct SurfacePoint {
  double xi = 0.0;
  double sigma = 0.0;
  double zeta = 0.0;            // maximizer found by the golden-section search
  double loglik_mean = 0.0;     // mean over replicates at (xi, sigma, zeta)
  double loglik_sd = 0.0;       // replicate spread
  int replicates = 0;
  bool ok = true;
  std::string message;
};

struct FitResult {
  ModelParams best;
  double best_loglik = 0.0;
  std::vector<SurfacePoint> surface;  // one row per (xi, sigma) grid point
};

// Grid maximum likelihood: SMC estimates on the (xi, sigma) grid with the
// zeta profile maximized by golden-section search on [zeta_lo, zeta_hi],
// each objective being a replicate mean with common random numbers across
// zeta evaluations. Degenerate grid points are reported, not fatal.
FitResult fit_mle(const Partition& p, const FitConfig& config);

struct CrpFitResult {
  CrpParams best;
  double best_loglik = 0.0;
  std::vector<SurfacePoint> surface;  // xi unused; sigma = discount, zeta = strength
};

// Same protocol for the two-parameter CRP, with the exact EPPF in place of
// SMC (no replicates needed).
CrpFitResult fit_two_param_crp(const Partition& p, const FitConfig& config);

// Conditionally independent gamma draws of the atom weights
// omega*_j ~ Gamma(m_j - sigma, zeta + tau_(n) - theta*_j).
std::vector<double> posterior_atom_weights(const LatentState& state, const ModelParams& params,
                                           Rng& rng);

}  // namespace micropart
