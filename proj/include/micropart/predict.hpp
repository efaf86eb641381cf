#pragma once

#include <cstdint>
#include <vector>

#include "micropart/inference.hpp"
#include "micropart/partition.hpp"

namespace micropart {

struct PredictiveSample {
  Partition continuation;   // length n + m, extends the observed prefix
  std::size_t source_particle = 0;
  // trajectories[j][i] = size of training cluster j+1 after item n+1+i
  std::vector<std::vector<std::int64_t>> trajectories;
};

// Posterior-predictive continuations: each sample picks one particle by
// weight and runs the generative recursion m further steps from its latent
// state. Samples run in parallel over a thread-local copy of the Psi table.
std::vector<PredictiveSample> predict_continuation(const ParticleSystem& system, std::size_t m,
                                                   const ModelParams& params, Rng& rng,
                                                   std::size_t n_samples = 100, int threads = 0);

// Continuations of the two-parameter CRP seating process from the prefix.
std::vector<PredictiveSample> predict_continuation_crp(const Partition& prefix, std::size_t m,
                                                       const CrpParams& crp, Rng& rng,
                                                       std::size_t n_samples = 100);

// Per-sample L2 error of predicted training-cluster sizes over the test
// steps; clusters that first appear in the test span do not enter.
std::vector<double> l2_error(const std::vector<PredictiveSample>& samples, const Partition& truth,
                             std::size_t n_train);

struct ProportionBand {
  std::int64_t r = 0;
  double lower = 0.0;
  double upper = 0.0;
};

// Pointwise credible intervals for the proportion K_{n+m,r} / K_{n+m} of
// clusters of size r, from the empirical sample quantiles.
std::vector<ProportionBand> size_proportion_bands(const std::vector<PredictiveSample>& samples,
                                                  std::int64_t r_max, double level = 0.95);

}  // namespace micropart
