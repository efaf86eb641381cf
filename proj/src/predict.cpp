#include "micropart/predict.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "micropart/generative.hpp"

namespace micropart {

namespace {

// records the per-step sizes of the first k_train clusters while extending
std::vector<std::vector<std::int64_t>> track_trajectories(const Partition& continuation,
                                                          std::size_t n_train,
                                                          std::int32_t k_train) {
  const std::size_t m = continuation.size() - n_train;
  std::vector<std::int64_t> sizes(static_cast<std::size_t>(k_train), 0);
  for (std::size_t i = 0; i < n_train; ++i) {
    const auto c = static_cast<std::size_t>(continuation.label(i));
    if (c <= sizes.size()) ++sizes[c - 1];
  }
  std::vector<std::vector<std::int64_t>> out(static_cast<std::size_t>(k_train),
                                             std::vector<std::int64_t>(m, 0));
  for (std::size_t i = 0; i < m; ++i) {
    const auto c = static_cast<std::size_t>(continuation.label(n_train + i));
    if (c <= sizes.size()) ++sizes[c - 1];
    for (std::size_t j = 0; j < sizes.size(); ++j) out[j][i] = sizes[j];
  }
  return out;
}

}  // namespace

std::vector<PredictiveSample> predict_continuation(const ParticleSystem& system, std::size_t m,
                                                   const ModelParams& params, Rng& rng,
                                                   std::size_t n_samples, int threads) {
  if (system.current_step() != system.total_steps())
    throw std::invalid_argument("predict_continuation: system has unconsumed observations");
  const std::size_t n = system.current_step();
  const auto k_train = static_cast<std::int32_t>(stats(system.observed()).k);

  // particle choices and per-sample rng substreams drawn up front so the
  // parallel continuation order cannot matter
  std::vector<std::size_t> chosen(n_samples);
  std::vector<Rng> streams;
  streams.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    chosen[s] = system.sample_particle_index(rng);
    streams.push_back(rng.fork(s + 1));
  }

  std::vector<PredictiveSample> samples;
  samples.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s)
    samples.push_back(PredictiveSample{system.observed(), chosen[s], {}});

  const int n_threads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel num_threads(n_threads)
  {
    PsiTable table(params);  // thread-local; extended as continuations advance
#pragma omp for schedule(dynamic)
    for (std::size_t s = 0; s < n_samples; ++s) {
      LatentState state = system.particle_state(chosen[s]);
      Rng local = streams[s];
      continue_simulation(state, m, params, table, local);
      samples[s].continuation = state.partition();
      samples[s].trajectories = track_trajectories(samples[s].continuation, n, k_train);
    }
  }
  return samples;
}

std::vector<PredictiveSample> predict_continuation_crp(const Partition& prefix, std::size_t m,
                                                       const CrpParams& crp, Rng& rng,
                                                       std::size_t n_samples) {
  const auto k_train = stats(prefix).k;
  std::vector<PredictiveSample> samples;
  samples.reserve(n_samples);
  for (std::size_t s = 0; s < n_samples; ++s) {
    Rng local = rng.fork(s + 1);
    Partition continuation = continue_two_param_crp(prefix, m, crp, local);
    samples.push_back(PredictiveSample{
        continuation, s, track_trajectories(continuation, prefix.size(), k_train)});
  }
  return samples;
}

std::vector<double> l2_error(const std::vector<PredictiveSample>& samples, const Partition& truth,
                             std::size_t n_train) {
  if (n_train < 1 || n_train >= truth.size())
    throw std::invalid_argument("l2_error: n_train must lie in [1, n)");
  const std::size_t n_test = truth.size() - n_train;
  const Partition prefix = restrict(truth, n_train);
  const auto k_train = static_cast<std::size_t>(prefix.num_clusters());
  const auto truth_traj = size_trajectories(truth);

  std::vector<double> errors;
  errors.reserve(samples.size());
  for (const auto& sample : samples) {
    if (sample.continuation.size() != truth.size())
      throw std::invalid_argument("l2_error: sample length does not match the truth");
    for (std::size_t i = 0; i < n_train; ++i)
      if (sample.continuation.label(i) != truth.label(i))
        throw std::invalid_argument("l2_error: sample prefix does not match the truth prefix");
    if (sample.trajectories.size() < k_train)
      throw std::invalid_argument("l2_error: sample lacks training-cluster trajectories");
    double acc = 0.0;
    for (std::size_t j = 0; j < k_train; ++j) {
      double cluster_acc = 0.0;
      for (std::size_t i = 0; i < n_test; ++i) {
        const double diff = static_cast<double>(sample.trajectories[j][i]) -
                            static_cast<double>(truth_traj[j][n_train + i]);
        cluster_acc += diff * diff;
      }
      acc += cluster_acc / static_cast<double>(n_test);
    }
    errors.push_back(acc / static_cast<double>(k_train));
  }
  return errors;
}

std::vector<ProportionBand> size_proportion_bands(const std::vector<PredictiveSample>& samples,
                                                  std::int64_t r_max, double level) {
  if (samples.size() < 20)
    throw std::invalid_argument("size_proportion_bands: need at least 20 samples");
  if (!(level > 0.0 && level < 1.0))
    throw std::invalid_argument("size_proportion_bands: level must lie in (0,1)");

  std::vector<std::vector<double>> proportions(static_cast<std::size_t>(r_max),
                                               std::vector<double>(samples.size(), 0.0));
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const auto st = stats(samples[s].continuation);
    for (const auto& [r, count] : st.size_histogram)
      if (r >= 1 && r <= r_max)
        proportions[static_cast<std::size_t>(r) - 1][s] =
            static_cast<double>(count) / static_cast<double>(st.k);
  }

  auto quantile = [](std::vector<double>& values, double q) {
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
  };

  std::vector<ProportionBand> bands;
  bands.reserve(static_cast<std::size_t>(r_max));
  const double tail = 0.5 * (1.0 - level);
  for (std::int64_t r = 1; r <= r_max; ++r) {
    auto& column = proportions[static_cast<std::size_t>(r) - 1];
    ProportionBand band;
    band.r = r;
    band.lower = quantile(column, tail);
    band.upper = quantile(column, 1.0 - tail);
    bands.push_back(band);
  }
  return bands;
}

}  // namespace micropart
