#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "micropart/generative.hpp"
#include "micropart/inference.hpp"
#include "micropart/predict.hpp"
#include "micropart/rng.hpp"

using namespace micropart;

namespace {

ParticleSystem fitted_system(const Partition& observed, const ModelParams& params,
                             std::size_t n_particles, std::uint64_t seed) {
  FitConfig config;
  config.n_particles = n_particles;
  ParticleSystem system(observed, params, config, seed);
  system.run_to_end();
  return system;
}

}  // namespace

TEST_CASE("predict_continuation: restriction, monotonicity, m = 0") {
  const ModelParams p(1, 1, 0.4, 2.0);
  Rng rng(15);
  const auto [observed, state] = simulate_partition(60, p, rng);
  (void)state;
  auto system = fitted_system(observed, p, 400, 5);

  Rng prng(1);
  const auto samples = predict_continuation(system, 25, p, prng, 30, 1);
  CHECK(samples.size() == 30);
  for (const auto& sample : samples) {
    CHECK(sample.continuation.size() == 85);
    CHECK(restrict(sample.continuation, 60) == observed);
    for (const auto& traj : sample.trajectories) {
      for (std::size_t i = 1; i < traj.size(); ++i) CHECK(traj[i] >= traj[i - 1]);
      CHECK(traj.size() == 25);
    }
  }

  Rng prng0(2);
  const auto none = predict_continuation(system, 0, p, prng0, 5, 1);
  for (const auto& sample : none) CHECK(sample.continuation == observed);
}

TEST_CASE("predict_continuation is deterministic given the rng seed") {
  const ModelParams p(1, 1, 0.3, 1.0);
  Rng rng(7);
  const auto [observed, state] = simulate_partition(40, p, rng);
  (void)state;
  auto system = fitted_system(observed, p, 200, 11);

  Rng a(99), b(99);
  const auto sa = predict_continuation(system, 10, p, a, 8, 1);
  const auto sb = predict_continuation(system, 10, p, b, 8, 2);  // thread count differs
  for (std::size_t s = 0; s < sa.size(); ++s)
    CHECK(sa[s].continuation == sb[s].continuation);
}

TEST_CASE("l2_error: zero for perfect prediction, one for off-by-one") {
  const Partition truth({1, 2, 1, 2, 1, 1});
  const std::size_t n_train = 3;

  // build a sample that reproduces the truth exactly
  PredictiveSample perfect{truth, 0, {}};
  const auto trajs = size_trajectories(truth);
  for (std::size_t j = 0; j < 2; ++j)
    perfect.trajectories.push_back(std::vector<std::int64_t>(trajs[j].begin() + 3, trajs[j].end()));
  CHECK(l2_error({perfect}, truth, n_train)[0] == 0.0);

  // off by one on every cluster and step
  PredictiveSample off = perfect;
  for (auto& traj : off.trajectories)
    for (auto& v : traj) v += 1;
  CHECK(l2_error({off}, truth, n_train)[0] == doctest::Approx(1.0));

  // prefix mismatch is a domain error
  PredictiveSample bad = perfect;
  bad.continuation = Partition({1, 1, 2, 2, 1, 1});
  CHECK_THROWS_AS(l2_error({bad}, truth, n_train), std::invalid_argument);
}

TEST_CASE("l2_error ignores clusters that first appear in the test span") {
  // training prefix has one cluster; the test span opens a second one
  const Partition truth({1, 1, 2, 2});
  PredictiveSample sample{Partition({1, 1, 1, 2}), 0, {}};
  // training cluster 1 trajectory under the sample: sizes 3, 3
  sample.trajectories = {{3, 3}};
  // truth trajectory for cluster 1: 2, 2 -> squared error 1 each step
  const auto errors = l2_error({sample}, truth, 2);
  CHECK(errors[0] == doctest::Approx(1.0));
}

TEST_CASE("size_proportion_bands: sums, containment, ordering") {
  const ModelParams p(1, 1, 0.5, 1.0);
  Rng rng(23);
  const auto [observed, state] = simulate_partition(80, p, rng);
  (void)state;
  auto system = fitted_system(observed, p, 300, 9);
  Rng prng(3);
  const auto samples = predict_continuation(system, 40, p, prng, 60, 1);

  // proportions sum to one over all r for each sample
  for (const auto& sample : samples) {
    const auto st = stats(sample.continuation);
    double total = 0.0;
    for (const auto& [r, count] : st.size_histogram)
      total += static_cast<double>(count) / static_cast<double>(st.k);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }

  const auto bands = size_proportion_bands(samples, 6, 0.95);
  CHECK(bands.size() == 6);
  for (const auto& band : bands) {
    CHECK(band.lower <= band.upper + 1e-15);
    CHECK(band.lower >= 0.0);
    CHECK(band.upper <= 1.0);
  }

  // the pointwise median proportion lies inside the band
  for (const auto& band : bands) {
    std::vector<double> column;
    for (const auto& sample : samples) {
      const auto st = stats(sample.continuation);
      const auto it = st.size_histogram.find(band.r);
      column.push_back(it == st.size_histogram.end()
                           ? 0.0
                           : static_cast<double>(it->second) / static_cast<double>(st.k));
    }
    std::nth_element(column.begin(), column.begin() + column.size() / 2, column.end());
    const double median = column[column.size() / 2];
    CHECK(median >= band.lower - 1e-12);
    CHECK(median <= band.upper + 1e-12);
  }

  CHECK_THROWS_AS(size_proportion_bands({samples.begin(), samples.begin() + 5}, 4, 0.95),
                  std::invalid_argument);
}

TEST_CASE("crp continuation samples keep the prefix and trajectories") {
  Rng rng(4);
  const auto prefix = simulate_two_param_crp(50, CrpParams(0.3, 1.5), rng);
  Rng prng(5);
  const auto samples = predict_continuation_crp(prefix, 30, CrpParams(0.3, 1.5), prng, 25);
  CHECK(samples.size() == 25);
  for (const auto& sample : samples) {
    CHECK(sample.continuation.size() == 80);
    CHECK(restrict(sample.continuation, 50) == prefix);
    CHECK(sample.trajectories.size() == static_cast<std::size_t>(stats(prefix).k));
  }
}
