#include "doctest.h"

#include <string>
#include <vector>

#include "micropart/partition.hpp"
#include "micropart/rng.hpp"

using namespace micropart;

TEST_CASE("canonicalize: relabeling by first appearance") {
  CHECK(canonicalize(std::vector<std::string>{"b", "a", "b"}).labels() ==
        std::vector<std::int32_t>{1, 2, 1});
  const std::vector<int> same{7, 7, 7};
  CHECK(canonicalize(std::span<const int>(same)).labels() == std::vector<std::int32_t>{1, 1, 1});
  CHECK(canonicalize(std::vector<std::string>{"x", "y", "z", "y"}).labels() ==
        std::vector<std::int32_t>{1, 2, 3, 2});
  CHECK_THROWS_AS(canonicalize(std::vector<std::string>{}), std::invalid_argument);

  // idempotent on its own output
  const auto p = canonicalize(std::vector<std::string>{"u", "v", "u", "w", "v"});
  CHECK(canonicalize(std::span<const std::int32_t>(p.labels())).labels() == p.labels());
}

TEST_CASE("Partition validates canonical form") {
  CHECK_THROWS_AS(Partition({2, 1}), std::invalid_argument);
  CHECK_THROWS_AS(Partition({1, 3}), std::invalid_argument);
  CHECK_THROWS_AS(Partition({}), std::invalid_argument);
  CHECK(Partition({1, 2, 1, 3}).num_clusters() == 3);
}

TEST_CASE("stats: counts and identities") {
  const auto s = stats(Partition({1, 2, 1}));
  CHECK(s.n == 3);
  CHECK(s.k == 2);
  CHECK(s.sizes == std::vector<std::int64_t>{2, 1});
  CHECK(s.size_histogram.at(1) == 1);
  CHECK(s.size_histogram.at(2) == 1);

  const auto ones = stats(Partition({1, 1, 1, 1}));
  CHECK(ones.k == 1);
  CHECK(ones.sizes == std::vector<std::int64_t>{4});
  CHECK(ones.size_histogram.at(4) == 1);

  const auto singletons = stats(Partition({1, 2, 3}));
  CHECK(singletons.k == 3);
  CHECK(singletons.size_histogram.at(1) == 3);
}

TEST_CASE("stats invariants on random partitions") {
  Rng rng(99);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<std::int32_t> labels{1};
    std::int32_t k = 1;
    const int n = 2 + static_cast<int>(rng.uniform() * 60);
    for (int i = 1; i < n; ++i) {
      const auto c = static_cast<std::int32_t>(rng.uniform() * (k + 1)) + 1;
      labels.push_back(c);
      k = std::max(k, c);
    }
    const Partition p(labels);
    const auto s = stats(p);
    std::int64_t total = 0, hist_clusters = 0, hist_items = 0;
    for (const auto m : s.sizes) total += m;
    for (const auto& [r, count] : s.size_histogram) {
      hist_clusters += count;
      hist_items += r * count;
    }
    CHECK(total == s.n);
    CHECK(hist_clusters == s.k);
    CHECK(hist_items == s.n);
  }
}

TEST_CASE("restrict: prefixes and consistency") {
  const Partition p({1, 2, 1, 3});
  CHECK(restrict(p, 2).labels() == std::vector<std::int32_t>{1, 2});
  CHECK(restrict(Partition({1, 1, 2}), 3).labels() == std::vector<std::int32_t>{1, 1, 2});
  CHECK(restrict(Partition({1, 2, 2, 1}), 3).labels() == std::vector<std::int32_t>{1, 2, 2});
  CHECK_THROWS_AS(restrict(p, 0), std::invalid_argument);
  CHECK_THROWS_AS(restrict(p, 5), std::invalid_argument);

  // Kolmogorov consistency of the representation
  CHECK(restrict(p, p.size()) == p);
  CHECK(restrict(restrict(p, 3), 2) == restrict(p, 2));
  for (std::size_t m = 1; m <= p.size(); ++m) CHECK(stats(restrict(p, m)).n == m);
}

TEST_CASE("size_trajectories") {
  const auto t = size_trajectories(Partition({1, 2, 1}));
  CHECK(t.size() == 2);
  CHECK(t[0] == std::vector<std::int64_t>{1, 1, 2});
  CHECK(t[1] == std::vector<std::int64_t>{0, 1, 1});

  CHECK(size_trajectories(Partition({1, 1}))[0] == std::vector<std::int64_t>{1, 2});

  const auto singles = size_trajectories(Partition({1, 2, 3}));
  for (const auto& traj : singles) CHECK(traj.back() == 1);

  // final values match stats.sizes
  const Partition p({1, 2, 2, 3, 1, 2});
  const auto trajs = size_trajectories(p);
  const auto s = stats(p);
  for (std::size_t j = 0; j < trajs.size(); ++j) CHECK(trajs[j].back() == s.sizes[j]);
}
