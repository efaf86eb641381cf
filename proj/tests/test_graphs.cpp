#include "doctest.h"

#include <vector>

#include "micropart/generative.hpp"
#include "micropart/graphs.hpp"
#include "micropart/rng.hpp"

using namespace micropart;

TEST_CASE("partition_to_multigraph: pinned examples") {
  const auto loop = partition_to_multigraph(Partition({1, 1}));
  CHECK(loop.edges.size() == 1);
  CHECK(loop.edges[0] == std::make_pair(1, 1));
  CHECK(loop.num_vertices == 1);
  CHECK(!loop.dropped_last_item);

  const auto parallel = partition_to_multigraph(Partition({1, 2, 1, 2}));
  CHECK(parallel.edges.size() == 2);
  CHECK(parallel.edges[0] == std::make_pair(1, 2));
  CHECK(parallel.edges[1] == std::make_pair(1, 2));

  const auto mixed = partition_to_multigraph(Partition({1, 2, 3, 1}));
  CHECK(mixed.edges.size() == 2);
  CHECK(mixed.edges[0] == std::make_pair(1, 2));
  CHECK(mixed.edges[1] == std::make_pair(3, 1));
  CHECK(mixed.num_vertices == 3);

  const auto odd = partition_to_multigraph(Partition({1, 2, 1}));
  CHECK(odd.dropped_last_item);
  CHECK(odd.edges.size() == 1);
  CHECK(odd.num_vertices == 2);

  CHECK_THROWS_AS(partition_to_multigraph(Partition({1})), std::invalid_argument);
}

TEST_CASE("degree_stats: self-loops count twice, degree sum = 2 edges") {
  const auto loop = degree_stats(partition_to_multigraph(Partition({1, 1})));
  CHECK(loop.degrees == std::vector<std::int64_t>{2});

  const auto parallel = degree_stats(partition_to_multigraph(Partition({1, 2, 1, 2})));
  CHECK(parallel.degrees == std::vector<std::int64_t>{2, 2});
}

TEST_CASE("degrees equal cluster sizes on random even partitions") {
  Rng rng(1234);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<std::int32_t> labels{1};
    std::int32_t k = 1;
    const int n = 2 + 2 * static_cast<int>(rng.uniform() * 30);
    for (int i = 1; i < n; ++i) {
      const auto c = static_cast<std::int32_t>(rng.uniform() * (k + 1)) + 1;
      labels.push_back(c);
      k = std::max(k, c);
    }
    const Partition p(labels);
    const auto g = partition_to_multigraph(p);
    const auto deg = degree_stats(g);

    std::int64_t total = 0;
    for (const auto d : deg.degrees) total += d;
    CHECK(total == 2 * static_cast<std::int64_t>(g.edges.size()));
    CHECK(deg.degrees == stats(p).sizes);

    std::int64_t hist_total = 0;
    for (const auto& [d, count] : deg.degree_histogram) hist_total += count;
    CHECK(hist_total == g.num_vertices);
  }
}
