#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "micropart/partition.hpp"

namespace micropart {

// Undirected multigraph from consecutive label pairs; self-loops and
// parallel edges allowed. Vertices are 1..num_vertices.
struct Multigraph {
  std::vector<std::pair<std::int32_t, std::int32_t>> edges;
  std::int32_t num_vertices = 0;
  bool dropped_last_item = false;  // the input had odd length
};

// edge i = (c_{2i-1}, c_{2i}); an odd trailing item is dropped and flagged
Multigraph partition_to_multigraph(const Partition& p);

struct DegreeStats {
  std::vector<std::int64_t> degrees;                  // per vertex, self-loop counts 2
  std::map<std::int64_t, std::int64_t> degree_histogram;  // degree -> vertex count
};

DegreeStats degree_stats(const Multigraph& g);

}  // namespace micropart
