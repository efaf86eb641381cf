#include "micropart/graphs.hpp"

#include <stdexcept>

namespace micropart {

Multigraph partition_to_multigraph(const Partition& p) {
  if (p.size() < 2)
    throw std::invalid_argument("partition_to_multigraph: need at least two items");
  Multigraph g;
  g.dropped_last_item = p.size() % 2 != 0;
  const std::size_t used = p.size() - (g.dropped_last_item ? 1 : 0);
  g.edges.reserve(used / 2);
  std::int32_t max_label = 0;
  for (std::size_t i = 0; i + 1 < used; i += 2) {
    const auto a = p.label(i);
    const auto b = p.label(i + 1);
    g.edges.emplace_back(a, b);
    max_label = std::max({max_label, a, b});
  }
  g.num_vertices = max_label;
  return g;
}

DegreeStats degree_stats(const Multigraph& g) {
  DegreeStats out;
  out.degrees.assign(static_cast<std::size_t>(g.num_vertices), 0);
  for (const auto& [a, b] : g.edges) {
    ++out.degrees[static_cast<std::size_t>(a) - 1];
    ++out.degrees[static_cast<std::size_t>(b) - 1];
  }
  for (const auto d : out.degrees) ++out.degree_histogram[d];
  return out;
}

}  // namespace micropart
