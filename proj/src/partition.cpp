#include "micropart/partition.hpp"

#include <stdexcept>

namespace micropart {

Partition::Partition(std::vector<std::int32_t> labels) : labels_(std::move(labels)) {
  if (labels_.empty()) throw std::invalid_argument("Partition: empty label sequence");
  std::int32_t max_seen = 0;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    const std::int32_t c = labels_[i];
    if (c < 1 || c > max_seen + 1)
      throw std::invalid_argument("Partition: labels are not order-of-appearance canonical at item " +
                                  std::to_string(i + 1));
    if (c == max_seen + 1) ++max_seen;
  }
  num_clusters_ = max_seen;
}

Partition canonicalize(const std::vector<std::string>& tokens) {
  return canonicalize(std::span<const std::string>(tokens));
}

PartitionStats stats(const Partition& p) {
  PartitionStats out;
  out.n = p.size();
  out.k = p.num_clusters();
  out.sizes.assign(static_cast<std::size_t>(out.k), 0);
  for (std::size_t i = 0; i < p.size(); ++i) ++out.sizes[static_cast<std::size_t>(p.label(i)) - 1];
  for (const auto m : out.sizes) ++out.size_histogram[m];
  return out;
}

Partition restrict(const Partition& p, std::size_t m) {
  if (m < 1 || m > p.size())
    throw std::invalid_argument("restrict: prefix length " + std::to_string(m) +
                                " out of range for partition of size " + std::to_string(p.size()));
  std::vector<std::int32_t> prefix(p.labels().begin(), p.labels().begin() + static_cast<long>(m));
  return Partition(std::move(prefix));
}

std::vector<std::vector<std::int64_t>> size_trajectories(const Partition& p) {
  const auto k = static_cast<std::size_t>(p.num_clusters());
  std::vector<std::vector<std::int64_t>> out(k, std::vector<std::int64_t>(p.size(), 0));
  std::vector<std::int64_t> current(k, 0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    ++current[static_cast<std::size_t>(p.label(i)) - 1];
    for (std::size_t j = 0; j < k; ++j) out[j][i] = current[j];
  }
  return out;
}

}  // namespace micropart
