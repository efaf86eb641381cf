#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace micropart {

// Order-of-appearance canonical allocation sequence: labels c_1..c_n with
// c_1 = 1 and c_{i+1} <= 1 + max(c_1..c_i). Immutable after construction.
class Partition {
public:
  explicit Partition(std::vector<std::int32_t> labels);

  std::size_t size() const { return labels_.size(); }
  std::int32_t label(std::size_t i) const { return labels_[i]; }
  std::int32_t num_clusters() const { return num_clusters_; }
  const std::vector<std::int32_t>& labels() const { return labels_; }

  bool operator==(const Partition& other) const { return labels_ == other.labels_; }

private:
  std::vector<std::int32_t> labels_;
  std::int32_t num_clusters_ = 0;
};

struct PartitionStats {
  std::size_t n = 0;
  std::int32_t k = 0;
  std::vector<std::int64_t> sizes;            // m_{n,j}, j = 1..k in appearance order
  std::map<std::int64_t, std::int64_t> size_histogram;  // r -> K_{n,r}
};

// Relabels tokens by order of first appearance; equal tokens share a label.
template <typename Token>
Partition canonicalize(std::span<const Token> raw) {
  if (raw.empty()) throw std::invalid_argument("canonicalize: empty input");
  std::unordered_map<Token, std::int32_t> seen;
  std::vector<std::int32_t> labels;
  labels.reserve(raw.size());
  for (const auto& token : raw) {
    auto [it, inserted] = seen.try_emplace(token, static_cast<std::int32_t>(seen.size()) + 1);
    labels.push_back(it->second);
  }
  return Partition(std::move(labels));
}

Partition canonicalize(const std::vector<std::string>& tokens);

PartitionStats stats(const Partition& p);

// Prefix of length m (prefixes of canonical sequences are canonical).
Partition restrict(const Partition& p, std::size_t m);

// For each cluster j (1-based, appearance order): sizes after each prefix,
// zero before the cluster first appears. trajectories[j-1][i] = m_{i+1,j}.
std::vector<std::vector<std::int64_t>> size_trajectories(const Partition& p);

}  // namespace micropart
