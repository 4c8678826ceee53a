#pragma once

#include <vector>

#include "fastmr/transport.hpp"

namespace fastmr {

// Intermediate (key -> ordered value list) collection produced by delayed
// reduction grouping. Groups are key-sorted, keys strictly increasing per
// worker, and every key lives on its partition owner. Value order within a
// group is (source rank, thread index, emission sequence) — fixed so that
// order-sensitive reducers are deterministic.
template <class K, class V>
class DistGroupedMap {
 public:
  using Group = std::pair<K, std::vector<V>>;

  DistGroupedMap(Cluster& cluster, std::vector<Group> groups)
      : cluster_(&cluster), groups_(std::move(groups)) {}

  const std::vector<Group>& local() const { return groups_; }
  Cluster& cluster() const { return *cluster_; }

  uint64_t local_group_count() const { return groups_.size(); }

 private:
  Cluster* cluster_;
  std::vector<Group> groups_;
};

}  // namespace fastmr
