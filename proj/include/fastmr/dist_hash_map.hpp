#pragma once

#include <functional>
#include <map>
#include <optional>
#include <unordered_map>
#include <vector>

#include "fastmr/codec.hpp"
#include "fastmr/partition.hpp"
#include "fastmr/transport.hpp"

namespace fastmr {

// Hash-sharded key->value store, one shard per worker. Key k lives only on
// worker partition(encode(k), size). Mutation is emit-then-sync: emits are
// buffered locally (one buffer per thread slot, so map threads never
// contend) and become visible cluster-wide after the collective sync().
template <class K, class V>
class DistHashMap {
 public:
  using CombineFn = std::function<V(const V&, const V&)>;

  // combine resolves key collisions on merge; absent means the newer
  // value replaces the older one.
  explicit DistHashMap(Cluster& cluster, CombineFn combine = nullptr,
                       int thread_slots = 1)
      : cluster_(&cluster),
        combine_(std::move(combine)),
        pending_(std::max(1, thread_slots)) {}

  WorkerId owner(const K& key) const {
    return partition_key(key, cluster_->size());
  }

  // Callable concurrently as long as each thread uses its own slot.
  void emit(const K& key, const V& value, int slot = 0) {
    pending_[slot].emplace_back(key, value);
  }

  // Collective. Routes every buffered emission to its owner shard and
  // merges. Buffers are empty afterwards.
  void sync() {
    int n = cluster_->size();
    std::vector<std::string> buckets(n);
    for (auto& buf : pending_) {
      for (auto& [k, v] : buf) {
        encode_pair(k, v, buckets[partition_key(k, n)]);
        ++pairs_shuffled_;
      }
      buf.clear();
    }
    auto received = cluster_->all_to_all(std::move(buckets));
    for (const auto& blob : received) merge_blob(blob);
  }

  // Collective; all workers pass the same key and get the same answer.
  std::optional<V> get(const K& key) const {
    WorkerId own = owner(key);
    std::string reply;
    if (cluster_->rank() == own) {
      auto it = shard_.find(key);
      if (it != shard_.end()) {
        reply.push_back('\x01');
        Codec<V>::encode(it->second, reply);
      } else {
        reply.push_back('\x00');
      }
    }
    reply = cluster_->broadcast(own, std::move(reply));
    if (reply.empty() || reply[0] == '\x00') return std::nullopt;
    return Codec<V>::decode(std::string_view(reply).substr(1));
  }

  // Collective. Disjoint union of all shards, key-sorted, at root.
  std::map<K, V> gather(WorkerId root) const {
    std::string blob;
    for (const auto& [k, v] : shard_) encode_pair(k, v, blob);
    auto parts = cluster_->gather(root, std::move(blob));
    std::map<K, V> out;
    if (cluster_->rank() == root) {
      for (const auto& p : parts) {
        size_t off = 0;
        while (off < p.size()) {
          K k;
          V v;
          off += decode_pair(p, off, k, v);
          out.emplace(std::move(k), std::move(v));
        }
      }
    }
    return out;
  }

  // Collective placement repair: moves every entry whose owner is not this
  // worker. Returns the number of entries moved away locally; a no-op (0)
  // when the sharding invariant already holds.
  size_t rebalance() {
    int n = cluster_->size();
    size_t moved = 0;
    for (auto it = shard_.begin(); it != shard_.end();) {
      if (partition_key(it->first, n) != cluster_->rank()) {
        emit(it->first, it->second);
        it = shard_.erase(it);
        ++moved;
      } else {
        ++it;
      }
    }
    sync();
    return moved;
  }

  const std::unordered_map<K, V>& local() const { return shard_; }
  std::unordered_map<K, V>& local_mutable() { return shard_; }
  Cluster& cluster() const { return *cluster_; }
  // Pairs this worker has fed into all_to_all across all syncs.
  uint64_t pairs_shuffled() const { return pairs_shuffled_; }

  // Merges one already-owned pair directly into the shard (engine use;
  // not a collective).
  void merge_local(const K& key, V value) {
    auto [it, inserted] = shard_.try_emplace(key, std::move(value));
    if (!inserted)
      it->second = combine_ ? combine_(it->second, value) : std::move(value);
  }

 private:
  void merge_blob(std::string_view blob) {
    size_t off = 0;
    while (off < blob.size()) {
      K k;
      V v;
      off += decode_pair(blob, off, k, v);
      merge_local(k, std::move(v));
    }
  }

  Cluster* cluster_;
  CombineFn combine_;
  std::unordered_map<K, V> shard_;
  std::vector<std::vector<std::pair<K, V>>> pending_;
  uint64_t pairs_shuffled_ = 0;
};

}  // namespace fastmr
