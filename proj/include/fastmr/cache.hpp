#pragma once

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "fastmr/common.hpp"

namespace fastmr {

// Direct-mapped per-map-thread combining table: one slot per hash bucket,
// flush-on-collision. Allocation-free after construction; capacity changes
// traffic, never results.
template <class K, class V, class Hash = std::hash<K>>
class ThreadLocalCache {
 public:
  explicit ThreadLocalCache(size_t capacity = 1 << 16)
      : slots_(capacity ? capacity
                        : throw ConfigError("cache capacity must be >= 1")) {}

  size_t capacity() const { return slots_.size(); }
  size_t slot_for(const K& key) const { return Hash{}(key) % slots_.size(); }

  // Same key in slot: combine in place. Empty slot: store. Different key:
  // evict the occupant and return it, then store the new pair.
  template <class Combine>
  std::optional<std::pair<K, V>> absorb(const K& key, V value,
                                        Combine&& combine) {
    Slot& s = slots_[slot_for(key)];
    if (!s.occupied) {
      s.occupied = true;
      s.key = key;
      s.value = std::move(value);
      return std::nullopt;
    }
    if (s.key == key) {
      s.value = combine(s.value, value);
      return std::nullopt;
    }
    std::pair<K, V> evicted(std::move(s.key), std::move(s.value));
    s.key = key;
    s.value = std::move(value);
    return evicted;
  }

  // Drains every occupied slot exactly once, in slot order.
  template <class Sink>
  void flush(Sink&& sink) {
    for (Slot& s : slots_) {
      if (s.occupied) {
        sink(std::move(s.key), std::move(s.value));
        s.occupied = false;
      }
    }
  }

  size_t occupied() const {
    size_t n = 0;
    for (const Slot& s : slots_)
      if (s.occupied) ++n;
    return n;
  }

 private:
  struct Slot {
    bool occupied = false;
    K key{};
    V value{};
  };

  std::vector<Slot> slots_;
};

}  // namespace fastmr
