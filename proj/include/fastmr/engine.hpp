#pragma once

#include <chrono>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "fastmr/cache.hpp"
#include "fastmr/dist_grouped_map.hpp"
#include "fastmr/dist_hash_map.hpp"
#include "fastmr/dist_vector.hpp"
#include "fastmr/partition.hpp"

namespace fastmr {

enum class JobMode { eager, delayed };

inline JobMode parse_mode(const std::string& s) {
  if (s == "eager") return JobMode::eager;
  if (s == "delayed") return JobMode::delayed;
  throw ConfigError("unknown mode: " + s);
}

struct EngineOptions {
  int threads = 1;
  size_t cache_capacity = 1 << 16;
};

struct PhaseStats {
  double map_ms = 0;
  double shuffle_ms = 0;
  double sort_ms = 0;
  double reduce_ms = 0;
  // KV pairs this worker fed into all_to_all.
  uint64_t pairs_shuffled = 0;

  void accumulate(const PhaseStats& o) {
    map_ms += o.map_ms;
    shuffle_ms += o.shuffle_ms;
    sort_ms += o.sort_ms;
    reduce_ms += o.reduce_ms;
    pairs_shuffled += o.pairs_shuffled;
  }
};

namespace detail {

class StopWatch {
 public:
  StopWatch() : start_(std::chrono::steady_clock::now()) {}
  double lap_ms() {
    auto now = std::chrono::steady_clock::now();
    double ms = std::chrono::duration<double, std::milli>(now - start_).count();
    start_ = now;
    return ms;
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

struct MapFailure {
  bool failed = false;
  uint64_t element = 0;
  std::string what;
};

// Runs `threads` map threads over contiguous sub-blocks of the local
// block. Each thread gets (thread_index, [begin,end) local indices) and a
// failure slot; the first failing element wins the diagnostic.
template <class Body>
void run_map_threads(size_t local_size, int threads, Body&& body) {
  if (threads < 1) throw ConfigError("threads must be >= 1");
  std::vector<MapFailure> failures(threads);
  std::vector<std::thread> pool;
  for (int t = 0; t < threads; ++t) {
    BlockRange r = block_range(local_size, threads, t);
    pool.emplace_back([&, t, r] { body(t, r, failures[t]); });
  }
  for (auto& th : pool) th.join();
  for (const auto& f : failures)
    if (f.failed)
      throw JobError("mapper failed on source element " +
                     std::to_string(f.element) + ": " + f.what);
}

template <class K, class V>
void merge_sort_range(std::vector<std::pair<K, V>>& items,
                      std::vector<std::pair<K, V>>& scratch, size_t lo,
                      size_t hi) {
  if (hi - lo < 2) return;
  size_t mid = lo + (hi - lo) / 2;
  merge_sort_range(items, scratch, lo, mid);
  merge_sort_range(items, scratch, mid, hi);
  size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    // <= keeps the left run first: stability.
    if (!(items[j].first < items[i].first))
      scratch[k++] = std::move(items[i++]);
    else
      scratch[k++] = std::move(items[j++]);
  }
  while (i < mid) scratch[k++] = std::move(items[i++]);
  while (j < hi) scratch[k++] = std::move(items[j++]);
  for (size_t x = lo; x < hi; ++x) items[x] = std::move(scratch[x]);
}

// Stable top-down merge sort on key only; equal keys keep arrival order.
// The grouping contract names this sort explicitly, so it is spelled out
// rather than delegated.
template <class K, class V>
void merge_sort_pairs(std::vector<std::pair<K, V>>& items) {
  if (items.size() < 2) return;
  std::vector<std::pair<K, V>> scratch(items.size());
  merge_sort_range(items, scratch, 0, items.size());
}

inline std::string hex_bytes(std::string_view bytes) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  for (char c : bytes) {
    unsigned char u = static_cast<unsigned char>(c);
    out.push_back(digits[u >> 4]);
    out.push_back(digits[u & 0xf]);
  }
  return out;
}

}  // namespace detail

// Eager pipeline: map threads pre-combine in thread-local caches, flushed
// entries fold into one worker-level aggregation map, the locally reduced
// pairs shuffle, and owners merge with the same combine. Requires an
// associative, commutative combine.
template <class K, class V, class T, class Map, class Combine>
DistHashMap<K, V> map_reduce_eager(const DistVector<T>& source, Map mapper,
                                   Combine combine,
                                   const EngineOptions& opts = {},
                                   PhaseStats* stats = nullptr) {
  Cluster& cluster = source.cluster();
  int n = cluster.size();
  detail::StopWatch watch;

  const auto& local = source.local();
  std::vector<std::vector<std::pair<K, V>>> flushed(opts.threads);
  detail::run_map_threads(
      local.size(), opts.threads,
      [&](int t, BlockRange r, detail::MapFailure& fail) {
        ThreadLocalCache<K, V> cache(opts.cache_capacity);
        auto& out = flushed[t];
        auto emit = [&](const K& k, const V& v) {
          auto evicted = cache.absorb(k, v, combine);
          if (evicted) out.push_back(std::move(*evicted));
        };
        for (uint64_t i = r.begin; i < r.end; ++i) {
          try {
            mapper(local[i], emit);
          } catch (const std::exception& e) {
            fail = {true, source.serial_key(i), e.what()};
            return;
          }
        }
        cache.flush([&](K k, V v) {
          out.emplace_back(std::move(k), std::move(v));
        });
      });
  double map_ms = watch.lap_ms();

  // Worker-level aggregation ahead of the shuffle, folded in thread order.
  std::unordered_map<K, V> agg;
  for (auto& list : flushed) {
    for (auto& [k, v] : list) {
      auto [it, inserted] = agg.try_emplace(k, v);
      if (!inserted) it->second = combine(it->second, v);
    }
    list.clear();
  }
  std::vector<std::string> buckets(n);
  uint64_t shipped = 0;
  for (const auto& [k, v] : agg) {
    encode_pair(k, v, buckets[partition_key(k, n)]);
    ++shipped;
  }
  double pre_shuffle_ms = watch.lap_ms();

  auto received = cluster.all_to_all(std::move(buckets));
  double shuffle_ms = watch.lap_ms();

  DistHashMap<K, V> result(
      cluster, [combine](const V& a, const V& b) { return combine(a, b); });
  for (const auto& blob : received) {
    size_t off = 0;
    while (off < blob.size()) {
      K k;
      V v;
      off += decode_pair(blob, off, k, v);
      result.merge_local(k, std::move(v));
    }
  }
  if (stats) {
    stats->map_ms += map_ms;
    stats->shuffle_ms += shuffle_ms;
    stats->reduce_ms += pre_shuffle_ms + watch.lap_ms();
    stats->pairs_shuffled += shipped;
  }
  return result;
}

// Delayed pipeline, first half: ship every raw pair to its owner, then
// merge-sort and coalesce equal-key runs into (key, value list) groups.
// Value order inside a group is (source rank, thread index, emission seq),
// which is exactly arrival order under a stable sort.
template <class K, class V, class T, class Map>
DistGroupedMap<K, V> map_group(const DistVector<T>& source, Map mapper,
                               const EngineOptions& opts = {},
                               PhaseStats* stats = nullptr) {
  Cluster& cluster = source.cluster();
  int n = cluster.size();
  detail::StopWatch watch;

  const auto& local = source.local();
  std::vector<std::vector<std::pair<K, V>>> emitted(opts.threads);
  detail::run_map_threads(
      local.size(), opts.threads,
      [&](int t, BlockRange r, detail::MapFailure& fail) {
        auto& out = emitted[t];
        auto emit = [&](const K& k, const V& v) { out.emplace_back(k, v); };
        for (uint64_t i = r.begin; i < r.end; ++i) {
          try {
            mapper(local[i], emit);
          } catch (const std::exception& e) {
            fail = {true, source.serial_key(i), e.what()};
            return;
          }
        }
      });
  double map_ms = watch.lap_ms();

  std::vector<std::string> buckets(n);
  uint64_t shipped = 0;
  for (auto& list : emitted) {  // thread order fixes the emission order
    for (const auto& [k, v] : list) {
      encode_pair(k, v, buckets[partition_key(k, n)]);
      ++shipped;
    }
    list.clear();
  }
  double pack_ms = watch.lap_ms();

  auto received = cluster.all_to_all(std::move(buckets));
  double shuffle_ms = watch.lap_ms();

  // Arrival order: sources in rank order, each already (thread, seq)
  // ordered.
  std::vector<std::pair<K, V>> arrivals;
  for (const auto& blob : received) {
    size_t off = 0;
    while (off < blob.size()) {
      K k;
      V v;
      off += decode_pair(blob, off, k, v);
      arrivals.emplace_back(std::move(k), std::move(v));
    }
  }
  detail::merge_sort_pairs(arrivals);

  std::vector<typename DistGroupedMap<K, V>::Group> groups;
  for (auto& [k, v] : arrivals) {
    if (groups.empty() || groups.back().first < k)
      groups.push_back({std::move(k), {}});
    groups.back().second.push_back(std::move(v));
  }
  if (stats) {
    stats->map_ms += map_ms + pack_ms;
    stats->shuffle_ms += shuffle_ms;
    stats->sort_ms += watch.lap_ms();
    stats->pairs_shuffled += shipped;
  }
  return DistGroupedMap<K, V>(cluster, std::move(groups));
}

// Delayed pipeline, second half: apply an arbitrary reducer to each group.
// Groups already live on their owners, so no data moves; callable any time
// after grouping.
template <class K, class V, class Reduce>
DistHashMap<K, V> reduce_grouped(const DistGroupedMap<K, V>& grouped,
                                 Reduce reduce, PhaseStats* stats = nullptr) {
  detail::StopWatch watch;
  DistHashMap<K, V> result(grouped.cluster());
  for (const auto& [key, values] : grouped.local()) {
    try {
      result.merge_local(key, reduce(key, values));
    } catch (const std::exception& e) {
      throw JobError("reducer failed on key 0x" +
                     detail::hex_bytes(encode_one(key)) + ": " + e.what());
    }
  }
  if (stats) stats->reduce_ms += watch.lap_ms();
  return result;
}

template <class K, class V, class T, class Map, class Reduce>
DistHashMap<K, V> map_reduce_delayed(const DistVector<T>& source, Map mapper,
                                     Reduce reduce,
                                     const EngineOptions& opts = {},
                                     PhaseStats* stats = nullptr) {
  auto grouped = map_group<K, V>(source, mapper, opts, stats);
  return reduce_grouped(grouped, reduce, stats);
}

}  // namespace fastmr
