#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "fastmr/codec.hpp"
#include "fastmr/transport.hpp"

namespace fastmr {

struct BlockRange {
  uint64_t begin;
  uint64_t end;
  uint64_t len() const { return end - begin; }
};

// Contiguous balanced block of serial keys owned by worker w:
// the first (len % workers) workers hold one extra element, so block
// sizes differ by at most 1 and rank-order concatenation preserves order.
inline BlockRange block_range(uint64_t global_len, int num_workers,
                              WorkerId w) {
  uint64_t base = global_len / num_workers;
  uint64_t extra = global_len % num_workers;
  uint64_t uw = static_cast<uint64_t>(w);
  uint64_t begin = uw * base + std::min(uw, extra);
  uint64_t end = begin + base + (uw < extra ? 1 : 0);
  return {begin, end};
}

inline WorkerId block_owner(uint64_t serial_key, uint64_t global_len,
                            int num_workers) {
  for (WorkerId w = 0; w < num_workers; ++w) {
    BlockRange r = block_range(global_len, num_workers, w);
    if (serial_key >= r.begin && serial_key < r.end) return w;
  }
  throw ContractError("serial key out of range");
}

namespace detail {

template <class T>
std::string encode_seq(const std::vector<T>& items) {
  std::string out;
  for (const T& item : items) {
    std::string bytes = encode_one(item);
    if (bytes.size() > 0xffffffffu) throw OversizeError("element too large");
    put_u32_le(out, static_cast<uint32_t>(bytes.size()));
    out += bytes;
  }
  return out;
}

template <class T>
void decode_seq(std::string_view buf, std::vector<T>& out) {
  size_t off = 0;
  while (off < buf.size()) {
    if (buf.size() - off < 4) throw MalformedFrameError("truncated element");
    uint32_t len = get_u32_le(buf.data() + off);
    off += 4;
    if (buf.size() - off < len) throw MalformedFrameError("truncated element");
    out.push_back(Codec<T>::decode(buf.substr(off, len)));
    off += len;
  }
}

}  // namespace detail

// Block-distributed sequence with implicit serial keys 0..global_len-1.
template <class T>
class DistVector {
 public:
  // Collective. Root supplies the whole sequence; blocks are scattered in
  // rank order.
  static DistVector scatter(Cluster& cluster, WorkerId root,
                            const std::vector<T>& data) {
    int n = cluster.size();
    uint64_t len = data.size();
    len = Codec<uint64_t>::decode(
        cluster.broadcast(root, encode_one(len)));
    std::vector<T> local;
    if (n == 1) {
      local = data;
    } else {
      // Root routes every non-root block through all_to_all.
      std::vector<std::string> buckets(n);
      if (cluster.rank() == root) {
        for (WorkerId w = 0; w < n; ++w) {
          BlockRange r = block_range(len, n, w);
          std::vector<T> slice(data.begin() + r.begin, data.begin() + r.end);
          buckets[w] = detail::encode_seq(slice);
        }
      }
      auto received = cluster.all_to_all(std::move(buckets));
      detail::decode_seq(received[root], local);
    }
    return DistVector(cluster, std::move(local), len);
  }

  // Collective. Each worker contributes its own block; serial keys follow
  // rank-order concatenation. No data movement.
  static DistVector from_local(Cluster& cluster, std::vector<T> local) {
    auto lens = cluster.gather(0, encode_one<uint64_t>(local.size()));
    std::string packed;  // 8 bytes per rank, rank order
    for (const auto& b : lens) packed += b;
    packed = cluster.broadcast(0, std::move(packed));
    uint64_t total = 0;
    uint64_t offset = 0;
    for (int i = 0; i < cluster.size(); ++i) {
      uint64_t li = Codec<uint64_t>::decode(
          std::string_view(packed).substr(8ull * i, 8));
      if (i < cluster.rank()) offset += li;
      total += li;
    }
    return DistVector(cluster, std::move(local), total, offset);
  }

  // Collective. Rank-order concatenation at root; others get {}.
  std::vector<T> gather(WorkerId root) const {
    auto parts = cluster_->gather(root, detail::encode_seq(local_));
    std::vector<T> out;
    if (cluster_->rank() == root) {
      out.reserve(global_len_);
      for (const auto& p : parts) detail::decode_seq(p, out);
    }
    return out;
  }

  Cluster& cluster() const { return *cluster_; }
  const std::vector<T>& local() const { return local_; }
  uint64_t global_len() const { return global_len_; }
  // Serial key of local element index i.
  uint64_t serial_key(size_t i) const { return offset_ + i; }

 private:
  DistVector(Cluster& cluster, std::vector<T> local, uint64_t global_len)
      : DistVector(cluster, std::move(local), global_len,
                   block_range(global_len, cluster.size(), cluster.rank())
                       .begin) {}

  DistVector(Cluster& cluster, std::vector<T> local, uint64_t global_len,
             uint64_t offset)
      : cluster_(&cluster),
        local_(std::move(local)),
        global_len_(global_len),
        offset_(offset) {}

  Cluster* cluster_;
  std::vector<T> local_;
  uint64_t global_len_;
  uint64_t offset_;  // serial key of local_[0]
};

}  // namespace fastmr
