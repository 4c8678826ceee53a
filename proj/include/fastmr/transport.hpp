#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "fastmr/common.hpp"

namespace fastmr {

enum class Backend { in_process, tcp };

struct ClusterConfig {
  int num_workers = 1;
  Backend backend = Backend::in_process;
  std::vector<std::string> endpoints;  // tcp: host:port, index = rank
  WorkerId rank = 0;                   // tcp only
  std::chrono::milliseconds connect_timeout{30000};
  std::chrono::milliseconds collective_timeout{120000};
};

// One worker's view of the bulk-synchronous cluster. Collective operations
// must be invoked by a single control thread, in the same order on every
// worker; matching is by call order alone.
class Cluster {
 public:
  virtual ~Cluster() = default;
  Cluster(const Cluster&) = delete;
  Cluster& operator=(const Cluster&) = delete;

  WorkerId rank() const { return rank_; }
  int size() const { return size_; }

  // Blocks until every worker has entered this barrier instance.
  void barrier() { do_barrier(); }

  // buckets[j] goes to rank j; result[i] is the bucket rank i addressed
  // to this worker. result[rank()] is the local bucket, untouched by the
  // network.
  std::vector<std::string> all_to_all(std::vector<std::string> buckets) {
    if (static_cast<int>(buckets.size()) != size_)
      throw ContractError("all_to_all needs exactly one bucket per rank");
    for (const auto& b : buckets) bytes_sent_ += b.size();
    auto result = do_all_to_all(std::move(buckets));
    for (const auto& b : result) bytes_received_ += b.size();
    return result;
  }

  // Root receives all payloads in rank order; other workers get {}.
  std::vector<std::string> gather(WorkerId root, std::string payload) {
    check_root(root);
    bytes_sent_ += payload.size();
    auto result = do_gather(root, std::move(payload));
    for (const auto& b : result) bytes_received_ += b.size();
    return result;
  }

  // Every worker returns a byte-identical copy of root's payload.
  std::string broadcast(WorkerId root, std::string payload) {
    check_root(root);
    size_t sent = (rank_ == root) ? payload.size() * size_ : 0;
    auto result = do_broadcast(root, std::move(payload));
    bytes_sent_ += sent;
    bytes_received_ += result.size();
    return result;
  }

  // Payload-byte counters; cluster-wide, sent == received per collective.
  uint64_t bytes_sent() const { return bytes_sent_; }
  uint64_t bytes_received() const { return bytes_received_; }

 protected:
  Cluster(WorkerId rank, int size) : rank_(rank), size_(size) {}

  virtual void do_barrier() = 0;
  virtual std::vector<std::string> do_all_to_all(
      std::vector<std::string> buckets) = 0;
  virtual std::vector<std::string> do_gather(WorkerId root,
                                             std::string payload) = 0;
  virtual std::string do_broadcast(WorkerId root, std::string payload) = 0;

  WorkerId rank_;
  int size_;

 private:
  void check_root(WorkerId root) const {
    if (root < 0 || root >= size_)
      throw ContractError("root rank out of range");
  }

  uint64_t bytes_sent_ = 0;
  uint64_t bytes_received_ = 0;
};

// Creates num_workers handles sharing in-memory channels; handle i has
// rank i. Each handle must be driven by its own execution context.
std::vector<std::unique_ptr<Cluster>> make_inproc_cluster(
    int num_workers,
    std::chrono::milliseconds collective_timeout = std::chrono::milliseconds(
        120000));

// Connects this worker into a full-mesh TCP cluster described by
// config.endpoints; returns once all workers are mutually connected.
std::unique_ptr<Cluster> connect_tcp_cluster(const ClusterConfig& config);

// Cluster spec file: one host:port per line, line number = rank.
std::vector<std::string> parse_cluster_file(const std::string& path);

}  // namespace fastmr
