#include <condition_variable>
#include <memory>
#include <mutex>

#include "fastmr/transport.hpp"

namespace fastmr {
namespace {

// Reusable rendezvous with a timeout. A worker that misses its slot leaves
// the others stuck at the generation fence until they time out.
class PhaseBarrier {
 public:
  explicit PhaseBarrier(int n) : n_(n) {}

  void wait(std::chrono::milliseconds timeout) {
    std::unique_lock<std::mutex> lk(m_);
    uint64_t gen = gen_;
    if (++count_ == n_) {
      count_ = 0;
      ++gen_;
      cv_.notify_all();
      return;
    }
    if (!cv_.wait_for(lk, timeout, [&] { return gen_ != gen; }))
      throw TransportError(
          "collective timeout: a worker did not reach the barrier");
  }

 private:
  int n_;
  int count_ = 0;
  uint64_t gen_ = 0;
  std::mutex m_;
  std::condition_variable cv_;
};

struct InprocShared {
  InprocShared(int n, std::chrono::milliseconds timeout)
      : n(n),
        timeout(timeout),
        barrier(n),
        matrix(static_cast<size_t>(n) * n),
        slots(n) {}

  int n;
  std::chrono::milliseconds timeout;
  PhaseBarrier barrier;
  // matrix[src * n + dst]: cell written by src, read by dst.
  std::vector<std::string> matrix;
  std::vector<std::string> slots;
  std::string bcast;
};

class InprocCluster final : public Cluster {
 public:
  InprocCluster(WorkerId rank, std::shared_ptr<InprocShared> shared)
      : Cluster(rank, shared->n), shared_(std::move(shared)) {}

 protected:
  void do_barrier() override { shared_->barrier.wait(shared_->timeout); }

  std::vector<std::string> do_all_to_all(
      std::vector<std::string> buckets) override {
    auto& s = *shared_;
    for (int j = 0; j < size_; ++j)
      s.matrix[static_cast<size_t>(rank_) * size_ + j] = std::move(buckets[j]);
    do_barrier();
    std::vector<std::string> result(size_);
    for (int i = 0; i < size_; ++i)
      result[i] = std::move(s.matrix[static_cast<size_t>(i) * size_ + rank_]);
    do_barrier();
    return result;
  }

  std::vector<std::string> do_gather(WorkerId root,
                                     std::string payload) override {
    auto& s = *shared_;
    s.slots[rank_] = std::move(payload);
    do_barrier();
    std::vector<std::string> result;
    if (rank_ == root)
      for (int i = 0; i < size_; ++i) result.push_back(s.slots[i]);
    do_barrier();
    return result;
  }

  std::string do_broadcast(WorkerId root, std::string payload) override {
    auto& s = *shared_;
    if (rank_ == root) s.bcast = std::move(payload);
    do_barrier();
    std::string result = s.bcast;
    do_barrier();
    return result;
  }

 private:
  std::shared_ptr<InprocShared> shared_;
};

}  // namespace

std::vector<std::unique_ptr<Cluster>> make_inproc_cluster(
    int num_workers, std::chrono::milliseconds collective_timeout) {
  if (num_workers < 1) throw ConfigError("num_workers must be >= 1");
  auto shared = std::make_shared<InprocShared>(num_workers, collective_timeout);
  std::vector<std::unique_ptr<Cluster>> handles;
  handles.reserve(num_workers);
  for (int r = 0; r < num_workers; ++r)
    handles.push_back(std::make_unique<InprocCluster>(r, shared));
  return handles;
}

}  // namespace fastmr
