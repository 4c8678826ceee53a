#include <atomic>
#include <chrono>
#include <mutex>
#include <string>
#include <vector>

#include "doctest.h"
#include "fastmr/runner.hpp"
#include "fastmr/transport.hpp"
#include "test_util.hpp"

using namespace fastmr;
using Clock = std::chrono::steady_clock;

namespace {

// Runs fn over both backends at the given size.
template <class F>
void each_backend(int n, F&& fn) {
  run_cluster(n, fn);
  run_tcp_cluster(free_endpoints(n), fn);
}

}  // namespace

TEST_CASE("singleton cluster") {
  run_cluster(1, [](Cluster& c) {
    CHECK(c.rank() == 0);
    CHECK(c.size() == 1);
    c.barrier();  // returns immediately
    auto r = c.all_to_all({"B"});
    CHECK(r == std::vector<std::string>{"B"});
    CHECK(c.gather(0, "B") == std::vector<std::string>{"B"});
    CHECK(c.broadcast(0, "payload") == "payload");
  });
}

TEST_CASE("rank enumeration, size 4") {
  std::atomic<int> seen{0};
  std::mutex m;
  std::vector<bool> ranks(4, false);
  run_cluster(4, [&](Cluster& c) {
    CHECK(c.size() == 4);
    std::lock_guard<std::mutex> lk(m);
    CHECK(!ranks[c.rank()]);
    ranks[c.rank()] = true;
    ++seen;
  });
  CHECK(seen == 4);
}

TEST_CASE("barrier separates time: max(before) <= min(after)") {
  for (int n : {2, 4}) {
    std::vector<Clock::time_point> before(n), after(n);
    run_cluster(n, [&](Cluster& c) {
      before[c.rank()] = Clock::now();
      c.barrier();
      after[c.rank()] = Clock::now();
    });
    auto max_before = *std::max_element(before.begin(), before.end());
    auto min_after = *std::min_element(after.begin(), after.end());
    CHECK(max_before <= min_after);
  }
}

TEST_CASE("mismatched barrier counts time out") {
  CHECK_THROWS_AS(
      run_cluster(
          2,
          [](Cluster& c) {
            if (c.rank() == 0) c.barrier();  // rank 1 skips
          },
          std::chrono::milliseconds(200)),
      TransportError);
}

TEST_CASE("all_to_all routes buckets by rank") {
  each_backend(2, [](Cluster& c) {
    std::vector<std::string> buckets =
        c.rank() == 0 ? std::vector<std::string>{"a", "b"}
                      : std::vector<std::string>{"c", "d"};
    auto r = c.all_to_all(buckets);
    if (c.rank() == 0)
      CHECK(r == std::vector<std::string>{"a", "c"});
    else
      CHECK(r == std::vector<std::string>{"b", "d"});
  });
}

TEST_CASE("all_to_all with empty buckets") {
  each_backend(4, [](Cluster& c) {
    auto r = c.all_to_all(std::vector<std::string>(4));
    for (const auto& b : r) CHECK(b.empty());
  });
}

TEST_CASE("all_to_all double application is the identity") {
  for (int n : {1, 2, 4}) {
    each_backend(n, [n](Cluster& c) {
      std::vector<std::string> original(n);
      for (int j = 0; j < n; ++j)
        original[j] = "from" + std::to_string(c.rank()) + "to" +
                      std::to_string(j);
      auto once = c.all_to_all(original);
      auto twice = c.all_to_all(once);
      CHECK(twice == original);
    });
  }
}

TEST_CASE("all_to_all contract: wrong bucket count") {
  run_cluster(1, [](Cluster& c) {
    CHECK_THROWS_AS(c.all_to_all({"a", "b"}), ContractError);
  });
}

TEST_CASE("gather collects in rank order at root only") {
  each_backend(3, [](Cluster& c) {
    std::string payload(1, static_cast<char>('x' + c.rank()));
    auto r = c.gather(1, payload);
    if (c.rank() == 1)
      CHECK(r == std::vector<std::string>{"x", "y", "z"});
    else
      CHECK(r.empty());
  });
}

TEST_CASE("gather/broadcast contract: root out of range") {
  run_cluster(2, [](Cluster& c) {
    CHECK_THROWS_AS(c.gather(2, ""), ContractError);
    CHECK_THROWS_AS(c.broadcast(-1, ""), ContractError);
  });
}

TEST_CASE("broadcast replicates the root payload") {
  each_backend(4, [](Cluster& c) {
    std::string payload = c.rank() == 2 ? "cfg" : "";
    CHECK(c.broadcast(2, payload) == "cfg");
    CHECK(c.broadcast(0, "").empty());
  });
}

TEST_CASE("byte conservation per collective") {
  for (int n : {1, 2, 4}) {
    each_backend(n, [n](Cluster& c) {
      std::vector<std::string> buckets(n);
      for (int j = 0; j < n; ++j)
        buckets[j] = std::string(10 + c.rank() + j, 'p');
      c.all_to_all(buckets);
      c.gather(0, std::string(5 + c.rank(), 'g'));
      c.broadcast(0, "seven77");
      // Snapshot before the bookkeeping gathers mutate the counters.
      uint64_t my_sent = c.bytes_sent();
      uint64_t my_recv = c.bytes_received();
      auto sent = c.gather(0, std::to_string(my_sent));
      auto recv = c.gather(0, std::to_string(my_recv));
      if (c.rank() == 0) {
        uint64_t s = 0, r = 0;
        for (const auto& x : sent) s += std::stoull(x);
        for (const auto& x : recv) r += std::stoull(x);
        CHECK(s == r);
      }
    });
  }
}

TEST_CASE("large payloads: 16 MiB bucket") {
  each_backend(2, [](Cluster& c) {
    std::string big(16u << 20, static_cast<char>('A' + c.rank()));
    std::vector<std::string> buckets{big, big};
    auto r = c.all_to_all(std::move(buckets));
    CHECK(r[0].size() == 16u << 20);
    CHECK(r[1].size() == 16u << 20);
    CHECK(r[0][0] == 'A');
    CHECK(r[1][0] == 'B');
  });
}

TEST_CASE("tcp: two workers on loopback complete a barrier") {
  run_tcp_cluster(free_endpoints(2), [](Cluster& c) {
    CHECK(c.size() == 2);
    c.barrier();
    auto r = c.gather(0, std::to_string(c.rank()));
    if (c.rank() == 0) CHECK(r == std::vector<std::string>{"0", "1"});
  });
}

TEST_CASE("tcp: unreachable peer times out at startup") {
  ClusterConfig cfg;
  cfg.num_workers = 2;
  cfg.backend = Backend::tcp;
  cfg.endpoints = free_endpoints(2);  // nobody listening on the peer port
  cfg.rank = 0;
  cfg.connect_timeout = std::chrono::milliseconds(300);
  CHECK_THROWS_AS(connect_tcp_cluster(cfg), TransportError);
}

TEST_CASE("tcp: duplicate endpoints rejected") {
  ClusterConfig cfg;
  cfg.num_workers = 2;
  cfg.backend = Backend::tcp;
  cfg.endpoints = {"127.0.0.1:19999", "127.0.0.1:19999"};
  cfg.rank = 0;
  CHECK_THROWS_AS(connect_tcp_cluster(cfg), ConfigError);
}

TEST_CASE("backend equivalence on a fixed call sequence") {
  for (int n : {1, 2, 4}) {
    auto script = [n](Cluster& c, std::vector<std::string>& out) {
      std::vector<std::string> buckets(n);
      for (int j = 0; j < n; ++j)
        buckets[j] = "r" + std::to_string(c.rank()) + "j" + std::to_string(j);
      auto a = c.all_to_all(buckets);
      for (auto& x : a) out.push_back(x);
      out.push_back(c.broadcast(0, c.rank() == 0 ? "root-data" : ""));
      auto g = c.gather(0, "p" + std::to_string(c.rank()));
      for (auto& x : g) out.push_back(x);
    };
    std::vector<std::vector<std::string>> inproc_out(n), tcp_out(n);
    run_cluster(n, [&](Cluster& c) { script(c, inproc_out[c.rank()]); });
    run_tcp_cluster(free_endpoints(n),
                    [&](Cluster& c) { script(c, tcp_out[c.rank()]); });
    CHECK(inproc_out == tcp_out);
  }
}
