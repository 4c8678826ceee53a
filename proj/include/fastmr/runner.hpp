#pragma once

#include <exception>
#include <functional>
#include <thread>
#include <vector>

#include "fastmr/transport.hpp"

namespace fastmr {

// Runs fn(cluster) once per worker, each on its own thread, over a fresh
// in-process cluster. Rethrows the first worker exception after join.
template <class F>
void run_cluster(int num_workers, F&& fn,
                 std::chrono::milliseconds collective_timeout =
                     std::chrono::milliseconds(120000)) {
  auto handles = make_inproc_cluster(num_workers, collective_timeout);
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(num_workers);
  for (int r = 0; r < num_workers; ++r) {
    threads.emplace_back([&, r] {
      try {
        fn(*handles[r]);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// Same shape but over loopback TCP: one thread per rank, each holding its
// own socket-backed handle. Exercises the real wire path without spawning
// processes.
template <class F>
void run_tcp_cluster(const std::vector<std::string>& endpoints, F&& fn,
                     std::chrono::milliseconds connect_timeout =
                         std::chrono::milliseconds(30000),
                     std::chrono::milliseconds collective_timeout =
                         std::chrono::milliseconds(120000)) {
  int n = static_cast<int>(endpoints.size());
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(n);
  for (int r = 0; r < n; ++r) {
    threads.emplace_back([&, r] {
      try {
        ClusterConfig cfg;
        cfg.num_workers = n;
        cfg.backend = Backend::tcp;
        cfg.endpoints = endpoints;
        cfg.rank = r;
        cfg.connect_timeout = connect_timeout;
        cfg.collective_timeout = collective_timeout;
        auto cluster = connect_tcp_cluster(cfg);
        fn(*cluster);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace fastmr
