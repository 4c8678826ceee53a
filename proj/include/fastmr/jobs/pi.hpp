#pragma once

#include <utility>

#include "fastmr/engine.hpp"
#include "fastmr/rng.hpp"

namespace fastmr::jobs {

// Samples are split over 4096 fixed logical streams, assigned to workers
// by block. Each stream owns its own seeded generator, so the estimate is
// a pure function of (total_samples, seed), identical for every worker
// count and thread count.
inline constexpr uint64_t kPiStreams = 4096;
inline constexpr uint64_t kPiStreamSalt = 0x9E3779B97F4A7C15ull;

inline uint64_t pi_samples_for_stream(uint64_t stream,
                                      uint64_t total_samples) {
  uint64_t base = total_samples / kPiStreams;
  return base + (stream < total_samples % kPiStreams ? 1 : 0);
}

// Sampler hook for tests: draws one (x, y) from the stream generator.
struct UnitSquareSampler {
  std::pair<double, double> operator()(SplitMix64& g) const {
    double x = g.next_unit();
    double y = g.next_unit();
    return {x, y};
  }
};

template <class Sampler>
double pi_estimate_with(Cluster& cluster, uint64_t total_samples,
                        uint64_t seed, Sampler sampler,
                        const EngineOptions& opts = {},
                        PhaseStats* stats = nullptr) {
  if (total_samples == 0) throw ConfigError("total_samples must be positive");

  BlockRange mine = block_range(kPiStreams, cluster.size(), cluster.rank());
  std::vector<uint64_t> streams;
  for (uint64_t s = mine.begin; s < mine.end; ++s) streams.push_back(s);
  auto source = DistVector<uint64_t>::from_local(cluster, std::move(streams));

  auto mapper = [&](uint64_t stream, auto emit) {
    SplitMix64 g(seed ^ (stream * kPiStreamSalt));
    uint64_t n = pi_samples_for_stream(stream, total_samples);
    for (uint64_t i = 0; i < n; ++i) {
      auto [x, y] = sampler(g);
      emit(int64_t{0}, int64_t{x * x + y * y <= 1.0 ? 1 : 0});
    }
  };
  auto counts = map_reduce_eager<int64_t, int64_t>(
      source, mapper, [](int64_t a, int64_t b) { return a + b; }, opts,
      stats);
  auto gathered = counts.gather(0);

  std::string enc;
  if (cluster.rank() == 0) {
    int64_t inside = gathered.count(0) ? gathered.at(0) : 0;
    enc = encode_one(4.0 * static_cast<double>(inside) /
                     static_cast<double>(total_samples));
  }
  return Codec<double>::decode(cluster.broadcast(0, std::move(enc)));
}

inline double pi_estimate(Cluster& cluster, uint64_t total_samples,
                          uint64_t seed, const EngineOptions& opts = {},
                          PhaseStats* stats = nullptr) {
  return pi_estimate_with(cluster, total_samples, seed, UnitSquareSampler{},
                          opts, stats);
}

}  // namespace fastmr::jobs
