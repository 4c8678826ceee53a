#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "fastmr/engine.hpp"

namespace fastmr::jobs {

using Point = std::vector<double>;

// Map-side partial sum for one cluster: elementwise coordinate sum plus a
// member count. Combining two accumulators is elementwise-sum algebra, so
// it is associative and commutative as eager mode requires.
struct CentroidAccumulator {
  std::vector<double> sum;
  int64_t count = 0;

  static CentroidAccumulator of(const Point& p) {
    return CentroidAccumulator{p, 1};
  }

  CentroidAccumulator combined(const CentroidAccumulator& o) const {
    if (count == 0) return o;
    if (o.count == 0) return *this;
    CentroidAccumulator r = *this;
    for (size_t i = 0; i < r.sum.size(); ++i) r.sum[i] += o.sum[i];
    r.count += o.count;
    return r;
  }

  bool operator==(const CentroidAccumulator& o) const {
    return sum == o.sum && count == o.count;
  }
};

struct KMeansOptions {
  int64_t k = 1;
  std::vector<Point> init;  // empty: first k points of the input
  int max_iters = 100;
  double tol = 1e-6;
};

struct KMeansState {
  std::vector<Point> centroids;
  int iterations = 0;
  double shift = 0;  // max centroid displacement in the last iteration
  std::vector<std::vector<Point>> history;  // centroids after each iteration
};

inline double squared_distance(const Point& a, const Point& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Nearest centroid by squared Euclidean distance; ties go to the lowest
// index.
inline size_t nearest_centroid(const Point& p,
                               const std::vector<Point>& centroids) {
  size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < centroids.size(); ++j) {
    double d = squared_distance(p, centroids[j]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

}  // namespace fastmr::jobs

namespace fastmr {

template <>
struct Codec<jobs::CentroidAccumulator> {
  static void encode(const jobs::CentroidAccumulator& a, std::string& out) {
    Codec<std::vector<double>>::encode(a.sum, out);
    Codec<int64_t>::encode(a.count, out);
  }
  static jobs::CentroidAccumulator decode(std::string_view bytes) {
    if (bytes.size() < 12) throw MalformedFrameError("truncated accumulator");
    jobs::CentroidAccumulator a;
    a.sum = Codec<std::vector<double>>::decode(
        bytes.substr(0, bytes.size() - 8));
    a.count = Codec<int64_t>::decode(bytes.substr(bytes.size() - 8));
    return a;
  }
};

}  // namespace fastmr

namespace fastmr::jobs {

namespace detail {

inline std::vector<Point> decode_points(std::string_view buf) {
  std::vector<Point> pts;
  fastmr::detail::decode_seq(buf, pts);
  return pts;
}

// First k points in serial-key order, assembled at root from whichever
// workers own them, then broadcast.
inline std::vector<Point> first_k_points(const DistVector<Point>& points,
                                         int64_t k) {
  Cluster& cluster = points.cluster();
  std::vector<std::pair<uint64_t, Point>> mine;
  for (size_t i = 0; i < points.local().size(); ++i) {
    uint64_t key = points.serial_key(i);
    if (key < static_cast<uint64_t>(k)) mine.emplace_back(key, points.local()[i]);
  }
  std::string blob;
  for (auto& [key, p] : mine) encode_pair(key, p, blob);
  auto parts = cluster.gather(0, std::move(blob));
  std::string enc;
  if (cluster.rank() == 0) {
    std::vector<Point> init(k);
    for (const auto& part : parts) {
      size_t off = 0;
      while (off < part.size()) {
        uint64_t key;
        Point p;
        off += decode_pair(part, off, key, p);
        init[key] = std::move(p);
      }
    }
    enc = fastmr::detail::encode_seq(init);
  }
  return decode_points(cluster.broadcast(0, std::move(enc)));
}

}  // namespace detail

// Lloyd iterations over the engine: broadcast centroids, map points to
// (nearest index, partial sum), eager-combine, update at the driver, stop
// on max shift <= tol or max_iters.
inline KMeansState kmeans(const DistVector<Point>& points,
                          const KMeansOptions& kopts,
                          const EngineOptions& opts = {},
                          PhaseStats* stats = nullptr) {
  Cluster& cluster = points.cluster();
  if (kopts.k < 1) throw ConfigError("k must be >= 1");
  if (static_cast<uint64_t>(kopts.k) > points.global_len())
    throw ConfigError("k exceeds the number of points");
  for (const Point& p : points.local())
    for (double c : p)
      if (!std::isfinite(c)) throw JobError("non-finite coordinate in input");

  KMeansState state;
  state.centroids = kopts.init.empty() ? detail::first_k_points(points, kopts.k)
                                       : kopts.init;
  if (static_cast<int64_t>(state.centroids.size()) != kopts.k)
    throw ConfigError("init list size does not match k");

  for (int iter = 0; iter < kopts.max_iters; ++iter) {
    const auto& centroids = state.centroids;
    auto mapper = [&centroids](const Point& p, auto emit) {
      emit(static_cast<int64_t>(nearest_centroid(p, centroids)),
           CentroidAccumulator::of(p));
    };
    auto assignments = map_reduce_eager<int64_t, CentroidAccumulator>(
        points, mapper,
        [](const CentroidAccumulator& a, const CentroidAccumulator& b) {
          return a.combined(b);
        },
        opts, stats);
    auto gathered = assignments.gather(0);

    // Driver step at rank 0, result broadcast: [double shift][centroids].
    std::string enc;
    if (cluster.rank() == 0) {
      std::vector<Point> next = state.centroids;
      for (auto& [idx, acc] : gathered) {
        if (acc.count == 0) continue;  // empty cluster keeps its centroid
        for (size_t d = 0; d < acc.sum.size(); ++d)
          next[idx][d] = acc.sum[d] / static_cast<double>(acc.count);
      }
      double shift = 0;
      for (int64_t j = 0; j < kopts.k; ++j)
        shift = std::max(
            shift, std::sqrt(squared_distance(next[j], state.centroids[j])));
      Codec<double>::encode(shift, enc);
      enc += fastmr::detail::encode_seq(next);
    }
    enc = cluster.broadcast(0, std::move(enc));
    state.shift = Codec<double>::decode(std::string_view(enc).substr(0, 8));
    state.centroids = detail::decode_points(std::string_view(enc).substr(8));
    state.iterations = iter + 1;
    state.history.push_back(state.centroids);
    if (state.shift <= kopts.tol) break;
  }
  return state;
}

// Within-cluster sum of squares under the given centroids; collective,
// same value returned everywhere. Used as an audit of Lloyd monotonicity.
inline double wcss(const DistVector<Point>& points,
                   const std::vector<Point>& centroids) {
  double local = 0;
  for (const Point& p : points.local())
    local += squared_distance(p, centroids[nearest_centroid(p, centroids)]);
  Cluster& cluster = points.cluster();
  auto parts = cluster.gather(0, encode_one(local));
  std::string enc;
  if (cluster.rank() == 0) {
    double total = 0;
    for (const auto& part : parts) total += Codec<double>::decode(part);
    enc = encode_one(total);
  }
  return Codec<double>::decode(cluster.broadcast(0, std::move(enc)));
}

}  // namespace fastmr::jobs
