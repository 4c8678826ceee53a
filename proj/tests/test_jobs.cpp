#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "doctest.h"
#include "fastmr/jobs/datagen.hpp"
#include "fastmr/jobs/kmeans.hpp"
#include "fastmr/jobs/pi.hpp"
#include "fastmr/jobs/wordcount.hpp"
#include "fastmr/runner.hpp"

using namespace fastmr;
using jobs::Point;

namespace {

std::map<std::string, int64_t> sequential_wordcount(
    const std::vector<std::string>& lines) {
  std::map<std::string, int64_t> out;
  for (const auto& line : lines)
    for (const auto& tok : jobs::tokenize(line)) ++out[tok];
  return out;
}

// Single-threaded Lloyd oracle with the same init, tie, and empty-cluster
// rules; records centroids after each iteration.
struct LloydOracle {
  std::vector<std::vector<Point>> history;
  std::vector<Point> centroids;
  int iterations = 0;
  double shift = 0;
};

LloydOracle lloyd_oracle(const std::vector<Point>& points, int64_t k,
                         int max_iters, double tol) {
  LloydOracle r;
  r.centroids.assign(points.begin(), points.begin() + k);
  for (int iter = 0; iter < max_iters; ++iter) {
    size_t d = points[0].size();
    std::vector<Point> sums(k, Point(d, 0.0));
    std::vector<int64_t> counts(k, 0);
    for (const Point& p : points) {
      size_t j = jobs::nearest_centroid(p, r.centroids);
      for (size_t i = 0; i < d; ++i) sums[j][i] += p[i];
      ++counts[j];
    }
    std::vector<Point> next = r.centroids;
    for (int64_t j = 0; j < k; ++j)
      if (counts[j] > 0)
        for (size_t i = 0; i < d; ++i)
          next[j][i] = sums[j][i] / static_cast<double>(counts[j]);
    r.shift = 0;
    for (int64_t j = 0; j < k; ++j)
      r.shift = std::max(r.shift, std::sqrt(jobs::squared_distance(
                                      next[j], r.centroids[j])));
    r.centroids = next;
    r.iterations = iter + 1;
    r.history.push_back(next);
    if (r.shift <= tol) break;
  }
  return r;
}

}  // namespace

TEST_CASE("tokenize rule") {
  CHECK(jobs::tokenize("Hello, World! 42") ==
        std::vector<std::string>{"hello", "world", "42"});
  CHECK(jobs::tokenize("--- ;;; ") == std::vector<std::string>{});
  CHECK(jobs::tokenize("a  a\tb") == std::vector<std::string>{"a", "a", "b"});
}

TEST_CASE("utf8 validation") {
  CHECK(jobs::valid_utf8("plain ascii"));
  CHECK(jobs::valid_utf8("caf\xc3\xa9"));
  CHECK(!jobs::valid_utf8("\xff\xfe"));
  CHECK(!jobs::valid_utf8("\xc3"));          // truncated sequence
  CHECK(!jobs::valid_utf8("\xc0\xaf"));      // overlong
  CHECK(!jobs::valid_utf8("\xed\xa0\x80"));  // surrogate
}

TEST_CASE("wordcount hand examples") {
  for (JobMode mode : {JobMode::eager, JobMode::delayed}) {
    run_cluster(1, [&](Cluster& c) {
      auto dv = DistVector<std::string>::scatter(c, 0, {"a a b"});
      auto counts = jobs::wordcount(dv, mode);
      CHECK(counts.gather(0) ==
            std::map<std::string, int64_t>{{"a", 2}, {"b", 1}});

      auto empty_line = DistVector<std::string>::scatter(c, 0, {""});
      CHECK(jobs::wordcount(empty_line, mode).gather(0).empty());

      auto empty = DistVector<std::string>::scatter(c, 0, {});
      CHECK(jobs::wordcount(empty, mode).gather(0).empty());
    });
  }
}

TEST_CASE("wordcount rejects invalid UTF-8 naming the line") {
  run_cluster(1, [](Cluster& c) {
    auto dv = DistVector<std::string>::scatter(
        c, 0, {"fine", "also fine", "bad \xff line"});
    try {
      jobs::wordcount(dv, JobMode::eager);
      FAIL("expected JobError");
    } catch (const JobError& e) {
      CHECK(std::string(e.what()).find("element 2") != std::string::npos);
    }
  });
}

TEST_CASE("wordcount matches sequential oracle on a zipf corpus") {
  auto corpus = jobs::zipf_corpus(64 << 10, 500, 1.1, 2024);
  auto oracle = sequential_wordcount(corpus);
  int64_t tokens = 0;
  for (auto& [k, v] : oracle) tokens += v;
  for (JobMode mode : {JobMode::eager, JobMode::delayed}) {
    for (int w : {1, 2, 4}) {
      run_cluster(w, [&](Cluster& c) {
        auto dv = DistVector<std::string>::scatter(
            c, 0, c.rank() == 0 ? corpus : std::vector<std::string>{});
        EngineOptions opts;
        opts.threads = 2;
        auto counts = jobs::wordcount(dv, mode, opts);
        auto g = counts.gather(0);
        if (c.rank() == 0) {
          CHECK(g == oracle);
          int64_t total = 0;
          for (auto& [k, v] : g) total += v;
          CHECK(total == tokens);  // counts sum to the token count
        }
      });
    }
  }
}

TEST_CASE("accumulator combine is associative and commutative") {
  SplitMix64 rng(5);
  auto random_acc = [&] {
    jobs::CentroidAccumulator a;
    a.count = static_cast<int64_t>(rng.next() % 5);
    a.sum = {double(rng.next() % 100), double(rng.next() % 100)};
    if (a.count == 0) a.sum = {0.0, 0.0};
    return a;
  };
  for (int i = 0; i < 100; ++i) {
    auto a = random_acc(), b = random_acc(), c = random_acc();
    CHECK(a.combined(b) == b.combined(a));
    CHECK(a.combined(b).combined(c) == a.combined(b.combined(c)));
  }
}

TEST_CASE("accumulator codec round-trip") {
  jobs::CentroidAccumulator a{{1.5, -2.0, 3.0}, 7};
  auto bytes = encode_one(a);
  CHECK(Codec<jobs::CentroidAccumulator>::decode(bytes) == a);
}

TEST_CASE("kmeans with k=1 converges to the global mean") {
  std::vector<Point> pts = {{0, 0}, {2, 0}, {0, 2}, {2, 2}, {1, 6}};
  run_cluster(2, [&](Cluster& c) {
    auto dv = DistVector<Point>::scatter(
        c, 0, c.rank() == 0 ? pts : std::vector<Point>{});
    jobs::KMeansOptions kopts;
    kopts.k = 1;
    kopts.tol = 1e-12;
    auto state = jobs::kmeans(dv, kopts);
    CHECK(state.iterations <= 2);
    CHECK(state.centroids[0][0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(state.centroids[0][1] == doctest::Approx(2.0).epsilon(1e-12));
  });
}

TEST_CASE("kmeans fixed point: points equal to the initial centroids") {
  std::vector<Point> pts = {{0, 0}, {10, 0}, {0, 10}};
  run_cluster(1, [&](Cluster& c) {
    auto dv = DistVector<Point>::scatter(c, 0, pts);
    jobs::KMeansOptions kopts;
    kopts.k = 3;
    auto state = jobs::kmeans(dv, kopts);
    CHECK(state.iterations == 1);
    CHECK(state.shift == 0.0);
    CHECK(state.centroids == pts);
  });
}

TEST_CASE("kmeans config and input errors") {
  run_cluster(1, [](Cluster& c) {
    auto two = DistVector<Point>::scatter(c, 0, {{0.0}, {1.0}});
    jobs::KMeansOptions kopts;
    kopts.k = 3;
    CHECK_THROWS_AS(jobs::kmeans(two, kopts), ConfigError);

    auto bad = DistVector<Point>::scatter(
        c, 0, {{0.0}, {std::numeric_limits<double>::quiet_NaN()}});
    kopts.k = 1;
    CHECK_THROWS_AS(jobs::kmeans(bad, kopts), JobError);
  });
}

TEST_CASE("kmeans trajectory matches the Lloyd oracle on blobs") {
  auto pts = jobs::gaussian_blobs(200, 2, 3, 2.0, 77);
  auto oracle = lloyd_oracle(pts, 3, 50, 1e-6);
  for (int w : {1, 2, 4}) {
    run_cluster(w, [&](Cluster& c) {
      auto dv = DistVector<Point>::scatter(
          c, 0, c.rank() == 0 ? pts : std::vector<Point>{});
      jobs::KMeansOptions kopts;
      kopts.k = 3;
      kopts.max_iters = 50;
      kopts.tol = 1e-6;
      EngineOptions opts;
      opts.threads = 2;
      auto state = jobs::kmeans(dv, kopts, opts);
      CHECK(state.iterations == oracle.iterations);
      REQUIRE(state.history.size() == oracle.history.size());
      for (size_t it = 0; it < oracle.history.size(); ++it)
        for (int j = 0; j < 3; ++j)
          for (int d = 0; d < 2; ++d)
            CHECK(std::abs(state.history[it][j][d] -
                           oracle.history[it][j][d]) <= 1e-9);

      // WCSS audit: non-increasing across the trajectory.
      double prev = std::numeric_limits<double>::infinity();
      for (const auto& centroids : state.history) {
        double w2 = jobs::wcss(dv, centroids);
        CHECK(w2 <= prev + 1e-9);
        prev = w2;
      }
    });
  }
}

TEST_CASE("pi stub samplers") {
  struct AllInside {
    std::pair<double, double> operator()(SplitMix64&) const {
      return {0.0, 0.0};
    }
  };
  struct AllOutside {
    std::pair<double, double> operator()(SplitMix64&) const {
      return {1.0 - 1e-9, 1.0 - 1e-9};
    }
  };
  run_cluster(2, [](Cluster& c) {
    CHECK(jobs::pi_estimate_with(c, 100000, 1, AllInside{}) == 4.0);
    CHECK(jobs::pi_estimate_with(c, 100000, 1, AllOutside{}) == 0.0);
  });
}

TEST_CASE("pi sample partition is exact over streams") {
  for (uint64_t n : {uint64_t{1}, uint64_t{4095}, uint64_t{4096},
                     uint64_t{10000001}}) {
    uint64_t total = 0;
    for (uint64_t s = 0; s < jobs::kPiStreams; ++s)
      total += jobs::pi_samples_for_stream(s, n);
    CHECK(total == n);
  }
}

TEST_CASE("pi estimate is topology independent and in range") {
  double reference = -1;
  run_cluster(1, [&](Cluster& c) {
    reference = jobs::pi_estimate(c, 100000, 42);
  });
  CHECK(reference >= 0.0);
  CHECK(reference <= 4.0);
  CHECK(reference == doctest::Approx(3.141592).epsilon(0.02));
  for (int w : {2, 4}) {
    for (int t : {1, 4}) {
      run_cluster(w, [&](Cluster& c) {
        EngineOptions opts;
        opts.threads = t;
        double e = jobs::pi_estimate(c, 100000, 42, opts);
        CHECK(e == reference);  // bit-identical
      });
    }
  }
  run_cluster(1, [](Cluster& c) {
    CHECK_THROWS_AS(jobs::pi_estimate(c, 0, 1), ConfigError);
  });
}
