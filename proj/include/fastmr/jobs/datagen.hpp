#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "fastmr/jobs/kmeans.hpp"
#include "fastmr/rng.hpp"

namespace fastmr::jobs {

// Seeded Zipf-distributed token corpus, roughly target_bytes of text split
// into lines of a few words each. Token i is "w<i>" with weight
// 1/(i+1)^exponent.
inline std::vector<std::string> zipf_corpus(size_t target_bytes,
                                            size_t vocab = 1000,
                                            double exponent = 1.1,
                                            uint64_t seed = 1) {
  std::vector<double> cdf(vocab);
  double total = 0;
  for (size_t i = 0; i < vocab; ++i) {
    total += 1.0 / std::pow(static_cast<double>(i + 1), exponent);
    cdf[i] = total;
  }
  for (double& c : cdf) c /= total;

  SplitMix64 rng(seed);
  auto draw = [&] {
    double u = rng.next_unit();
    size_t lo = 0, hi = vocab - 1;
    while (lo < hi) {
      size_t mid = (lo + hi) / 2;
      if (cdf[mid] < u)
        lo = mid + 1;
      else
        hi = mid;
    }
    return "w" + std::to_string(lo);
  };

  std::vector<std::string> lines;
  size_t bytes = 0;
  while (bytes < target_bytes) {
    std::string line;
    size_t words = 4 + rng.next() % 9;
    for (size_t w = 0; w < words; ++w) {
      if (w) line.push_back(' ');
      line += draw();
    }
    bytes += line.size() + 1;
    lines.push_back(std::move(line));
  }
  return lines;
}

// Seeded point cloud of k Gaussian blobs in d dimensions (Box-Muller).
// Blob centers are drawn uniformly from [-50, 50]^d.
inline std::vector<Point> gaussian_blobs(size_t n, int d, int k,
                                         double spread = 2.0,
                                         uint64_t seed = 1) {
  SplitMix64 rng(seed);
  std::vector<Point> centers(k);
  for (auto& c : centers) {
    c.resize(d);
    for (double& x : c) x = rng.next_unit() * 100.0 - 50.0;
  }
  auto gauss = [&] {
    double u1 = 1.0 - rng.next_unit();  // (0, 1]
    double u2 = rng.next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  };
  std::vector<Point> points(n);
  for (size_t i = 0; i < n; ++i) {
    const Point& c = centers[rng.next() % k];
    points[i].resize(d);
    for (int j = 0; j < d; ++j) points[i][j] = c[j] + spread * gauss();
  }
  return points;
}

}  // namespace fastmr::jobs
