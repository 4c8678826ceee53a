#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>
#include <vector>

#include "fastmr/engine.hpp"
#include "fastmr/jobs/datagen.hpp"
#include "fastmr/jobs/kmeans.hpp"
#include "fastmr/jobs/pi.hpp"
#include "fastmr/jobs/wordcount.hpp"
#include "fastmr/partition.hpp"
#include "fastmr/runner.hpp"

namespace py = pybind11;
using namespace fastmr;

namespace {

EngineOptions make_opts(int threads, size_t cache_capacity) {
  EngineOptions o;
  o.threads = threads;
  o.cache_capacity = cache_capacity;
  return o;
}

std::map<std::string, int64_t> py_wordcount(
    const std::vector<std::string>& lines, int workers, int threads,
    const std::string& mode, size_t cache_capacity) {
  JobMode m = parse_mode(mode);
  EngineOptions opts = make_opts(threads, cache_capacity);
  std::map<std::string, int64_t> out;
  run_cluster(workers, [&](Cluster& c) {
    auto dv = DistVector<std::string>::scatter(c, 0, lines);
    auto counts = jobs::wordcount(dv, m, opts);
    auto gathered = counts.gather(0);
    if (c.rank() == 0) out = std::move(gathered);
  });
  return out;
}

py::dict py_kmeans(const std::vector<jobs::Point>& points, int64_t k,
                   int max_iters, double tol, int workers, int threads) {
  jobs::KMeansOptions kopts;
  kopts.k = k;
  kopts.max_iters = max_iters;
  kopts.tol = tol;
  EngineOptions opts = make_opts(threads, 1 << 16);
  jobs::KMeansState state;
  run_cluster(workers, [&](Cluster& c) {
    auto dv = DistVector<jobs::Point>::scatter(c, 0, points);
    auto s = jobs::kmeans(dv, kopts, opts);
    if (c.rank() == 0) state = std::move(s);
  });
  py::dict out;
  out["centroids"] = state.centroids;
  out["iterations"] = state.iterations;
  out["shift"] = state.shift;
  return out;
}

double py_pi(uint64_t samples, uint64_t seed, int workers, int threads) {
  EngineOptions opts = make_opts(threads, 1 << 16);
  double estimate = 0;
  run_cluster(workers, [&](Cluster& c) {
    double e = jobs::pi_estimate(c, samples, seed, opts);
    if (c.rank() == 0) estimate = e;
  });
  return estimate;
}

}  // namespace

PYBIND11_MODULE(_fastmr, m) {
  m.doc() = "In-memory MapReduce engine with eager and delayed reduction";

  m.def("fnv1a64",
        [](py::bytes b) { return fnv1a64(std::string(b)); },
        py::arg("data"));
  m.def(
      "partition",
      [](py::bytes key, int num_workers) {
        return partition(std::string(key), num_workers);
      },
      py::arg("key"), py::arg("num_workers"));
  m.def(
      "encode_kv",
      [](py::bytes key, py::bytes value) {
        return py::bytes(encode_kv(std::string(key), std::string(value)));
      },
      py::arg("key"), py::arg("value"));
  m.def(
      "decode_kv",
      [](py::bytes buf, size_t offset) {
        std::string storage(buf);  // keep alive while the views are copied
        DecodedKV d = decode_kv(storage, offset);
        return py::make_tuple(py::bytes(std::string(d.key)),
                              py::bytes(std::string(d.value)), d.consumed);
      },
      py::arg("buf"), py::arg("offset") = 0);

  m.def("wordcount", &py_wordcount, py::arg("lines"), py::arg("workers") = 1,
        py::arg("threads") = 1, py::arg("mode") = "eager",
        py::arg("cache_capacity") = size_t{1} << 16);
  m.def("kmeans", &py_kmeans, py::arg("points"), py::arg("k"),
        py::arg("max_iters") = 100, py::arg("tol") = 1e-6,
        py::arg("workers") = 1, py::arg("threads") = 1);
  m.def("pi_estimate", &py_pi, py::arg("samples"), py::arg("seed") = 42,
        py::arg("workers") = 1, py::arg("threads") = 1);

  m.def("zipf_corpus", &jobs::zipf_corpus, py::arg("target_bytes"),
        py::arg("vocab") = 1000, py::arg("exponent") = 1.1,
        py::arg("seed") = 1);
  m.def("gaussian_blobs", &jobs::gaussian_blobs, py::arg("n"), py::arg("d"),
        py::arg("k"), py::arg("spread") = 2.0, py::arg("seed") = 1);
  m.def("tokenize", [](const std::string& line) { return jobs::tokenize(line); },
        py::arg("line"));
}
