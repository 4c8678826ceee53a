// fastmr: launcher and benchmark harness for the MapReduce engine.
//
// Subcommands:
//   run     execute one job on an in-process or TCP cluster
//   bench   sweep RunSpecs in-process and emit one CSV row per run
//   launch  spawn N local worker processes over loopback TCP

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "fastmr/jobs/datagen.hpp"
#include "fastmr/jobs/kmeans.hpp"
#include "fastmr/jobs/pi.hpp"
#include "fastmr/jobs/wordcount.hpp"
#include "fastmr/runner.hpp"

#include "../tests/test_util.hpp"

using namespace fastmr;
using nlohmann::json;

namespace {

struct RunSpec {
  std::string job;  // wordcount | kmeans | pi
  std::string mode = "eager";
  int workers = 1;
  int threads = 1;
  std::string backend = "inproc";  // inproc | tcp
  std::string cluster_file;
  int rank = -1;
  std::string input;
  std::string gen;  // zipf | blobs ("" = use --input)
  uint64_t gen_bytes = 1 << 20;
  uint64_t vocab = 1000;
  uint64_t points = 200;
  int dim = 2;
  int64_t k = 3;
  int max_iters = 100;
  double tol = 1e-6;
  uint64_t samples = 1000000;
  uint64_t seed = 42;
  std::string out;
  uint64_t cache_capacity = 1 << 16;
  int connect_timeout_ms = 30000;
  int collective_timeout_ms = 120000;
};

struct RunResult {
  PhaseStats stats;          // rank-0 phase times
  uint64_t pairs_shuffled = 0;  // cluster total
  uint64_t input_size = 0;
  double total_ms = 0;
  uint64_t result_digest = 0;
  // key -> printable value, key-sorted (rank 0 only)
  std::vector<std::pair<std::string, std::string>> lines;
  json summary;
};

uint64_t peak_rss_bytes() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      uint64_t kb = 0;
      std::sscanf(line.c_str(), "VmHWM: %lu", &kb);
      return kb * 1024;
    }
  }
  return 0;  // best-effort; unavailable off Linux
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Per-worker byte-range file read, aligned to line boundaries: a worker
// owns a line iff the line's first byte falls in its block of the file.
std::vector<std::string> read_lines_range(const std::string& path,
                                          WorkerId rank, int size,
                                          uint64_t* file_bytes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open input file " + path);
  in.seekg(0, std::ios::end);
  uint64_t total = static_cast<uint64_t>(in.tellg());
  if (file_bytes) *file_bytes = total;
  BlockRange range = block_range(total, size, rank);
  std::vector<std::string> lines;
  if (range.len() == 0) return lines;
  uint64_t pos = range.begin;
  in.seekg(static_cast<std::streamoff>(pos));
  if (pos > 0) {
    in.seekg(static_cast<std::streamoff>(pos - 1));
    char prev;
    in.get(prev);
    if (prev != '\n') {
      // Mid-line: this line's first byte is in the previous block.
      std::string skip;
      if (!std::getline(in, skip)) return lines;
      pos += skip.size() + 1;
    }
  }
  std::string line;
  while (pos < range.end && std::getline(in, line)) {
    pos += line.size() + 1;
    lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<jobs::Point> read_points_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open input file " + path);
  std::vector<jobs::Point> pts;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    jobs::Point p;
    std::istringstream ss(line);
    double x;
    while (ss >> x) p.push_back(x);
    pts.push_back(std::move(p));
  }
  return pts;
}

// Stable digest of the key-sorted output pairs, over their canonical
// encodings.
template <class K, class V>
uint64_t digest_sorted(const std::map<K, V>& m) {
  uint64_t h = kFnvOffsetBasis;
  std::string buf;
  for (const auto& [k, v] : m) {
    buf.clear();
    encode_pair(k, v, buf);
    h = fnv1a64(buf, h);
  }
  return h;
}

void execute_job(Cluster& cluster, const RunSpec& spec, RunResult& result) {
  EngineOptions opts;
  opts.threads = spec.threads;
  opts.cache_capacity = spec.cache_capacity;
  JobMode mode = parse_mode(spec.mode);
  PhaseStats stats;
  auto start = std::chrono::steady_clock::now();
  uint64_t local_pairs = 0;
  uint64_t input_size = 0;

  if (spec.job == "wordcount") {
    std::vector<std::string> local_lines;
    if (!spec.gen.empty()) {
      if (spec.gen != "zipf") throw ConfigError("wordcount generator: zipf");
      // Deterministic: every worker generates the corpus and keeps its
      // block.
      auto corpus =
          jobs::zipf_corpus(spec.gen_bytes, spec.vocab, 1.1, spec.seed);
      for (const auto& l : corpus) input_size += l.size() + 1;
      BlockRange r =
          block_range(corpus.size(), cluster.size(), cluster.rank());
      local_lines.assign(corpus.begin() + r.begin, corpus.begin() + r.end);
    } else if (!spec.input.empty()) {
      local_lines = read_lines_range(spec.input, cluster.rank(),
                                     cluster.size(), &input_size);
    } else {
      throw ConfigError("wordcount needs --input or --gen zipf");
    }
    auto dv = DistVector<std::string>::from_local(cluster,
                                                  std::move(local_lines));
    auto counts = jobs::wordcount(dv, mode, opts, &stats);
    local_pairs = stats.pairs_shuffled;
    auto gathered = counts.gather(0);
    if (cluster.rank() == 0) {
      result.result_digest = digest_sorted(gathered);
      int64_t total_tokens = 0;
      for (const auto& [k, v] : gathered) {
        result.lines.emplace_back(k, std::to_string(v));
        total_tokens += v;
      }
      result.summary = {{"distinct_words", gathered.size()},
                        {"total_tokens", total_tokens}};
    }
  } else if (spec.job == "kmeans") {
    std::vector<jobs::Point> pts;
    if (cluster.rank() == 0) {
      if (!spec.gen.empty()) {
        if (spec.gen != "blobs") throw ConfigError("kmeans generator: blobs");
        pts = jobs::gaussian_blobs(spec.points, spec.dim,
                                   static_cast<int>(spec.k), 2.0, spec.seed);
      } else if (!spec.input.empty()) {
        pts = read_points_file(spec.input);
      } else {
        throw ConfigError("kmeans needs --input or --gen blobs");
      }
    }
    auto dv = DistVector<jobs::Point>::scatter(cluster, 0, pts);
    input_size = dv.global_len();
    jobs::KMeansOptions kopts;
    kopts.k = spec.k;
    kopts.max_iters = spec.max_iters;
    kopts.tol = spec.tol;
    auto state = jobs::kmeans(dv, kopts, opts, &stats);
    local_pairs = stats.pairs_shuffled;
    if (cluster.rank() == 0) {
      // Coordinates rounded to 1e-6 for the printable result and digest:
      // summation order perturbs the last bits across topologies.
      std::map<std::string, std::string> rounded;
      for (size_t j = 0; j < state.centroids.size(); ++j) {
        std::string coords;
        for (double x : state.centroids[j]) {
          char buf[32];
          std::snprintf(buf, sizeof(buf), "%.6f", x);
          if (!coords.empty()) coords.push_back(' ');
          coords += buf;
        }
        rounded["centroid_" + std::to_string(j)] = coords;
      }
      result.result_digest = digest_sorted(rounded);
      for (auto& [k, v] : rounded) result.lines.emplace_back(k, v);
      result.summary = {{"iterations", state.iterations},
                        {"final_shift", state.shift}};
    }
  } else if (spec.job == "pi") {
    double estimate =
        jobs::pi_estimate(cluster, spec.samples, spec.seed, opts, &stats);
    local_pairs = stats.pairs_shuffled;
    input_size = spec.samples;
    if (cluster.rank() == 0) {
      std::map<std::string, std::string> out{{"pi", format_double(estimate)}};
      result.result_digest = digest_sorted(out);
      result.lines.emplace_back("pi", format_double(estimate));
      result.summary = {{"estimate", estimate}, {"samples", spec.samples}};
    }
  } else {
    throw ConfigError("unknown job: " + spec.job);
  }

  auto totals = cluster.gather(0, encode_one<uint64_t>(local_pairs));
  if (cluster.rank() == 0) {
    result.total_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - start)
                          .count();
    for (const auto& b : totals)
      result.pairs_shuffled += Codec<uint64_t>::decode(b);
    result.stats = stats;
    result.input_size = input_size;
  }
}

json report_json(const RunSpec& spec, const RunResult& r) {
  return json{{"spec",
               {{"job", spec.job},
                {"mode", spec.mode},
                {"workers", spec.workers},
                {"threads", spec.threads},
                {"backend", spec.backend},
                {"seed", spec.seed}}},
              {"phases_ms",
               {{"map", r.stats.map_ms},
                {"shuffle", r.stats.shuffle_ms},
                {"sort", r.stats.sort_ms},
                {"reduce", r.stats.reduce_ms}}},
              {"total_ms", r.total_ms},
              {"input_size", r.input_size},
              {"pairs_shuffled", r.pairs_shuffled},
              {"peak_rss_bytes", peak_rss_bytes()},
              {"result_digest", r.result_digest},
              {"result", r.summary}};
}

void write_result_file(const std::string& path, const RunResult& r) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write output file " + path);
  for (const auto& [k, v] : r.lines) out << k << '\t' << v << '\n';
}

// Runs one spec. For inproc, spawns the worker threads here; for tcp,
// this process is a single rank of an externally described cluster.
RunResult run_spec(const RunSpec& spec) {
  if (spec.workers < 1 || spec.threads < 1)
    throw ConfigError("workers and threads must be >= 1");
  RunResult result;
  if (spec.backend == "inproc") {
    std::exception_ptr err;
    run_cluster(
        spec.workers,
        [&](Cluster& c) {
          RunResult local;
          execute_job(c, spec, local);
          if (c.rank() == 0) result = std::move(local);
        },
        std::chrono::milliseconds(spec.collective_timeout_ms));
  } else if (spec.backend == "tcp") {
    if (spec.cluster_file.empty() || spec.rank < 0)
      throw ConfigError("tcp backend needs --cluster-file and --rank");
    ClusterConfig cfg;
    cfg.backend = Backend::tcp;
    cfg.endpoints = parse_cluster_file(spec.cluster_file);
    cfg.num_workers = static_cast<int>(cfg.endpoints.size());
    cfg.rank = spec.rank;
    cfg.connect_timeout = std::chrono::milliseconds(spec.connect_timeout_ms);
    cfg.collective_timeout =
        std::chrono::milliseconds(spec.collective_timeout_ms);
    auto cluster = connect_tcp_cluster(cfg);
    execute_job(*cluster, spec, result);
    if (cluster->rank() != 0) result.lines.clear();
  } else {
    throw ConfigError("unknown backend: " + spec.backend);
  }
  return result;
}

int cmd_run(RunSpec spec) {
  if (spec.backend == "tcp" && !spec.cluster_file.empty())
    spec.workers =
        static_cast<int>(parse_cluster_file(spec.cluster_file).size());
  RunResult r = run_spec(spec);
  bool is_rank0 = spec.backend == "inproc" || spec.rank == 0;
  if (is_rank0) {
    if (!spec.out.empty()) write_result_file(spec.out, r);
    std::cout << report_json(spec, r).dump(2) << std::endl;
  }
  return 0;
}

std::string csv_header() {
  return "job,mode,workers,threads,input_size,map_ms,shuffle_ms,sort_ms,"
         "reduce_ms,total_ms,pairs_shuffled,peak_rss_bytes,result_digest,"
         "status";
}

std::string csv_row(const RunSpec& spec, const RunResult& r,
                    const std::string& status) {
  std::ostringstream os;
  os << spec.job << ',' << spec.mode << ',' << spec.workers << ','
     << spec.threads << ',' << r.input_size << ',' << r.stats.map_ms << ','
     << r.stats.shuffle_ms << ',' << r.stats.sort_ms << ','
     << r.stats.reduce_ms << ',' << r.total_ms << ',' << r.pairs_shuffled
     << ',' << peak_rss_bytes() << ',' << r.result_digest << ',' << status;
  return os.str();
}

int cmd_bench(RunSpec base, const std::vector<int>& workers_sweep,
              const std::vector<int>& threads_sweep,
              const std::vector<std::string>& modes,
              const std::string& csv_path) {
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!csv_path.empty()) {
    file.open(csv_path);
    if (!file) throw ConfigError("cannot write " + csv_path);
    out = &file;
  }
  *out << csv_header() << '\n';
  for (int w : workers_sweep) {
    for (int t : threads_sweep) {
      for (const auto& mode : modes) {
        RunSpec spec = base;
        spec.backend = "inproc";
        spec.workers = w;
        spec.threads = t;
        spec.mode = mode;
        try {
          RunResult r = run_spec(spec);
          *out << csv_row(spec, r, "ok") << '\n';
        } catch (const std::exception& e) {
          RunResult empty;
          std::string status = e.what();
          for (auto& c : status)
            if (c == ',' || c == '\n') c = ';';
          *out << csv_row(spec, empty, status) << '\n';
        }
        out->flush();
      }
    }
  }
  return 0;
}

int cmd_launch(int workers, const std::vector<std::string>& child_args) {
  if (workers < 1) throw ConfigError("workers must be >= 1");
  auto endpoints = free_endpoints(workers);
  char cluster_path[] = "/tmp/fastmr_cluster_XXXXXX";
  int fd = mkstemp(cluster_path);
  if (fd < 0) throw ConfigError("cannot create cluster spec file");
  {
    std::ofstream f(cluster_path);
    for (const auto& ep : endpoints) f << ep << '\n';
  }
  ::close(fd);

  std::vector<pid_t> children;
  auto kill_all = [&] {
    for (pid_t p : children) ::kill(p, SIGTERM);
    for (pid_t p : children) ::waitpid(p, nullptr, 0);
  };
  for (int r = 0; r < workers; ++r) {
    std::vector<std::string> args = {"/proc/self/exe", "run",
                                     "--backend",      "tcp",
                                     "--cluster-file", cluster_path,
                                     "--rank",         std::to_string(r)};
    args.insert(args.end(), child_args.begin(), child_args.end());
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = ::fork();
    if (pid == 0) {
      ::execv("/proc/self/exe", argv.data());
      _exit(127);
    }
    if (pid < 0) {
      kill_all();
      ::unlink(cluster_path);
      throw TransportError("fork failed while spawning workers");
    }
    children.push_back(pid);
  }
  int worst = 0;
  for (pid_t p : children) {
    int status = 0;
    ::waitpid(p, &status, 0);
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : 128;
    worst = std::max(worst, code);
  }
  ::unlink(cluster_path);
  return worst;
}

void add_spec_flags(CLI::App* cmd, RunSpec& spec) {
  cmd->add_option("--job", spec.job, "wordcount | kmeans | pi")->required();
  cmd->add_option("--mode", spec.mode, "eager | delayed");
  cmd->add_option("--threads", spec.threads, "map threads per worker");
  cmd->add_option("--input", spec.input, "input file path");
  cmd->add_option("--gen", spec.gen, "generator: zipf | blobs");
  cmd->add_option("--gen-bytes", spec.gen_bytes, "zipf corpus size in bytes");
  cmd->add_option("--vocab", spec.vocab, "zipf vocabulary size");
  cmd->add_option("--points", spec.points, "blob point count");
  cmd->add_option("--dim", spec.dim, "point dimension");
  cmd->add_option("--k", spec.k, "cluster count");
  cmd->add_option("--max-iters", spec.max_iters, "k-means iteration cap");
  cmd->add_option("--tol", spec.tol, "k-means convergence tolerance");
  cmd->add_option("--samples", spec.samples, "pi sample count");
  cmd->add_option("--seed", spec.seed, "generator seed");
  cmd->add_option("--out", spec.out, "result file (key<TAB>value, sorted)");
  cmd->add_option("--cache-capacity", spec.cache_capacity,
                  "thread-local cache slots");
  cmd->add_option("--connect-timeout", spec.connect_timeout_ms,
                  "tcp connect timeout, ms");
  cmd->add_option("--collective-timeout", spec.collective_timeout_ms,
                  "collective timeout, ms");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fastmr: in-memory MapReduce engine"};
  app.require_subcommand(1);

  RunSpec run_spec_args;
  auto* run_cmd = app.add_subcommand("run", "execute one job");
  add_spec_flags(run_cmd, run_spec_args);
  run_cmd->add_option("--workers", run_spec_args.workers,
                      "worker count (inproc)");
  run_cmd->add_option("--backend", run_spec_args.backend, "inproc | tcp");
  run_cmd->add_option("--cluster-file", run_spec_args.cluster_file,
                      "host:port per line, line = rank (tcp)");
  run_cmd->add_option("--rank", run_spec_args.rank, "this process rank (tcp)");

  RunSpec bench_args;
  std::vector<int> bench_workers{1};
  std::vector<int> bench_threads{1};
  std::vector<std::string> bench_modes{"eager"};
  std::string csv_path;
  auto* bench_cmd = app.add_subcommand("bench", "sweep specs, emit CSV");
  add_spec_flags(bench_cmd, bench_args);
  bench_cmd->add_option("--workers", bench_workers,
                        "worker counts to sweep")->delimiter(',');
  bench_cmd->add_option("--sweep-threads", bench_threads,
                        "thread counts to sweep")->delimiter(',');
  bench_cmd->add_option("--modes", bench_modes, "modes to sweep")
      ->delimiter(',');
  bench_cmd->add_option("--csv", csv_path, "CSV output path (default stdout)");

  int launch_workers = 1;
  auto* launch_cmd =
      app.add_subcommand("launch", "spawn local TCP worker processes");
  launch_cmd->add_option("--workers", launch_workers, "process count")
      ->required();
  // Everything after the launch flags is forwarded verbatim to each child
  // `run` invocation.
  launch_cmd->prefix_command();

  try {
    app.parse(argc, argv);
    if (run_cmd->parsed()) return cmd_run(run_spec_args);
    if (bench_cmd->parsed())
      return cmd_bench(bench_args, bench_workers, bench_threads, bench_modes,
                       csv_path);
    if (launch_cmd->parsed()) {
      auto extras = launch_cmd->remaining();
      return cmd_launch(launch_workers, extras);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const TransportError& e) {
    std::cerr << "transport failure: " << e.what() << std::endl;
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
