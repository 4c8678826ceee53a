#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <condition_variable>
#include <cstring>
#include <deque>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "fastmr/codec.hpp"
#include "fastmr/transport.hpp"

namespace fastmr {
namespace {

constexpr char kMagic[4] = {'F', 'M', 'R', '1'};

struct Frame {
  uint16_t tag;
  std::string payload;
};

// One inbound queue per peer, fed by that peer's reader thread.
class FrameQueue {
 public:
  void push(Frame f) {
    {
      std::lock_guard<std::mutex> lk(m_);
      q_.push_back(std::move(f));
    }
    cv_.notify_one();
  }

  void fail(std::string reason) {
    {
      std::lock_guard<std::mutex> lk(m_);
      error_ = std::move(reason);
    }
    cv_.notify_all();
  }

  Frame pop(std::chrono::milliseconds timeout) {
    std::unique_lock<std::mutex> lk(m_);
    if (!cv_.wait_for(lk, timeout,
                      [&] { return !q_.empty() || !error_.empty(); }))
      throw TransportError("collective timeout waiting for peer");
    if (q_.empty()) throw TransportError(error_);
    Frame f = std::move(q_.front());
    q_.pop_front();
    return f;
  }

 private:
  std::mutex m_;
  std::condition_variable cv_;
  std::deque<Frame> q_;
  std::string error_;
};

void close_fd(int& fd) {
  if (fd >= 0) {
    ::close(fd);
    fd = -1;
  }
}

bool write_all(int fd, const void* data, size_t len) {
  const char* p = static_cast<const char*>(data);
  while (len > 0) {
    ssize_t n = ::send(fd, p, len, MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && (errno == EINTR)) continue;
      return false;
    }
    p += n;
    len -= static_cast<size_t>(n);
  }
  return true;
}

bool read_all(int fd, void* data, size_t len) {
  char* p = static_cast<char*>(data);
  while (len > 0) {
    ssize_t n = ::recv(fd, p, len, 0);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      return false;
    }
    p += n;
    len -= static_cast<size_t>(n);
  }
  return true;
}

std::pair<std::string, uint16_t> split_endpoint(const std::string& ep) {
  auto pos = ep.rfind(':');
  if (pos == std::string::npos)
    throw ConfigError("endpoint missing port: " + ep);
  int port = std::stoi(ep.substr(pos + 1));
  if (port < 1 || port > 65535) throw ConfigError("bad port in " + ep);
  return {ep.substr(0, pos), static_cast<uint16_t>(port)};
}

class TcpCluster final : public Cluster {
 public:
  explicit TcpCluster(const ClusterConfig& cfg)
      : Cluster(cfg.rank, cfg.num_workers),
        timeout_(cfg.collective_timeout),
        fds_(cfg.num_workers, -1) {
    if (static_cast<int>(cfg.endpoints.size()) != size_)
      throw ConfigError("endpoint count does not match num_workers");
    if (rank_ < 0 || rank_ >= size_) throw ConfigError("rank out of range");
    for (int i = 0; i < size_; ++i)
      for (int j = i + 1; j < size_; ++j)
        if (cfg.endpoints[i] == cfg.endpoints[j])
          throw ConfigError("duplicate endpoint " + cfg.endpoints[i]);
    queues_.reserve(size_);
    for (int i = 0; i < size_; ++i)
      queues_.push_back(std::make_unique<FrameQueue>());
    try {
      establish_mesh(cfg);
    } catch (...) {
      teardown();
      throw;
    }
    for (int peer = 0; peer < size_; ++peer)
      if (peer != rank_)
        readers_.emplace_back([this, peer] { reader_loop(peer); });
  }

  ~TcpCluster() override { teardown(); }

 protected:
  void do_barrier() override {
    uint16_t tag = next_tag();
    if (rank_ == 0) {
      for (int i = 1; i < size_; ++i) recv_from(i, tag);
      for (int i = 1; i < size_; ++i) send_to(i, tag, "");
    } else {
      send_to(0, tag, "");
      recv_from(0, tag);
    }
  }

  std::vector<std::string> do_all_to_all(
      std::vector<std::string> buckets) override {
    uint16_t tag = next_tag();
    for (int j = 0; j < size_; ++j)
      if (j != rank_) send_to(j, tag, buckets[j]);
    std::vector<std::string> result(size_);
    result[rank_] = std::move(buckets[rank_]);
    for (int i = 0; i < size_; ++i)
      if (i != rank_) result[i] = recv_from(i, tag);
    return result;
  }

  std::vector<std::string> do_gather(WorkerId root,
                                     std::string payload) override {
    uint16_t tag = next_tag();
    if (rank_ != root) {
      send_to(root, tag, payload);
      return {};
    }
    std::vector<std::string> result(size_);
    result[rank_] = std::move(payload);
    for (int i = 0; i < size_; ++i)
      if (i != rank_) result[i] = recv_from(i, tag);
    return result;
  }

  std::string do_broadcast(WorkerId root, std::string payload) override {
    uint16_t tag = next_tag();
    if (rank_ == root) {
      for (int i = 0; i < size_; ++i)
        if (i != rank_) send_to(i, tag, payload);
      return payload;
    }
    return recv_from(root, tag);
  }

 private:
  void establish_mesh(const ClusterConfig& cfg) {
    if (size_ == 1) return;
    auto [host, port] = split_endpoint(cfg.endpoints[rank_]);
    (void)host;  // always bind all interfaces locally

    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw TransportError("socket() failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(port);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) <
        0)
      throw TransportError("bind failed on " + cfg.endpoints[rank_]);
    if (::listen(listen_fd_, size_) < 0)
      throw TransportError("listen failed");

    // Lower rank connects to higher rank.
    auto deadline = std::chrono::steady_clock::now() + cfg.connect_timeout;
    for (int peer = rank_ + 1; peer < size_; ++peer)
      connect_to(peer, cfg.endpoints[peer], deadline);
    for (int n = 0; n < rank_; ++n) accept_one(deadline);
    for (int peer = 0; peer < size_; ++peer)
      if (peer != rank_ && fds_[peer] < 0)
        throw TransportError("peer " + std::to_string(peer) +
                             " never connected");
    close_fd(listen_fd_);
  }

  void connect_to(int peer, const std::string& endpoint,
                  std::chrono::steady_clock::time_point deadline) {
    auto [host, port] = split_endpoint(endpoint);
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints,
                      &res) != 0 ||
        res == nullptr)
      throw TransportError("cannot resolve " + endpoint);

    int fd = -1;
    for (;;) {
      fd = ::socket(AF_INET, SOCK_STREAM, 0);
      if (fd >= 0 && ::connect(fd, res->ai_addr, res->ai_addrlen) == 0) break;
      close_fd(fd);
      if (std::chrono::steady_clock::now() >= deadline) {
        ::freeaddrinfo(res);
        throw TransportError("connect timeout: peer " + std::to_string(peer) +
                             " (" + endpoint + ") unreachable");
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    ::freeaddrinfo(res);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

    char hello[6];
    std::memcpy(hello, kMagic, 4);
    hello[4] = static_cast<char>(rank_ & 0xff);
    hello[5] = static_cast<char>((rank_ >> 8) & 0xff);
    if (!write_all(fd, hello, 6) || !read_all(fd, hello, 6) ||
        std::memcmp(hello, kMagic, 4) != 0) {
      close_fd(fd);
      throw TransportError("handshake failed with peer " +
                           std::to_string(peer));
    }
    int got = static_cast<unsigned char>(hello[4]) |
              static_cast<unsigned char>(hello[5]) << 8;
    if (got != peer) {
      close_fd(fd);
      throw TransportError("rank collision: expected peer " +
                           std::to_string(peer) + ", got " +
                           std::to_string(got));
    }
    fds_[peer] = fd;
  }

  void accept_one(std::chrono::steady_clock::time_point deadline) {
    for (;;) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0)
        throw TransportError("connect timeout waiting for lower-rank peers");
      pollfd pfd{listen_fd_, POLLIN, 0};
      int pr = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (pr == 0) continue;
      if (pr < 0) throw TransportError("poll failed");
      int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      char hello[6];
      if (!read_all(fd, hello, 6) || std::memcmp(hello, kMagic, 4) != 0) {
        close_fd(fd);
        continue;  // stray connection
      }
      int peer = static_cast<unsigned char>(hello[4]) |
                 static_cast<unsigned char>(hello[5]) << 8;
      if (peer < 0 || peer >= size_ || peer == rank_ || fds_[peer] >= 0) {
        close_fd(fd);
        throw TransportError("rank collision on accept: rank " +
                             std::to_string(peer));
      }
      std::memcpy(hello, kMagic, 4);
      hello[4] = static_cast<char>(rank_ & 0xff);
      hello[5] = static_cast<char>((rank_ >> 8) & 0xff);
      if (!write_all(fd, hello, 6)) {
        close_fd(fd);
        throw TransportError("handshake reply failed");
      }
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      fds_[peer] = fd;
      return;
    }
  }

  // Wire frame: [u32 LE total length][u16 LE tag][payload],
  // total length = 2 + payload size.
  void send_to(int peer, uint16_t tag, std::string_view payload) {
    std::string header;
    detail::put_u32_le(header, static_cast<uint32_t>(2 + payload.size()));
    header.push_back(static_cast<char>(tag & 0xff));
    header.push_back(static_cast<char>((tag >> 8) & 0xff));
    if (!write_all(fds_[peer], header.data(), header.size()) ||
        (!payload.empty() &&
         !write_all(fds_[peer], payload.data(), payload.size())))
      throw TransportError("send to peer " + std::to_string(peer) +
                           " failed (disconnect?)");
  }

  std::string recv_from(int peer, uint16_t expected_tag) {
    Frame f = queues_[peer]->pop(timeout_);
    if (f.tag != expected_tag)
      throw TransportError("collective order mismatch with peer " +
                           std::to_string(peer));
    return std::move(f.payload);
  }

  void reader_loop(int peer) {
    int fd = fds_[peer];
    for (;;) {
      char header[6];
      if (!read_all(fd, header, 6)) {
        queues_[peer]->fail("peer " + std::to_string(peer) + " disconnected");
        return;
      }
      uint32_t total = detail::get_u32_le(header);
      if (total < 2) {
        queues_[peer]->fail("malformed frame from peer " +
                            std::to_string(peer));
        return;
      }
      Frame f;
      f.tag = static_cast<uint16_t>(static_cast<unsigned char>(header[4]) |
                                    static_cast<unsigned char>(header[5]) << 8);
      f.payload.resize(total - 2);
      if (!f.payload.empty() &&
          !read_all(fd, f.payload.data(), f.payload.size())) {
        queues_[peer]->fail("peer " + std::to_string(peer) +
                            " disconnected mid-frame");
        return;
      }
      queues_[peer]->push(std::move(f));
    }
  }

  uint16_t next_tag() { return seq_++; }

  void teardown() {
    for (auto& fd : fds_) {
      if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
    }
    for (auto& t : readers_)
      if (t.joinable()) t.join();
    for (auto& fd : fds_) close_fd(fd);
    close_fd(listen_fd_);
  }

  std::chrono::milliseconds timeout_;
  std::vector<int> fds_;
  int listen_fd_ = -1;
  std::vector<std::unique_ptr<FrameQueue>> queues_;
  std::vector<std::thread> readers_;
  uint16_t seq_ = 0;
};

}  // namespace

std::unique_ptr<Cluster> connect_tcp_cluster(const ClusterConfig& config) {
  return std::make_unique<TcpCluster>(config);
}

std::vector<std::string> parse_cluster_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open cluster file " + path);
  std::vector<std::string> endpoints;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' '))
      line.pop_back();
    if (line.empty()) continue;
    endpoints.push_back(line);
  }
  if (endpoints.empty()) throw ConfigError("cluster file " + path + " empty");
  return endpoints;
}

}  // namespace fastmr
