#pragma once

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <stdexcept>
#include <string>
#include <vector>

// Reserves n free loopback ports by binding to port 0 and releasing.
inline std::vector<std::string> free_endpoints(int n) {
  std::vector<std::string> eps;
  std::vector<int> fds;
  for (int i = 0; i < n; ++i) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (fd < 0 ||
        ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0)
      throw std::runtime_error("cannot reserve port");
    socklen_t len = sizeof(addr);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    eps.push_back("127.0.0.1:" + std::to_string(ntohs(addr.sin_port)));
    fds.push_back(fd);
  }
  for (int fd : fds) ::close(fd);
  return eps;
}
