// Copyright 2026 The SalientGrads Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>

#include <fmt/format.h>

#include "salientgrads/errors.hpp"
#include "salientgrads/transport.hpp"

namespace salientgrads {
namespace {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { reset(); }
  Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
  Socket& operator=(Socket&& other) noexcept {
    if (this != &other) {
      reset();
      fd_ = other.fd_;
      other.fd_ = -1;
    }
    return *this;
  }

  int fd() const { return fd_; }
  void shutdown() const {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
  }

 private:
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  int fd_ = -1;
};

[[noreturn]] void fail(std::string_view what) {
  throw TransportError(fmt::format("{}: {}", what, std::strerror(errno)));
}

void write_all(int fd, const std::uint8_t* data, std::size_t size) {
  while (size > 0) {
    const ssize_t n = ::send(fd, data, size, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail("send");
    }
    data += n;
    size -= static_cast<std::size_t>(n);
  }
}

void read_all(int fd, std::uint8_t* data, std::size_t size) {
  while (size > 0) {
    const ssize_t n = ::recv(fd, data, size, 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail("recv");
    }
    if (n == 0) throw TransportError("connection closed");
    data += n;
    size -= static_cast<std::size_t>(n);
  }
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

class LoopbackTransport final : public Transport {
 public:
  explicit LoopbackTransport(std::size_t clients) : Transport(clients) {
    Socket listener(::socket(AF_INET, SOCK_STREAM, 0));
    if (listener.fd() < 0) fail("socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    if (::bind(listener.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
      fail("bind");
    }
    if (::listen(listener.fd(), 1) < 0) fail("listen");
    socklen_t len = sizeof(addr);
    if (::getsockname(listener.fd(), reinterpret_cast<sockaddr*>(&addr), &len) < 0) {
      fail("getsockname");
    }
    // Connect and accept one at a time so link i is client i.
    for (std::size_t i = 0; i < clients; ++i) {
      Socket client(::socket(AF_INET, SOCK_STREAM, 0));
      if (client.fd() < 0) fail("socket");
      if (::connect(client.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0) {
        fail("connect");
      }
      Socket server(::accept(listener.fd(), nullptr, nullptr));
      if (server.fd() < 0) fail("accept");
      set_nodelay(client.fd());
      set_nodelay(server.fd());
      client_side_.push_back(std::move(client));
      server_side_.push_back(std::move(server));
    }
  }

  ~LoopbackTransport() override { abort(); }

  void abort() override {
    aborted_ = true;
    for (const Socket& s : client_side_) s.shutdown();
    for (const Socket& s : server_side_) s.shutdown();
  }

 protected:
  void write_frame(Direction direction, std::size_t client,
                   wire::Bytes frame) override {
    if (aborted_) throw TransportError("transport aborted");
    const int fd = direction == Direction::kUp ? client_side_[client].fd()
                                               : server_side_[client].fd();
    wire::Writer out(4 + frame.size());
    out.u32(static_cast<std::uint32_t>(frame.size()));
    wire::Bytes buffer = std::move(out).take();
    buffer.insert(buffer.end(), frame.begin(), frame.end());
    write_all(fd, buffer.data(), buffer.size());
  }

  wire::Bytes read_frame(Direction direction, std::size_t client) override {
    if (aborted_) throw TransportError("transport aborted");
    const int fd = direction == Direction::kUp ? server_side_[client].fd()
                                               : client_side_[client].fd();
    std::uint8_t header[4];
    read_all(fd, header, sizeof(header));
    const std::uint32_t size = wire::Reader(header).u32();
    wire::Bytes frame(size);
    read_all(fd, frame.data(), frame.size());
    return frame;
  }

 private:
  std::vector<Socket> client_side_;
  std::vector<Socket> server_side_;
  std::atomic<bool> aborted_{false};
};

}  // namespace

std::unique_ptr<Transport> make_loopback_transport(std::size_t clients) {
  return std::make_unique<LoopbackTransport>(clients);
}

}  // namespace salientgrads
