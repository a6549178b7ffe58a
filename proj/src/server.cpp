#include "server.hpp"

#include "error.hpp"
#include "protocol.hpp"
#include "session.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cstring>

namespace sketchrod {

namespace {

bool send_all(int fd, const std::string& bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) return false;
    sent += static_cast<std::size_t>(n);
  }
  return true;
}

bool send_json(int fd, const Json& j) { return send_all(fd, encode_frame(j.dump())); }

}  // namespace

Server::Server(ServeOptions options) : options_(std::move(options)) {}

Server::~Server() { stop(); }

void Server::start() {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(ErrorCode::Io, std::string("socket: ") + std::strerror(errno));
  const int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(options_.port);
  if (::inet_pton(AF_INET, options_.host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    throw Error(ErrorCode::InvalidArgument, "invalid listen address " + options_.host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) < 0 || ::listen(listen_fd_, 16) < 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(ErrorCode::Io, "cannot listen on " + options_.host + ":" + std::to_string(options_.port) + ": " + why);
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  running_ = true;
  acceptor_ = std::jthread([this] { accept_loop(); });
}

void Server::stop() {
  running_ = false;
  if (acceptor_.joinable()) acceptor_.join();
  {
    std::lock_guard lock(workers_mutex_);
    workers_.clear();  // jthread joins
  }
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
}

void Server::wait() {
  while (running_) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

void Server::accept_loop() {
  while (running_) {
    pollfd pfd{listen_fd_, POLLIN, 0};
    if (::poll(&pfd, 1, 100) <= 0) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    std::lock_guard lock(workers_mutex_);
    workers_.emplace_back([this, fd] { serve_connection(fd); });
  }
}

void Server::serve_connection(int fd) {
  using Clock = std::chrono::steady_clock;
  Session session;
  ProtocolHandler handler(session);
  FrameDecoder decoder;
  const bool ticking = options_.tick_hz > 0.0;
  const auto period = std::chrono::duration_cast<Clock::duration>(
      std::chrono::duration<double>(ticking ? 1.0 / options_.tick_hz : 1.0));
  auto next_tick = Clock::now() + period;
  char buffer[1 << 16];
  bool open = true;

  while (open && running_) {
    const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(next_tick - Clock::now()).count();
    pollfd pfd{fd, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(std::clamp<long long>(wait, 0, 50)));
    if (ready > 0) {
      const ssize_t n = ::recv(fd, buffer, sizeof(buffer), 0);
      if (n <= 0) break;
      decoder.feed(buffer, static_cast<std::size_t>(n));
      try {
        while (auto message = decoder.next())
          if (!send_json(fd, handler.handle(*message))) {
            open = false;
            break;
          }
      } catch (const Error& e) {
        // Oversized frame: the stream cannot be resynchronized.
        send_json(fd, ProtocolHandler::error_response(e.code(), e.what()));
        break;
      }
    }
    if (ticking && Clock::now() >= next_tick) {
      next_tick += period;
      if (Clock::now() > next_tick) next_tick = Clock::now() + period;
      for (const auto& update : handler.tick())
        if (!send_json(fd, update)) {
          open = false;
          break;
        }
    }
  }
  ::close(fd);
}

}  // namespace sketchrod
