#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace sketchrod {

struct ServeOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 7800;  // 0 picks an ephemeral port
  double tick_hz = 60.0;      // <= 0 disables pushed tick_updates
};

// TCP server speaking the length-prefixed JSON protocol. One Session per
// connection; each connection runs on its own thread.
class Server {
 public:
  explicit Server(ServeOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and starts accepting. Throws Io when the socket cannot be bound.
  void start();
  void stop();
  // Blocks until stop() is called from another thread or a signal handler.
  void wait();
  std::uint16_t port() const { return port_; }

 private:
  void accept_loop();
  void serve_connection(int fd);

  ServeOptions options_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::jthread acceptor_;
  std::mutex workers_mutex_;
  std::vector<std::jthread> workers_;
};

}  // namespace sketchrod
