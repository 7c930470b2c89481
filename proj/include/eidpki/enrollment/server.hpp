#pragma once

#include <atomic>
#include <cstdint>
#include <mutex>
#include <ostream>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "eidpki/enrollment/authority.hpp"
#include "eidpki/enrollment/wire.hpp"

namespace eidpki::enrollment {

// Request dispatch over an Authority. Reads share a lock; mutations and
// PCL generation (which fills a cache) take it exclusively, so every
// mutation is appended to the audit log by one writer at a time.
class Dispatcher {
 public:
  explicit Dispatcher(Authority& authority) : authority_(authority) {}

  // One request line in, one response line out (no newline either side).
  std::string handle(std::string_view line);

  static const std::vector<std::string>& operations();

 private:
  Json dispatch(const WireRequest& req);

  Authority& authority_;
  std::shared_mutex mutex_;
};

// TCP front end: one thread per connection, newline-framed.
class Server {
 public:
  explicit Server(Authority& authority) : dispatcher_(authority) {}
  ~Server();

  // Binds and listens; port 0 picks a free port. Returns the bound port.
  std::uint16_t bind(std::string_view host, std::uint16_t port);
  // Accept loop; returns after stop().
  void run();
  void stop();

  Dispatcher& dispatcher() { return dispatcher_; }

 private:
  void serve_connection(int fd);

  Dispatcher dispatcher_;
  int listen_fd_ = -1;
  std::atomic<bool> stopping_{false};
  std::mutex connections_mutex_;
  std::vector<int> connections_;
  std::vector<std::thread> threads_;
};

}  // namespace eidpki::enrollment
