#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <thread>

#include "session.hpp"

namespace livewire::service {

inline constexpr std::size_t kMaxMessageBytes = 1 << 20;

/// WebSocket front end: one connection owns one ServiceSession.
class WebSocketServer {
 public:
  /// Binds immediately; port 0 picks a free port.
  WebSocketServer(const std::string& address, unsigned short port, ServiceConfig config = {});
  ~WebSocketServer();
  WebSocketServer(const WebSocketServer&) = delete;
  WebSocketServer& operator=(const WebSocketServer&) = delete;

  unsigned short port() const;
  /// Serves on the calling thread until stop().
  void run();
  /// Serves on a background thread.
  void start();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::thread thread_;
};

}  // namespace livewire::service
