#pragma once

// In-process HTTP server for exercising the remote gateway and verifier
// clients without leaving the test process.

#include <chrono>
#include <functional>
#include <string>
#include <thread>

#include <httplib.h>

class StubServer {
 public:
  StubServer() = default;

  ~StubServer() { stop(); }

  httplib::Server& server() { return server_; }

  // Binds to an ephemeral port and serves until stop().
  std::string start() {
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    while (!server_.is_running())
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
    return "http://127.0.0.1:" + std::to_string(port_);
  }

  void stop() {
    if (thread_.joinable()) {
      server_.stop();
      thread_.join();
    }
  }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};
