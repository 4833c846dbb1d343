#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "kbforge/flow_data.hpp"

namespace kbforge::testing {

inline FlowRecord make_record(std::initializer_list<std::pair<Feature, double>> values,
                              std::optional<AttackLabel> label = std::nullopt) {
  FeatureVector v{};
  for (const auto& [f, x] : values) v[index_of(f)] = x;
  return FlowRecord(v, label);
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("kbforge_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Local Ollama-compatible endpoint with scripted replies. Serves
/// /api/generate and /v1/chat/completions on 127.0.0.1 and an ephemeral port.
class StubLlmServer {
 public:
  struct Reply {
    int status = 200;
    std::string body;
    std::chrono::milliseconds delay{0};
  };

  /// Generate-endpoint body {"response": text}.
  static Reply generate_reply(const std::string& text) {
    return {200, nlohmann::json{{"model", "stub"}, {"response", text}, {"done", true}}.dump()};
  }
  static Reply chat_reply(const std::string& text) {
    return {200, nlohmann::json{{"choices", {{{"message", {{"role", "assistant"},
                                                           {"content", text}}}}}}}
                     .dump()};
  }

  StubLlmServer() {
    auto handler = [this](const httplib::Request& req, httplib::Response& res) {
      const int now = ++active_;
      int seen = max_active_.load();
      while (now > seen && !max_active_.compare_exchange_weak(seen, now)) {
      }
      Reply reply;
      {
        std::lock_guard lock(mutex_);
        paths_.push_back(req.path);
        bodies_.push_back(req.body);
        content_types_.push_back(req.get_header_value("Content-Type"));
        if (!script_.empty()) {
          reply = script_.front();
          script_.pop_front();
        } else if (responder_) {
          nlohmann::json body = nlohmann::json::parse(req.body, nullptr, false);
          reply = responder_(req.path, body);
        } else {
          reply = fallback_;
        }
      }
      if (reply.delay.count() > 0) std::this_thread::sleep_for(reply.delay);
      res.status = reply.status;
      res.set_content(reply.body, "application/json");
      --active_;
    };
    server_.Post("/api/generate", handler);
    server_.Post("/v1/chat/completions", handler);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~StubLlmServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  StubLlmServer(const StubLlmServer&) = delete;
  StubLlmServer& operator=(const StubLlmServer&) = delete;

  std::string base_url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  void script(std::vector<Reply> replies) {
    std::lock_guard lock(mutex_);
    script_.assign(replies.begin(), replies.end());
  }
  void set_fallback(Reply reply) {
    std::lock_guard lock(mutex_);
    fallback_ = std::move(reply);
  }
  void set_responder(std::function<Reply(const std::string&, const nlohmann::json&)> fn) {
    std::lock_guard lock(mutex_);
    responder_ = std::move(fn);
  }

  std::size_t hits() const {
    std::lock_guard lock(mutex_);
    return bodies_.size();
  }
  std::vector<std::string> bodies() const {
    std::lock_guard lock(mutex_);
    return bodies_;
  }
  std::vector<std::string> paths() const {
    std::lock_guard lock(mutex_);
    return paths_;
  }
  std::vector<std::string> content_types() const {
    std::lock_guard lock(mutex_);
    return content_types_;
  }
  int max_concurrent() const { return max_active_.load(); }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  mutable std::mutex mutex_;
  std::deque<Reply> script_;
  Reply fallback_ = generate_reply("Unknown");
  std::function<Reply(const std::string&, const nlohmann::json&)> responder_;
  std::vector<std::string> paths_;
  std::vector<std::string> bodies_;
  std::vector<std::string> content_types_;
  std::atomic<int> active_{0};
  std::atomic<int> max_active_{0};
};

/// A port on 127.0.0.1 with nothing listening (bound, then closed).
inline int unused_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

}  // namespace kbforge::testing
