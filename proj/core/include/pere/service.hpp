#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

#include "pere/data.hpp"
#include "pere/engine.hpp"

namespace pere {

struct ServiceResponse {
  int status = 200;
  std::string body;
};

/// The /v1 session API as plain functions from request to JSON response, so
/// it can be exercised without sockets. Thread-safe: distinct sessions run
/// concurrently, requests for one session are serialized.
class SessionService {
 public:
  using Clock = std::chrono::steady_clock;

  struct Options {
    std::chrono::seconds ttl{3600};
    /// Mixed into session seeds and ids.
    std::uint64_t seed = 0;
  };

  /// A null catalog yields a service that answers 503 on session creation.
  SessionService(std::shared_ptr<const Catalog> catalog, Config config, Options options);
  SessionService(std::shared_ptr<const Catalog> catalog, Config config)
      : SessionService(std::move(catalog), config, Options{}) {}

  /// POST /v1/sessions
  ServiceResponse create_session();
  /// POST /v1/sessions/{id}/ratings with {"batch_token": n, "ratings": {"<item id>": "+1"|"-1"|"NA"}}
  ServiceResponse submit_ratings(std::string_view session_id, std::string_view body);
  /// GET /v1/sessions/{id}/region; debug adds the raw center.
  ServiceResponse region(std::string_view session_id, bool debug);
  /// GET /v1/healthz
  ServiceResponse health() const;

  /// Drops sessions idle for longer than the TTL; returns how many.
  std::size_t evict_expired(Clock::time_point now);
  std::size_t session_count() const;

  /// Test hook: replaces the clock used to stamp session activity.
  void set_clock(std::function<Clock::time_point()> clock);

 private:
  struct Entry {
    std::mutex mutex;
    std::optional<Session> session;
    Clock::time_point last_access;
    std::uint64_t last_token = 0;
    std::string last_body;
    ServiceResponse last_response;
  };

  std::shared_ptr<Entry> find(std::string_view id);
  Clock::time_point now() const;

  std::shared_ptr<const Catalog> catalog_;
  Config config_;
  Options options_;
  std::optional<Elicitor> elicitor_;
  mutable std::mutex store_mutex_;
  std::unordered_map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t created_ = 0;
  std::function<Clock::time_point()> clock_;
};

/// HTTP front end over SessionService.
class HttpServer {
 public:
  using Logger = std::function<void(const std::string& method, const std::string& path, int status)>;

  explicit HttpServer(SessionService& service, Logger logger = {});
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to host:port (port 0 picks a free one) and returns the bound port.
  /// Throws Error when the address is unavailable.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called.
  void run();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace pere
