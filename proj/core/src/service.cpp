#include "pere/service.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "pere/behavior.hpp"
#include "pere/errors.hpp"

namespace pere {

namespace {

using ordered_json = nlohmann::ordered_json;

ServiceResponse json_response(int status, const ordered_json& body) { return {status, body.dump()}; }

ServiceResponse error_response(int status, const std::string& message) {
  ordered_json body;
  body["error"] = message;
  return json_response(status, body);
}

std::string hex_id(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

ordered_json item_cards(const Catalog& catalog, const std::vector<ItemIndex>& items) {
  ordered_json cards = ordered_json::array();
  for (ItemIndex i : items) {
    ordered_json card;
    card["id"] = catalog.id(i);
    card["name"] = catalog.id(i);
    cards.push_back(std::move(card));
  }
  return cards;
}

ordered_json session_json(const std::string& id, const Session& s, const Catalog& catalog, const Config& config) {
  ordered_json j;
  j["session_id"] = id;
  j["state"] = to_string(s.phase());
  j["batch_token"] = s.batch_token();
  j["items"] = item_cards(catalog, s.outstanding());
  ordered_json region;
  region["round"] = s.round();
  region["radius"] = s.region().radius;
  region["cuts"] = s.region().cuts.size();
  j["region"] = std::move(region);
  ordered_json flags;
  flags["short_batch"] = s.short_batch();
  flags["fallback_batch"] = s.fallback_batch();
  flags["exhausted"] = s.exhausted();
  j["flags"] = std::move(flags);
  if (s.phase() == Phase::kDone) j["recommendations"] = item_cards(catalog, s.recommend(config.recommend_count));
  return j;
}

}  // namespace

SessionService::SessionService(std::shared_ptr<const Catalog> catalog, Config config, Options options)
    : catalog_(std::move(catalog)), config_(config), options_(options) {
  if (catalog_) elicitor_.emplace(catalog_, config_);
}

void SessionService::set_clock(std::function<Clock::time_point()> clock) { clock_ = std::move(clock); }

SessionService::Clock::time_point SessionService::now() const { return clock_ ? clock_() : Clock::now(); }

std::shared_ptr<SessionService::Entry> SessionService::find(std::string_view id) {
  std::lock_guard lock(store_mutex_);
  const auto it = sessions_.find(std::string(id));
  return it == sessions_.end() ? nullptr : it->second;
}

std::size_t SessionService::session_count() const {
  std::lock_guard lock(store_mutex_);
  return sessions_.size();
}

std::size_t SessionService::evict_expired(Clock::time_point at) {
  std::vector<std::string> expired;
  {
    std::lock_guard lock(store_mutex_);
    for (const auto& [id, entry] : sessions_) {
      std::unique_lock entry_lock(entry->mutex, std::try_to_lock);
      // A session that is busy right now is not idle.
      if (entry_lock.owns_lock() && at - entry->last_access > options_.ttl) expired.push_back(id);
    }
    for (const auto& id : expired) sessions_.erase(id);
  }
  return expired.size();
}

ServiceResponse SessionService::create_session() {
  if (!elicitor_) return error_response(503, "no catalog loaded");
  const auto stamp = now();
  evict_expired(stamp);
  auto entry = std::make_shared<Entry>();
  entry->last_access = stamp;
  std::string id;
  std::uint64_t seed = 0;
  {
    std::lock_guard lock(store_mutex_);
    seed = mix_seed(options_.seed, created_++);
    std::random_device entropy;
    do {
      id = hex_id(mix_seed(seed, (std::uint64_t{entropy()} << 32) | entropy()));
    } while (sessions_.count(id));
    sessions_.emplace(id, entry);
  }
  std::lock_guard entry_lock(entry->mutex);
  entry->session.emplace(elicitor_->start(seed));
  return json_response(201, session_json(id, *entry->session, *catalog_, config_));
}

ServiceResponse SessionService::submit_ratings(std::string_view session_id, std::string_view body) {
  const auto entry = find(session_id);
  if (!entry) return error_response(404, "unknown session");
  std::lock_guard lock(entry->mutex);
  if (!entry->session) return error_response(404, "unknown session");
  entry->last_access = now();

  ordered_json doc;
  try {
    doc = ordered_json::parse(body);
  } catch (const ordered_json::parse_error& e) {
    return error_response(400, std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("batch_token") || !doc["batch_token"].is_number_unsigned() ||
      !doc.contains("ratings") || !doc["ratings"].is_object()) {
    return error_response(400, "body must be {\"batch_token\": <n>, \"ratings\": {<item id>: \"+1\"|\"-1\"|\"NA\"}}");
  }
  const auto token = doc["batch_token"].get<std::uint64_t>();
  if (entry->last_token != 0 && token == entry->last_token && body == entry->last_body) {
    return entry->last_response;
  }
  Session& session = *entry->session;
  if (session.phase() == Phase::kDone) return error_response(409, "session is finished");
  if (token != session.batch_token()) {
    return error_response(409, "stale batch token " + std::to_string(token) + "; current batch is " +
                                   std::to_string(session.batch_token()));
  }

  std::vector<std::pair<ItemIndex, Rating>> ratings;
  for (const auto& [key, value] : doc["ratings"].items()) {
    if (!value.is_string()) return error_response(422, "rating for '" + key + "' must be \"+1\", \"-1\" or \"NA\"");
    const auto& text = value.get_ref<const std::string&>();
    Rating r;
    if (text == "+1") {
      r = Rating::kLike;
    } else if (text == "-1") {
      r = Rating::kDislike;
    } else if (text == "NA") {
      r = Rating::kNA;
    } else {
      return error_response(422, "rating for '" + key + "' must be \"+1\", \"-1\" or \"NA\", got \"" + text + "\"");
    }
    ratings.emplace_back(0, r);
    const auto index = catalog_->find(key);
    const auto& batch = session.outstanding();
    if (!index || std::find(batch.begin(), batch.end(), *index) == batch.end()) {
      return error_response(409, "item '" + key + "' is not in the outstanding batch");
    }
    ratings.back().first = *index;
  }

  try {
    session.submit(ratings);
  } catch (const InfeasibleRegion& e) {
    return error_response(409, e.what());
  } catch (const InvalidInput& e) {
    return error_response(409, e.what());
  }
  entry->last_token = token;
  entry->last_body = std::string(body);
  entry->last_response = json_response(200, session_json(std::string(session_id), session, *catalog_, config_));
  return entry->last_response;
}

ServiceResponse SessionService::region(std::string_view session_id, bool debug) {
  const auto entry = find(session_id);
  if (!entry) return error_response(404, "unknown session");
  std::lock_guard lock(entry->mutex);
  if (!entry->session) return error_response(404, "unknown session");
  entry->last_access = now();
  const Session& s = *entry->session;
  ordered_json j;
  j["session_id"] = std::string(session_id);
  j["state"] = to_string(s.phase());
  j["round"] = s.round();
  j["radius"] = s.region().radius;
  j["center_history_length"] = s.history().size();
  j["batch_token"] = s.batch_token();
  if (debug) j["center"] = std::vector<double>(s.region().center.begin(), s.region().center.end());
  return json_response(200, j);
}

ServiceResponse SessionService::health() const {
  ordered_json j;
  j["status"] = "ok";
  j["catalog_loaded"] = catalog_ != nullptr;
  j["sessions"] = session_count();
  return json_response(200, j);
}

struct HttpServer::Impl {
  SessionService& service;
  httplib::Server server;
};

HttpServer::HttpServer(SessionService& service, Logger logger) : impl_(new Impl{service, {}}) {
  auto& svr = impl_->server;
  // Without SO_REUSEPORT a second server on a busy port fails to bind.
  svr.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  const auto reply = [](httplib::Response& res, const ServiceResponse& r) {
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  svr.Post("/v1/sessions", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, impl_->service.create_session());
  });
  svr.Post(R"(/v1/sessions/([^/]+)/ratings)", [this, reply](const httplib::Request& req, httplib::Response& res) {
    reply(res, impl_->service.submit_ratings(req.matches[1].str(), req.body));
  });
  svr.Get(R"(/v1/sessions/([^/]+)/region)", [this, reply](const httplib::Request& req, httplib::Response& res) {
    const bool debug = req.has_param("debug") && req.get_param_value("debug") == "true";
    reply(res, impl_->service.region(req.matches[1].str(), debug));
  });
  svr.Get("/v1/healthz", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, impl_->service.health());
  });
  if (logger) {
    svr.set_logger([logger](const httplib::Request& req, const httplib::Response& res) {
      logger(req.method, req.path, res.status);
    });
  }
}

HttpServer::~HttpServer() {
  if (impl_->server.is_running()) impl_->server.stop();
}

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error("cannot bind to " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw Error("cannot bind to " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::run() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace pere
