#pragma once

#include <chrono>
#include <cstdint>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "medevac/service.hpp"

namespace medevac {

/// HTTP + server-sent-event front end for a DispatchService. Durations are
/// minutes, timestamps ISO-8601, errors `{code, message, field?}`.
class HttpApi {
 public:
  explicit HttpApi(DispatchService& svc) : svc_(svc) { routes(); }
  ~HttpApi() { stop(); }

  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  int bind_any_port(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void wait_until_ready() { server_.wait_until_ready(); }
  void stop() {
    svc_.stop_feed();
    if (server_.is_running()) server_.stop();
  }

 private:
  static void send(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                    const std::string& field = "") {
    nlohmann::json body{{"code", code}, {"message", message}};
    if (!field.empty()) body["field"] = field;
    send(res, status, body);
  }

  /// Maps domain exceptions onto status codes.
  template <class Fn>
  static void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const RequestError& e) {
      error(res, 400, "invalid_request", e.what(), e.field());
    } catch (const NotFound& e) {
      error(res, 404, "not_found", e.what());
    } catch (const Conflict& e) {
      error(res, 409, "conflict", e.what());
    } catch (const StateError& e) {
      error(res, 409, "invalid_state", e.what());
    } catch (const InfeasibleRequest& e) {
      error(res, 422, "infeasible", e.what());
    } catch (const std::exception& e) {
      error(res, 500, "internal", e.what());
    }
  }

  static nlohmann::json body_of(const httplib::Request& req) {
    auto j = nlohmann::json::parse(req.body, nullptr, false);
    if (j.is_discarded()) throw RequestError("", "request body is not valid JSON");
    return j;
  }

  void routes() {
    server_.Post("/api/requests", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto m = svc_.submit_request(body_of(req));
        send(res, 201, mission_json(svc_.scenario(), svc_.iso(), m));
      });
    });

    server_.Post(R"(/api/missions/([^/]+)/delays)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = body_of(req);
        if (!body.is_object() || !body.contains("minutes") || !body.at("minutes").is_number())
          throw RequestError("minutes", "'minutes' must be a number");
        std::string cause = "unspecified";
        if (body.contains("cause")) {
          if (!body.at("cause").is_string()) throw RequestError("cause", "'cause' must be a string");
          cause = body.at("cause").get<std::string>();
        }
        const auto m = svc_.inject_delay(req.matches[1], cause, body.at("minutes").get<double>());
        send(res, 200, mission_json(svc_.scenario(), svc_.iso(), m));
      });
    });

    server_.Get(R"(/api/missions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send(res, 200, mission_json(svc_.scenario(), svc_.iso(), svc_.get_mission(req.matches[1]))); });
    });

    server_.Get("/api/state", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send(res, 200, svc_.get_state()); });
    });

    server_.Get("/api/scenario", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send(res, 200, to_json(svc_.scenario())); });
    });

    // Stepped clock control for exercises run faster than wall time.
    server_.Post("/api/clock/advance", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto body = body_of(req);
        if (!body.is_object() || !body.contains("minutes") || !body.at("minutes").is_number())
          throw RequestError("minutes", "'minutes' must be a number");
        svc_.advance_clock(body.at("minutes").get<double>() / 60.0);
        send(res, 200, svc_.get_state());
      });
    });

    // Server-sent events. Resume with ?since=<seq> or a Last-Event-ID header;
    // ?limit=<n> closes the stream after n events.
    server_.Get("/api/events", [this](const httplib::Request& req, httplib::Response& res) {
      std::uint64_t since = 0;
      std::uint64_t limit = 0;
      try {
        if (req.has_header("Last-Event-ID")) since = std::stoull(req.get_header_value("Last-Event-ID"));
        if (req.has_param("since")) since = std::stoull(req.get_param_value("since"));
        if (req.has_param("limit")) limit = std::stoull(req.get_param_value("limit"));
      } catch (const std::exception&) {
        error(res, 400, "invalid_request", "'since' and 'limit' must be non-negative integers", "since");
        return;
      }
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream", [this, cursor = since, limit, sent = std::uint64_t{0}](std::size_t, httplib::DataSink& sink) mutable {
            using namespace std::chrono_literals;
            while (!svc_.stopping()) {
              const auto batch = svc_.events_since(cursor, 5s);
              for (const auto& e : batch) {
                const std::string frame = "id: " + std::to_string(e.seq) + "\nevent: " + e.type +
                                          "\ndata: " + detail::event_api(svc_.iso(), e).dump() + "\n\n";
                if (!sink.write(frame.data(), frame.size())) return false;
                cursor = e.seq;
                if (limit && ++sent >= limit) {
                  sink.done();
                  return true;
                }
              }
              if (batch.empty()) {
                static constexpr char kKeepAlive[] = ": keep-alive\n\n";
                if (!sink.write(kKeepAlive, sizeof kKeepAlive - 1)) return false;
              }
            }
            sink.done();
            return true;
          });
    });
  }

  DispatchService& svc_;
  httplib::Server server_;
};

}  // namespace medevac
