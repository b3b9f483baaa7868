// Copyright 2026 The prosoctl Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <functional>
#include <string>

#include "httplib.h"
#include "json.hpp"
#include "prosoctl/service/session.hpp"

namespace prosoctl::service {

struct HttpConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
};

namespace detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}, {"status", status}});
}

inline nlohmann::json parse_body(const httplib::Request& req, bool allow_empty = false) {
  if (req.body.empty()) {
    if (allow_empty) return nlohmann::json::object();
    throw bad_request("request body must be a JSON object");
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::parse_error& e) {
    throw bad_request(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw bad_request("request body must be a JSON object");
  return j;
}

inline std::uint64_t revision_of(const nlohmann::json& j) {
  if (!j.contains("revision") || !j["revision"].is_number_unsigned())
    throw bad_request("\"revision\" (non-negative integer) is required");
  return j["revision"].get<std::uint64_t>();
}

/// Runs a handler and maps failures to status codes.
inline void guarded(httplib::Response& res, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ServiceError& e) {
    send_error(res, e.status(), e.what());
  } catch (const DataError& e) {
    send_error(res, 400, e.what());
  } catch (const UsageError& e) {
    send_error(res, 400, e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

}  // namespace detail

/// Registers the session API on `server`.
inline void install_routes(httplib::Server& server, SessionManager& sessions, const HttpConfig& cfg = {}) {
  using detail::guarded;
  using detail::send_json;
  const auto& ctx = sessions.context();

  server.set_default_headers({{"Access-Control-Allow-Origin", cfg.cors_origin},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                              {"Access-Control-Allow-Headers", "Content-Type"}});
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  });

  server.Get("/utterances", [&ctx](const httplib::Request&, httplib::Response& res) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& [id, u] : ctx.utterances)
      list.push_back({{"utterance_id", id}, {"speaker_id", u.speaker_id}, {"n_phones", u.phones.size()}});
    send_json(res, 200, {{"utterances", list}});
  });

  server.Post("/sessions", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = detail::parse_body(req);
      if (!body.contains("utterance_id") || !body["utterance_id"].is_string())
        throw bad_request("\"utterance_id\" (string) is required");
      std::optional<std::string> speaker;
      if (body.contains("speaker_id")) {
        if (!body["speaker_id"].is_string()) throw bad_request("\"speaker_id\" must be a string");
        speaker = body["speaker_id"].get<std::string>();
      }
      send_json(res, 201, to_json(*sessions.create(body["utterance_id"].get<std::string>(), speaker), ctx));
    });
  });

  server.Get(R"(/sessions/([^/]+)/features)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, to_json(*sessions.get(req.matches[1]), ctx)); });
  });

  server.Post(R"(/sessions/([^/]+)/edits)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      sessions.get(id);
      const auto body = detail::parse_body(req);
      const auto revision = detail::revision_of(body);
      if (!body.contains("script")) throw bad_request("\"script\" is required");
      control::EditScript delta;
      try {
        delta = control::edit_script_from_json(body["script"]);
      } catch (const DataError& e) {
        throw bad_request(e.what());
      }
      send_json(res, 200, to_json(*sessions.edit(id, revision, delta), ctx));
    });
  });

  server.Post(R"(/sessions/([^/]+)/reset)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      sessions.get(id);
      const auto body = detail::parse_body(req, true);
      std::optional<std::uint64_t> revision;
      if (body.contains("revision")) revision = detail::revision_of(body);
      send_json(res, 200, to_json(*sessions.reset(id, revision), ctx));
    });
  });

  server.Post(R"(/sessions/([^/]+)/synthesize)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, to_json(*sessions.synthesize(req.matches[1]), ctx)); });
  });

  server.Get(R"(/sessions/([^/]+)/audio)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto wav = sessions.audio(req.matches[1]);
      res.status = 200;
      res.set_content(reinterpret_cast<const char*>(wav->data()), wav->size(), "audio/wav");
    });
  });

  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) detail::send_error(res, res.status, "no such endpoint");
  });
}

}  // namespace prosoctl::service
