#include <nlohmann/json.hpp>

#include "egcr/service.hpp"

// Last: <resolv.h> (pulled in by httplib) defines a `_res` macro that breaks Eigen.
#include <httplib.h>

namespace egcr {

using nlohmann::json;

struct HttpServer::Impl {
  explicit Impl(ConversationService& s) : service(s) {}
  ConversationService& service;
  httplib::Server server;
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

}  // namespace

HttpServer::HttpServer(ConversationService& service) : impl_(std::make_unique<Impl>(service)) {
  auto& server = impl_->server;
  auto& svc = impl_->service;

  // The browser client is served from another origin.
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(/sessions.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  server.Post("/sessions", [&svc](const httplib::Request&, httplib::Response& res) {
    send_json(res, 201, {{"session_id", svc.create_session()}});
  });

  server.Post(R"(/sessions/([^/]+)/turns)", [&svc](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error&) {
      send_error(res, 422, "body must be a JSON object with a \"text\" string");
      return;
    }
    if (!body.is_object() || !body.contains("text") || !body["text"].is_string()) {
      send_error(res, 422, "body must be a JSON object with a \"text\" string");
      return;
    }
    send_json(res, 200, to_json(svc.post_turn(req.matches[1], body["text"].get<std::string>())));
  });

  server.Get(R"(/sessions/([^/]+)/transcript)", [&svc](const httplib::Request& req, httplib::Response& res) {
    const auto t = svc.get_transcript(req.matches[1]);
    send_json(res, 200, {{"turns", t.turns()}, {"rendered", t.rendered}});
  });

  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const NotFoundError& e) {
      send_error(res, 404, e.what());
    } catch (const ValidationError& e) {
      send_error(res, 422, e.what());
    } catch (const ModelNotLoadedError& e) {
      send_error(res, 503, e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    } catch (...) {
      send_error(res, 500, "internal error");
    }
  });

  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send_error(res, res.status, res.status == 404 ? "no such endpoint" : "request failed");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound <= 0) throw IoError("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

bool HttpServer::running() const { return impl_->server.is_running(); }

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace egcr
