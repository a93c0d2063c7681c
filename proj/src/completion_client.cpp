#include "egcr/error.hpp"
#include "egcr/explainer.hpp"

#include <nlohmann/json.hpp>

// Last: <resolv.h> (pulled in by httplib) defines a `_res` macro that breaks Eigen.
#include <httplib.h>

namespace egcr {

using nlohmann::json;

HttpCompletionClient::HttpCompletionClient(std::string endpoint, std::string api_key,
                                           std::chrono::milliseconds timeout, int max_tokens, double temperature)
    : endpoint_(std::move(endpoint)),
      api_key_(std::move(api_key)),
      timeout_(timeout),
      max_tokens_(max_tokens),
      temperature_(temperature) {
  if (endpoint_.find("://") == std::string::npos) {
    throw ConfigError(std::string(kEndpointEnv) + " must be an absolute http(s) URL");
  }
}

std::string HttpCompletionClient::complete(const std::string& prompt) const {
  const auto scheme_end = endpoint_.find("://");
  const auto path_start = endpoint_.find('/', scheme_end + 3);
  const std::string base = endpoint_.substr(0, path_start);
  const std::string path = path_start == std::string::npos ? "/" : endpoint_.substr(path_start);

  httplib::Client client(base);
  const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(timeout_);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout_ - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());

  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
  const json body = {{"prompt", prompt}, {"max_tokens", max_tokens_}, {"temperature", temperature_}};

  auto res = client.Post(path, headers, body.dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const bool timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
    throw CompletionError("completion request failed: " + httplib::to_string(err), timed_out);
  }
  if (res->status != 200) throw CompletionError("completion service returned HTTP " + std::to_string(res->status));
  try {
    const auto reply = json::parse(res->body);
    if (reply.contains("choices") && !reply["choices"].empty()) {
      const auto& choice = reply["choices"][0];
      if (choice.contains("text")) return choice["text"].get<std::string>();
      if (choice.contains("message")) return choice["message"].at("content").get<std::string>();
    }
    if (reply.contains("text")) return reply["text"].get<std::string>();
  } catch (const json::exception& e) {
    throw CompletionError(std::string("malformed completion reply: ") + e.what());
  }
  throw CompletionError("completion reply has no text");
}

}  // namespace egcr
