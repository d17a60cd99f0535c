#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

#include <cstdlib>

#include "mona/errors.hpp"
#include "mona/lisa.hpp"

namespace mona {

HttpChatClient::HttpChatClient(HttpClientConfig config) : config_(std::move(config)) {
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') throw ConfigError("environment variable " + config_.api_key_env + " is not set");
  api_key_ = key;
}

std::string HttpChatClient::complete(const ChatRequest& request) {
  httplib::Client client(config_.base_url);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  const httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
  auto res = client.Post(config_.path, headers, chat_request_json(request), "application/json");
  if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw TransportError("endpoint answered " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
  }
  return chat_response_content(res->body);
}

}  // namespace mona
