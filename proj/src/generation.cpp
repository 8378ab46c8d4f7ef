#include "retrace/generation.hpp"

#include "http.hpp"

#include <httplib.h>

#include <cstdlib>

namespace retrace {

using json = nlohmann::json;

std::string EchoGenerationClient::generate(const GenerationRequest& request) {
  return "<REWRITTEN>" + request.payload + "</REWRITTEN>";
}

namespace detail {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

SplitUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw GenerationError("endpoint URL needs a scheme: '" + url + "'", false);
  auto path_start = url.find('/', scheme_end + 3);
  SplitUrl out;
  out.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) out.prefix = url.substr(path_start);
  while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  return out;
}

}  // namespace

json post_json(const EndpointConfig& endpoint, const std::string& path, const json& body) {
  SplitUrl url = split_url(endpoint.base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(endpoint.timeout);
  client.set_write_timeout(endpoint.timeout);

  httplib::Headers headers;
  if (!endpoint.api_key_env.empty()) {
    const char* key = std::getenv(endpoint.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw GenerationError("environment variable " + endpoint.api_key_env + " is not set", false);
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  auto res = client.Post(url.prefix + path, headers, body.dump(), "application/json");
  if (!res) {
    throw GenerationError("request to " + endpoint.base_url + path + " failed: " + httplib::to_string(res.error()),
                          true);
  }
  if (res->status != 200) {
    bool retryable = res->status == 408 || res->status == 429 || res->status >= 500;
    throw GenerationError("HTTP " + std::to_string(res->status) + " from " + endpoint.base_url + path + ": " +
                              res->body.substr(0, 512),
                          retryable);
  }
  try {
    return json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw GenerationError(std::string("unparseable response body: ") + e.what(), true);
  }
}

}  // namespace detail

HttpChatClient::HttpChatClient(EndpointConfig config) : config_(std::move(config)) {}

std::string HttpChatClient::generate(const GenerationRequest& request) {
  json messages = json::array();
  if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
  messages.push_back({{"role", "user"}, {"content", request.prompt}});
  json body = {{"model", config_.model}, {"messages", messages}, {"temperature", request.temperature}};
  if (request.max_tokens > 0) body["max_tokens"] = request.max_tokens;

  json reply = detail::post_json(config_, "/chat/completions", body);
  try {
    const json& content = reply.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw GenerationError("response content is not a string", true);
    return content.get<std::string>();
  } catch (const json::exception& e) {
    throw GenerationError(std::string("unexpected response shape: ") + e.what(), true);
  }
}

}  // namespace retrace
