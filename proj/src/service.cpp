#include "stamp/service.hpp"

#include <cstdlib>
#include <regex>

#include <httplib.h>

namespace stamp {

namespace {

struct ParsedUrl {
  std::string base;  // scheme://host:port
  std::string path;  // /... (defaults to "/")
};

ParsedUrl parse_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw TransportError("malformed service URL '" + url + "'");
  }
  return {m[1], m[2].matched ? m[2].str() : std::string("/")};
}

std::string extract_completion(const std::string& body) {
  try {
    json doc = json::parse(body);
    if (doc.contains("choices") && !doc["choices"].empty()) {
      const auto& c = doc["choices"][0];
      if (c.contains("message")) return c["message"].value("content", "");
      return c.value("text", "");
    }
    if (doc.contains("content") && doc["content"].is_string()) {
      return doc["content"].get<std::string>();
    }
    if (doc.contains("completion") && doc["completion"].is_string()) {
      return doc["completion"].get<std::string>();
    }
  } catch (const json::exception&) {
    // Plain-text endpoints are acceptable too.
  }
  return body;
}

}  // namespace

CompletionFn http_chat_client(const std::string& url, const std::string& api_key) {
  ParsedUrl parsed = parse_url(url);
  return [parsed, api_key](const std::string& prompt) -> std::string {
    httplib::Client client(parsed.base);
    client.set_connection_timeout(10);
    client.set_read_timeout(120);
    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
    json body{{"messages", json::array({json{{"role", "user"}, {"content", prompt}}})}};
    auto res = client.Post(parsed.path, headers, body.dump(), "application/json");
    if (!res) {
      throw TransportError("no response from " + parsed.base + parsed.path);
    }
    if (res->status < 200 || res->status >= 300) {
      throw TransportError("service returned status " + std::to_string(res->status));
    }
    return extract_completion(res->body);
  };
}

CompletionFn client_from_env(const char* url_env, const char* key_env) {
  const char* url = std::getenv(url_env);
  if (!url || !*url) {
    throw TransportError(std::string(url_env) + " is not set");
  }
  const char* key = key_env ? std::getenv(key_env) : nullptr;
  return http_chat_client(url, key ? key : "");
}

}  // namespace stamp
