#pragma once

#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>
#include <utility>

#include <httplib.h>

#include "ragsynth/error.hpp"

namespace ragsynth::http {

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{250};
  double multiplier = 2.0;
};

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // starts with '/'
};

inline Endpoint parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidArgument("endpoint URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

/// Reads a credential from the environment. The value is never logged.
inline std::string credential_from_env(const std::string& var) {
  if (var.empty()) return {};
  const char* v = std::getenv(var.c_str());
  return v ? std::string(v) : std::string();
}

/// POSTs a JSON body and returns the response body of the first 2xx reply.
/// Connection failures, 429 and 5xx are retried with exponential backoff;
/// other statuses fail immediately with ProviderError.
inline std::string post_json(const std::string& url, const std::string& body,
                             const std::string& bearer_token, const RetryPolicy& policy,
                             std::chrono::seconds timeout = std::chrono::seconds(60)) {
  const Endpoint ep = parse_url(url);
  httplib::Headers headers;
  if (!bearer_token.empty()) {
    headers.emplace("Authorization", "Bearer " + bearer_token);
    headers.emplace("api-key", bearer_token);
  }
  auto backoff = policy.initial_backoff;
  std::string last_error = "no attempt made";
  for (int attempt = 1; attempt <= policy.max_attempts; ++attempt) {
    httplib::Client client(ep.origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    const auto res = client.Post(ep.path, headers, body, "application/json");
    if (res) {
      if (res->status >= 200 && res->status < 300) return res->body;
      last_error = "HTTP " + std::to_string(res->status);
      if (res->status != 429 && res->status < 500) {
        throw ProviderError(ep.origin + ep.path + " rejected the request: " + last_error);
      }
    } else {
      last_error = httplib::to_string(res.error());
    }
    if (attempt < policy.max_attempts) {
      std::this_thread::sleep_for(backoff);
      backoff = std::chrono::duration_cast<std::chrono::milliseconds>(backoff * policy.multiplier);
    }
  }
  throw TransportError(ep.origin + ep.path + " failed after " +
                       std::to_string(policy.max_attempts) + " attempts: " + last_error);
}

}  // namespace ragsynth::http
