#pragma once

#include <optional>
#include <string>

namespace gamic {

struct HttpEndpoint {
  std::string url;            // http(s)://host[:port]/path
  std::string token_env;      // environment variable holding a bearer token; empty for none
  double timeout_seconds = 60.0;
  int max_retries = 3;        // attempts after the first one
  int backoff_ms = 200;       // doubled after every failed attempt
};

struct HttpOutcome {
  bool ok = false;
  int status = 0;             // 0 when the transport failed
  int attempts = 0;
  std::string body;
  std::string error;          // last failure description when !ok
};

/// POSTs a JSON body, retrying transport failures, 429 and 5xx responses
/// with exponential backoff. Other 4xx responses are returned immediately.
/// Throws ConfigError for malformed URLs.
HttpOutcome post_json(const HttpEndpoint& endpoint, const std::string& body);

struct ParsedUrl {
  std::string scheme;
  std::string host;
  int port = 0;
  std::string path;
};

ParsedUrl parse_url(const std::string& url);

}  // namespace gamic
