#include "gamic/http_client.h"

#include <chrono>
#include <cstdlib>
#include <httplib.h>
#include <thread>

#include "gamic/errors.h"

namespace gamic {

ParsedUrl parse_url(const std::string& url) {
  ParsedUrl u;
  const auto sep = url.find("://");
  if (sep == std::string::npos) throw ConfigError("URL has no scheme: " + url);
  u.scheme = url.substr(0, sep);
  if (u.scheme != "http" && u.scheme != "https") throw ConfigError("unsupported URL scheme: " + u.scheme);
  const auto rest = url.substr(sep + 3);
  const auto slash = rest.find('/');
  const auto authority = rest.substr(0, slash);
  u.path = slash == std::string::npos ? "/" : rest.substr(slash);
  const auto colon = authority.rfind(':');
  if (colon != std::string::npos) {
    u.host = authority.substr(0, colon);
    try {
      u.port = std::stoi(authority.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad port in URL: " + url);
    }
  } else {
    u.host = authority;
    u.port = u.scheme == "https" ? 443 : 80;
  }
  if (u.host.empty()) throw ConfigError("URL has no host: " + url);
  return u;
}

HttpOutcome post_json(const HttpEndpoint& endpoint, const std::string& body) {
  const ParsedUrl u = parse_url(endpoint.url);
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
  if (u.scheme == "https") throw ConfigError("this build has no TLS support; use an http:// endpoint");
#endif
  httplib::Client client(u.scheme + "://" + u.host + ":" + std::to_string(u.port));
  const auto timeout = std::chrono::duration<double>(endpoint.timeout_seconds);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_write_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));

  httplib::Headers headers;
  if (!endpoint.token_env.empty()) {
    if (const char* token = std::getenv(endpoint.token_env.c_str()); token && *token) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }

  HttpOutcome out;
  int delay = endpoint.backoff_ms;
  for (int attempt = 0; attempt <= endpoint.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
      delay *= 2;
    }
    ++out.attempts;
    auto res = client.Post(u.path, headers, body, "application/json");
    if (!res) {
      out.status = 0;
      out.error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    out.status = res->status;
    out.body = res->body;
    if (res->status >= 200 && res->status < 300) {
      out.ok = true;
      out.error.clear();
      return out;
    }
    out.error = "HTTP " + std::to_string(res->status);
    if (res->status != 429 && res->status < 500) return out;
  }
  return out;
}

}  // namespace gamic
