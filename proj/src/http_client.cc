#include "http_client.h"

#include <httplib.h>

#include <cstdlib>

#include "lces/error.h"

namespace lces::internal {
namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

SplitUrl Split(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw RemoteError("base URL needs a scheme: " + base_url);
  }
  auto path_start = base_url.find('/', scheme_end + 3);
  SplitUrl out;
  if (path_start == std::string::npos) {
    out.origin = base_url;
  } else {
    out.origin = base_url.substr(0, path_start);
    out.prefix = base_url.substr(path_start);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
  }
  return out;
}

}  // namespace

std::string PostJson(const std::string& base_url, const std::string& path,
                     const std::string& body, const std::string& api_key_env,
                     int timeout_seconds) {
  SplitUrl url = Split(base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(timeout_seconds);
  client.set_read_timeout(timeout_seconds);
  client.set_write_timeout(timeout_seconds);
  httplib::Headers headers;
  if (!api_key_env.empty()) {
    if (const char* key = std::getenv(api_key_env.c_str()); key && *key) {
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
  }
  auto res = client.Post(url.prefix + path, headers, body, "application/json");
  if (!res) {
    throw RemoteError("request to " + base_url + path +
                      " failed: " + httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw RemoteError("request to " + base_url + path + " returned HTTP " +
                      std::to_string(res->status) + ": " + res->body.substr(0, 500));
  }
  return res->body;
}

}  // namespace lces::internal
