#pragma once

#include <string>

namespace lces::internal {

// POSTs a JSON body to base_url + path and returns the response body.
// Sends "Authorization: Bearer $<api_key_env>" when that variable is set.
// Throws RemoteError on transport failure or a non-2xx status.
std::string PostJson(const std::string& base_url, const std::string& path,
                     const std::string& body, const std::string& api_key_env,
                     int timeout_seconds);

}  // namespace lces::internal
