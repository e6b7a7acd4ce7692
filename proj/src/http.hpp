#pragma once

// Internal helper shared by the chat and embedding HTTP backends.

#include <chrono>
#include <string>

#include <nlohmann/json.hpp>

namespace instrexp::http {

/// POST a JSON body and decode the JSON reply.
/// Connection failures and 5xx map to Error(BackendUnavailable), 429 to
/// RateLimitedError, other non-2xx and undecodable bodies to Error(BadResponse).
nlohmann::json post_json(const std::string& url, const std::string& api_key, const nlohmann::json& body,
                         std::chrono::seconds timeout);

}  // namespace instrexp::http
