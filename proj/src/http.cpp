#include "http.hpp"

#ifdef INSTREXP_HAVE_OPENSSL
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "instrexp/error.hpp"

namespace instrexp::http {

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& url) {
    auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::InvalidArgument, "backend URL must include a scheme: '" + url + "'");
    }
    auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

double parse_retry_after(const httplib::Result& res) {
    if (!res || !res->has_header("Retry-After")) return 1.0;
    try {
        return std::stod(res->get_header_value("Retry-After"));
    } catch (const std::exception&) {
        return 1.0;
    }
}

}  // namespace

nlohmann::json post_json(const std::string& url, const std::string& api_key, const nlohmann::json& body,
                         std::chrono::seconds timeout) {
    auto [origin, path] = split_url(url);
    httplib::Client client(origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);

    httplib::Headers headers;
    if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
        throw Error(ErrorCode::BackendUnavailable, url + ": " + httplib::to_string(res.error()));
    }
    if (res->status == 429) {
        throw RateLimitedError(url + ": HTTP 429", parse_retry_after(res));
    }
    if (res->status >= 500) {
        throw Error(ErrorCode::BackendUnavailable, url + ": HTTP " + std::to_string(res->status));
    }
    if (res->status < 200 || res->status >= 300) {
        throw Error(ErrorCode::BadResponse, url + ": HTTP " + std::to_string(res->status) + " " + res->body);
    }
    auto parsed = nlohmann::json::parse(res->body, nullptr, false);
    if (parsed.is_discarded()) throw Error(ErrorCode::BadResponse, url + ": response body is not JSON");
    return parsed;
}

}  // namespace instrexp::http
