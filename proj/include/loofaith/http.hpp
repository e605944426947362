#pragma once

// Thin JSON-over-HTTP transport shared by the chat and embedding clients.

#include <chrono>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace loofaith::http {

/// A base URL split into the part httplib connects to and the path prefix.
struct Endpoint {
    std::string origin;       // scheme://host[:port]
    std::string path_prefix;  // "" or "/v1", never with a trailing slash
};

/// Throws InvalidParameter when the URL has no http/https scheme or host.
Endpoint parse_endpoint(std::string_view base_url);

using Headers = std::vector<std::pair<std::string, std::string>>;

struct Response {
    int status = 0;  // 0 when the request never produced an HTTP response
    std::string body;
    std::string transport_error;

    bool ok() const { return status >= 200 && status < 300; }
    /// Worth retrying: connection failures, timeouts, 408, 429 and 5xx.
    bool transient() const { return status == 0 || status == 408 || status == 429 || status >= 500; }
};

Response post_json(const Endpoint& endpoint, std::string_view path, const std::string& body,
                   const Headers& headers, std::chrono::milliseconds timeout);

Response get(const Endpoint& endpoint, std::string_view path, const Headers& headers,
             std::chrono::milliseconds timeout);

}  // namespace loofaith::http
