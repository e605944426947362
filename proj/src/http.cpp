#include "loofaith/http.hpp"

#include <httplib.h>

#include "loofaith/error.hpp"

namespace loofaith::http {

Endpoint parse_endpoint(std::string_view base_url) {
    const auto scheme_end = base_url.find("://");
    if (scheme_end == std::string_view::npos)
        throw InvalidParameter("base URL needs an http:// or https:// scheme: " + std::string(base_url));
    const auto scheme = base_url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https")
        throw InvalidParameter("unsupported URL scheme: " + std::string(scheme));
    const auto host_begin = scheme_end + 3;
    const auto path_begin = base_url.find('/', host_begin);
    Endpoint ep;
    ep.origin = std::string(base_url.substr(0, path_begin));
    if (ep.origin.size() == host_begin) throw InvalidParameter("base URL has no host");
    if (path_begin != std::string_view::npos) {
        ep.path_prefix = std::string(base_url.substr(path_begin));
        while (!ep.path_prefix.empty() && ep.path_prefix.back() == '/') ep.path_prefix.pop_back();
    }
    return ep;
}

namespace {

httplib::Client make_client(const Endpoint& endpoint, std::chrono::milliseconds timeout) {
    httplib::Client client(endpoint.origin);
    const auto secs = static_cast<time_t>(timeout.count() / 1000);
    const auto usecs = static_cast<time_t>((timeout.count() % 1000) * 1000);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    return client;
}

httplib::Headers to_httplib(const Headers& headers) {
    httplib::Headers out;
    for (const auto& [k, v] : headers) out.emplace(k, v);
    return out;
}

Response convert(const httplib::Result& res) {
    Response out;
    if (!res) {
        out.transport_error = httplib::to_string(res.error());
        return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
}

}  // namespace

Response post_json(const Endpoint& endpoint, std::string_view path, const std::string& body,
                   const Headers& headers, std::chrono::milliseconds timeout) {
    auto client = make_client(endpoint, timeout);
    return convert(client.Post(endpoint.path_prefix + std::string(path), to_httplib(headers), body,
                               "application/json"));
}

Response get(const Endpoint& endpoint, std::string_view path, const Headers& headers,
             std::chrono::milliseconds timeout) {
    auto client = make_client(endpoint, timeout);
    return convert(client.Get(endpoint.path_prefix + std::string(path), to_httplib(headers)));
}

}  // namespace loofaith::http
