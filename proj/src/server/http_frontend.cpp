#include "invivo/coordination_server.hpp"

#include <httplib.h>

namespace invivo {

struct HttpFrontend::Impl {
    CoordinationServer& server;
    httplib::Server http;

    explicit Impl(CoordinationServer& s) : server(s) {
        auto handle = [this](const httplib::Request& req, httplib::Response& res) {
            std::string query;
            for (const auto& [key, value] : req.params) {
                query += (query.empty() ? "" : "&") + key + "=" + value;
            }
            const HttpResponse out = dispatch(server, req.method, req.path, req.body, query);
            res.status = out.status;
            res.set_content(out.body, out.content_type);
        };
        http.Get(".*", handle);
        http.Post(".*", handle);
    }
};

HttpFrontend::HttpFrontend(CoordinationServer& server) : impl_(std::make_unique<Impl>(server)) {}

HttpFrontend::~HttpFrontend() = default;

bool HttpFrontend::listen(const std::string& host, int port) { return impl_->http.listen(host, port); }

int HttpFrontend::bind_any(const std::string& host) { return impl_->http.bind_to_any_port(host); }

void HttpFrontend::serve() { impl_->http.listen_after_bind(); }

void HttpFrontend::stop() { impl_->http.stop(); }

}  // namespace invivo
