#pragma once

// HTTP/JSON control routes and the /stream WebSocket on one port.
// One thread per connection; stream writers drain their subscriber outbox.

#include "linesense/service.hpp"

#include <memory>
#include <string>

namespace linesense::service {

class HttpServer {
public:
    // Binds immediately. Port 0 picks a free port. Throws IoError when the
    // address cannot be bound.
    HttpServer(Service& service, const std::string& host, unsigned short port);
    ~HttpServer();

    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    unsigned short port() const noexcept;

    void start();
    // Closes the listener and every open connection, then joins.
    void stop();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// "host:port" -> parts. Throws ValidationError.
std::pair<std::string, unsigned short> parse_address(const std::string& addr);

}  // namespace linesense::service
