#include "linesense/http_server.hpp"

#include "linesense/errors.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <sys/socket.h>

#include <atomic>
#include <charconv>
#include <list>
#include <mutex>
#include <thread>

namespace linesense::service {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

std::string query_value(std::string_view target, std::string_view key) {
    const auto q = target.find('?');
    if (q == std::string_view::npos) return {};
    std::string_view query = target.substr(q + 1);
    while (!query.empty()) {
        const auto amp = query.find('&');
        const auto pair = query.substr(0, amp);
        const auto eq = pair.find('=');
        if (pair.substr(0, eq) == key) {
            std::string value(eq == std::string_view::npos ? "" : pair.substr(eq + 1));
            std::string decoded;
            for (std::size_t i = 0; i < value.size(); ++i) {
                if (value[i] == '%' && i + 2 < value.size()) {
                    int code = 0;
                    std::from_chars(value.data() + i + 1, value.data() + i + 3, code, 16);
                    decoded.push_back(static_cast<char>(code));
                    i += 2;
                } else {
                    decoded.push_back(value[i] == '+' ? ' ' : value[i]);
                }
            }
            return decoded;
        }
        if (amp == std::string_view::npos) break;
        query.remove_prefix(amp + 1);
    }
    return {};
}

}  // namespace

struct HttpServer::Impl {
    Service& service;
    asio::io_context io;
    tcp::acceptor acceptor{io};
    std::thread accept_thread;

    std::mutex mutex;
    bool stopping = false;
    struct Connection {
        std::shared_ptr<tcp::socket> socket;
        std::thread thread;
        std::shared_ptr<stream::Subscriber> subscriber;
        std::shared_ptr<std::atomic<bool>> done = std::make_shared<std::atomic<bool>>(false);
    };
    std::list<Connection> connections;

    explicit Impl(Service& s) : service(s) {}

    void accept_loop() {
        for (;;) {
            auto socket = std::make_shared<tcp::socket>(io);
            beast::error_code ec;
            acceptor.accept(*socket, ec);
            std::lock_guard lock(mutex);
            if (stopping) return;
            if (ec) {
                spdlog::warn("accept failed: {}", ec.message());
                continue;
            }
            if (service.config().socket_send_buffer > 0)
                socket->set_option(asio::socket_base::send_buffer_size(service.config().socket_send_buffer), ec);
            std::erase_if(connections, [](Connection& c) {
                if (!c.done->load()) return false;
                c.thread.join();
                return true;
            });
            connections.push_back({socket, {}, {}});
            auto it = std::prev(connections.end());
            it->thread = std::thread([this, it, done = it->done] {
                serve(*it);
                done->store(true);
            });
        }
    }

    void serve(Connection& conn) {
        beast::error_code ec;
        beast::flat_buffer buffer;
        auto& socket = *conn.socket;
        for (;;) {
            http::request<http::string_body> req;
            http::read(socket, buffer, req, ec);
            if (ec) break;
            const std::string target(req.target());

            if (websocket::is_upgrade(req)) {
                if (target.substr(0, target.find('?')) != "/stream") {
                    respond(socket, req, 404, R"({"error":"websocket is served at /stream"})", ec);
                    break;
                }
                unsigned mask = 0;
                try {
                    mask = stream::parse_mask(query_value(target, "mask"));
                } catch (const ValidationError& e) {
                    respond(socket, req, 400, nlohmann::json{{"error", e.what()}}.dump(), ec);
                    break;
                }
                stream_to(conn, req, mask);
                break;
            }

            const auto res = service.handle(std::string(req.method_string()), target, req.body());
            respond(socket, req, res.status, res.body.dump(), ec);
            if (ec || !req.keep_alive()) break;
        }
        socket.shutdown(tcp::socket::shutdown_both, ec);
    }

    static void respond(tcp::socket& socket, const http::request<http::string_body>& req, int status,
                        std::string body, beast::error_code& ec) {
        http::response<http::string_body> res{static_cast<http::status>(status), req.version()};
        res.set(http::field::server, "linesense");
        res.set(http::field::content_type, "application/json");
        res.keep_alive(req.keep_alive());
        res.body() = std::move(body);
        res.prepare_payload();
        http::write(socket, res, ec);
    }

    void stream_to(Connection& conn, const http::request<http::string_body>& req, unsigned mask) {
        websocket::stream<tcp::socket&> ws(*conn.socket);
        beast::error_code ec;
        ws.accept(req, ec);
        if (ec) return;
        ws.text(true);
        auto sub = service.subscribe(mask);
        {
            std::lock_guard lock(mutex);
            conn.subscriber = sub;
            if (stopping) sub->cancel();
        }
        while (auto msg = sub->pop()) {
            ws.write(asio::buffer(*msg), ec);
            if (ec) {
                sub->cancel();
                return;
            }
        }
        ws.close(websocket::close_code::normal, ec);
    }
};

HttpServer::HttpServer(Service& service, const std::string& host, unsigned short port)
    : impl_(std::make_unique<Impl>(service)) {
    beast::error_code ec;
    const auto address = asio::ip::make_address(host, ec);
    if (ec) throw IoError(fmt::format("invalid listen address: {}", ec.message()), host);
    const tcp::endpoint endpoint(address, port);
    const std::string where = fmt::format("{}:{}", host, port);
    impl_->acceptor.open(endpoint.protocol(), ec);
    if (!ec) impl_->acceptor.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) impl_->acceptor.bind(endpoint, ec);
    if (!ec) impl_->acceptor.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) throw IoError(fmt::format("cannot listen: {}", ec.message()), where);
}

HttpServer::~HttpServer() { stop(); }

unsigned short HttpServer::port() const noexcept {
    beast::error_code ec;
    return impl_->acceptor.local_endpoint(ec).port();
}

void HttpServer::start() {
    impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
}

void HttpServer::stop() {
    {
        std::lock_guard lock(impl_->mutex);
        if (impl_->stopping) return;
        impl_->stopping = true;
        beast::error_code ec;
        // shutdown() wakes a thread blocked in accept(); close() alone does not.
        ::shutdown(impl_->acceptor.native_handle(), SHUT_RDWR);
        for (auto& c : impl_->connections) {
            if (c.subscriber) c.subscriber->cancel();
            c.socket->shutdown(tcp::socket::shutdown_both, ec);
        }
    }
    if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
    beast::error_code ec;
    impl_->acceptor.close(ec);
    std::list<Impl::Connection> connections;
    {
        std::lock_guard lock(impl_->mutex);
        connections.splice(connections.end(), impl_->connections);
    }
    for (auto& c : connections)
        if (c.thread.joinable()) c.thread.join();
}

std::pair<std::string, unsigned short> parse_address(const std::string& addr) {
    const auto colon = addr.rfind(':');
    if (colon == std::string::npos) throw ValidationError(fmt::format("address '{}' is not host:port", addr));
    const std::string host = addr.substr(0, colon);
    unsigned port = 0;
    const auto* first = addr.data() + colon + 1;
    const auto* last = addr.data() + addr.size();
    const auto [ptr, ec] = std::from_chars(first, last, port);
    if (ec != std::errc{} || ptr != last || port > 65535 || host.empty())
        throw ValidationError(fmt::format("address '{}' is not host:port", addr));
    return {host, static_cast<unsigned short>(port)};
}

}  // namespace linesense::service
