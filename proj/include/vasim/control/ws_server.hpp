#pragma once

/// WebSocket transport for the teleoperation protocol. One I/O thread runs
/// every socket; the simulation thread talks to it only through `drain()`
/// (inbound queue) and `send()` / `broadcast()` (posted onto the I/O thread).

#include "vasim/core/errors.hpp"

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace vasim::control {

namespace beast = boost::beast;
namespace websocket = boost::beast::websocket;
namespace net = boost::asio;
using tcp = boost::asio::ip::tcp;

struct Inbound {
    enum class Kind { Connect, Message, Disconnect };
    Kind kind{};
    int connection{};
    std::string text;
};

class WsServer;

class WsConnection : public std::enable_shared_from_this<WsConnection> {
  public:
    /// Frames beyond this backlog are dropped if they are droppable (snapshots).
    static constexpr std::size_t kMaxBacklog = 64;

    WsConnection(tcp::socket socket, WsServer& server, int id) : ws_(std::move(socket)), server_(server), id_(id) {}

    void start() {
        net::dispatch(ws_.get_executor(), [self = shared_from_this()] { self->on_start(); });
    }

    void send(std::string text, bool droppable) {
        net::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text), droppable]() mutable {
            if (self->closed_) return;
            if (droppable && self->outbox_.size() >= kMaxBacklog) return;
            self->outbox_.push_back(std::move(text));
            if (self->outbox_.size() == 1) self->write_next();
        });
    }

    void close() {
        net::post(ws_.get_executor(), [self = shared_from_this()] {
            if (self->closed_) return;
            self->closed_ = true;
            beast::error_code ec;
            beast::get_lowest_layer(self->ws_).socket().close(ec);
        });
    }

  private:
    void on_start();
    void read_next();
    void write_next();
    void finish();

    websocket::stream<beast::tcp_stream> ws_;
    WsServer& server_;
    int id_;
    beast::flat_buffer buffer_;
    std::deque<std::string> outbox_;
    bool closed_{false};
    bool reported_{false};
};

class WsServer {
  public:
    /// Binds immediately; a port that cannot be bound is an IoError. Port 0
    /// picks a free port (see `port()`).
    WsServer(const std::string& host, unsigned short port) : acceptor_(io_) {
        beast::error_code ec;
        const auto address = net::ip::make_address(host, ec);
        if (ec) throw IoError("bad listen address '" + host + "': " + ec.message());
        const tcp::endpoint endpoint(address, port);
        acceptor_.open(endpoint.protocol(), ec);
        if (!ec) acceptor_.set_option(net::socket_base::reuse_address(true), ec);
        if (!ec) acceptor_.bind(endpoint, ec);
        if (!ec) acceptor_.listen(net::socket_base::max_listen_connections, ec);
        if (ec) {
            throw IoError("cannot listen on " + host + ":" + std::to_string(port) + ": " + ec.message());
        }
    }

    ~WsServer() { stop(); }

    WsServer(const WsServer&) = delete;
    WsServer& operator=(const WsServer&) = delete;

    [[nodiscard]] unsigned short port() const { return acceptor_.local_endpoint().port(); }

    void start() {
        accept_next();
        thread_ = std::thread([this] { io_.run(); });
    }

    void stop() {
        if (!thread_.joinable()) return;
        net::post(io_, [this] {
            beast::error_code ec;
            acceptor_.close(ec);
            std::lock_guard lock(mutex_);
            for (auto& [id, conn] : connections_) {
                if (auto c = conn.lock()) c->close();
            }
        });
        io_.stop();
        thread_.join();
    }

    std::vector<Inbound> drain() {
        std::lock_guard lock(mutex_);
        std::vector<Inbound> out(inbound_.begin(), inbound_.end());
        inbound_.clear();
        return out;
    }

    void send(int connection, std::string text, bool droppable = false) {
        std::shared_ptr<WsConnection> conn;
        {
            std::lock_guard lock(mutex_);
            auto it = connections_.find(connection);
            if (it == connections_.end()) return;
            conn = it->second.lock();
        }
        if (conn) conn->send(std::move(text), droppable);
    }

    void broadcast(const std::vector<int>& connections, const std::string& text, bool droppable = false) {
        for (int id : connections) send(id, text, droppable);
    }

  private:
    friend class WsConnection;

    void push(Inbound item) {
        std::lock_guard lock(mutex_);
        if (item.kind == Inbound::Kind::Disconnect) connections_.erase(item.connection);
        inbound_.push_back(std::move(item));
    }

    void accept_next() {
        acceptor_.async_accept(net::make_strand(io_), [this](beast::error_code ec, tcp::socket socket) {
            if (ec) return; // acceptor closed
            std::shared_ptr<WsConnection> conn;
            {
                std::lock_guard lock(mutex_);
                const int id = next_id_++;
                conn = std::make_shared<WsConnection>(std::move(socket), *this, id);
                connections_[id] = conn;
            }
            conn->start();
            accept_next();
        });
    }

    net::io_context io_;
    tcp::acceptor acceptor_;
    std::thread thread_;
    std::mutex mutex_;
    std::map<int, std::weak_ptr<WsConnection>> connections_;
    std::deque<Inbound> inbound_;
    int next_id_{1};
};

inline void WsConnection::on_start() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
        if (ec) {
            self->finish();
            return;
        }
        self->server_.push({Inbound::Kind::Connect, self->id_, {}});
        self->read_next();
    });
}

inline void WsConnection::read_next() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
        if (ec) {
            self->finish();
            return;
        }
        std::string text = beast::buffers_to_string(self->buffer_.data());
        self->buffer_.consume(self->buffer_.size());
        self->server_.push({Inbound::Kind::Message, self->id_, std::move(text)});
        self->read_next();
    });
}

inline void WsConnection::write_next() {
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
        if (ec) {
            self->finish();
            return;
        }
        self->outbox_.pop_front();
        if (!self->outbox_.empty()) self->write_next();
    });
}

inline void WsConnection::finish() {
    closed_ = true;
    outbox_.clear();
    if (!reported_) {
        reported_ = true;
        server_.push({Inbound::Kind::Disconnect, id_, {}});
    }
}

} // namespace vasim::control
