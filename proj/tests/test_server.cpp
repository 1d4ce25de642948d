#include "support.hpp"

#include "vasim/control/live.hpp"

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <gtest/gtest.h>

#include <atomic>
#include <thread>

using namespace vasim;
using namespace vasim::control;

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;

namespace {

class Client {
  public:
    explicit Client(unsigned short port) : ws_(io_) {
        asio::ip::tcp::resolver resolver(io_);
        beast::get_lowest_layer(ws_).connect(resolver.resolve("127.0.0.1", std::to_string(port)));
        beast::get_lowest_layer(ws_).expires_never();
        ws_.handshake("127.0.0.1", "/");
    }

    void send(const std::string& text) { ws_.write(asio::buffer(text)); }

    json read() {
        beast::flat_buffer buffer;
        ws_.read(buffer);
        return json::parse(beast::buffers_to_string(buffer.data()));
    }

    /// Reads until a frame of `type` arrives (snapshots interleave with replies).
    json read_until(const std::string& type, int limit = 2000) {
        for (int i = 0; i < limit; ++i) {
            auto j = read();
            if (j.at("type") == type) return j;
        }
        throw std::runtime_error("no " + type + " frame");
    }

    json read_until(const std::function<bool(const json&)>& pred, int limit = 2000) {
        for (int i = 0; i < limit; ++i) {
            auto j = read();
            if (pred(j)) return j;
        }
        throw std::runtime_error("predicate never satisfied");
    }

  private:
    asio::io_context io_;
    websocket::stream<beast::tcp_stream> ws_;
};

class LiveServer : public ::testing::Test {
  protected:
    void SetUp() override {
        server_ = std::make_unique<WsServer>("127.0.0.1", 0);
        server_->start();
        core_ = std::make_unique<SessionCore>(scan_catalog(test::source_dir() / "fixtures" / "scenarios"),
                                              "straight_teleop");
        LiveOptions opts;
        opts.stop = &stop_;
        loop_ = std::thread([this, opts] { run_live(*core_, *server_, opts); });
    }

    void TearDown() override {
        stop_.store(true);
        loop_.join();
        server_->stop();
    }

    unsigned short port() const { return server_->port(); }

    std::atomic<bool> stop_{false};
    std::unique_ptr<WsServer> server_;
    std::unique_ptr<SessionCore> core_;
    std::thread loop_;
};

const char* kHello = R"({"type":"HELLO","protocol_version":"vasim/1","seq":1})";

} // namespace

TEST_F(LiveServer, HandshakeOnEphemeralPort) {
    EXPECT_GT(port(), 0);
    Client c(port());
    c.send(kHello);
    const auto ack = c.read_until("HELLO_ACK");
    EXPECT_EQ(ack["seq"], 1);
    EXPECT_EQ(ack["token"], true);
    EXPECT_EQ(ack["active_scenario"], "straight_teleop");
}

TEST_F(LiveServer, SpinCommandShowsUpInSnapshots) {
    Client c(port());
    c.send(kHello);
    c.read_until("HELLO_ACK");
    c.send(R"({"type":"SET_FIELD","axis":[1,0,0],"magnitude_mT":20,"frequency_rpm":8400,"seq":2})");
    const auto ack = c.read_until("ACK");
    EXPECT_EQ(ack["seq"], 2);
    const auto snap = c.read_until([](const json& j) { return j["type"] == "SNAPSHOT" && j["spinner"]["mode"] == "SPIN"; });
    EXPECT_EQ(snap["field"]["magnitude_mT"], 20.0);
    EXPECT_GT(snap["tick"].get<std::int64_t>(), ack["tick"].get<std::int64_t>());
    // Spinning at 140 Hz it swims forward.
    const auto later = c.read_until([&](const json& j) {
        return j["type"] == "SNAPSHOT" && j["spinner"]["s_mm"].get<double>() > snap["spinner"]["s_mm"].get<double>();
    });
    EXPECT_GT(later["metrics"]["speed_cm_s"].get<double>(), 0.0);
}

TEST_F(LiveServer, RangeErrorKeepsConnectionOpen) {
    Client c(port());
    c.send(kHello);
    c.read_until("HELLO_ACK");
    c.send(R"({"type":"SET_FIELD","axis":[1,0,0],"magnitude_mT":99,"frequency_rpm":8400,"seq":3})");
    const auto err = c.read_until("ERROR");
    EXPECT_EQ(err["code"], "RANGE_VIOLATION");
    EXPECT_EQ(err["seq"], 3);
    c.send(R"({"type":"PAUSE","on":true,"seq":4})");
    EXPECT_EQ(c.read_until("ACK")["seq"], 4);
}

TEST_F(LiveServer, SecondClientWatchesWithoutToken) {
    Client a(port());
    Client b(port());
    a.send(kHello);
    EXPECT_EQ(a.read_until("HELLO_ACK")["token"], true);
    b.send(kHello);
    EXPECT_EQ(b.read_until("HELLO_ACK")["token"], false);
    b.send(R"({"type":"RESET"})");
    EXPECT_EQ(b.read_until("ERROR")["code"], "NOT_TOKEN_HOLDER");
    EXPECT_EQ(b.read_until("SNAPSHOT")["scenario"], "straight_teleop");
}

TEST(WsServerBind, PortInUseIsIoError) {
    WsServer first("127.0.0.1", 0);
    EXPECT_THROW(WsServer("127.0.0.1", first.port()), IoError);
}
