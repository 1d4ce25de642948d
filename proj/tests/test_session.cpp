#include "support.hpp"

#include "vasim/control/session.hpp"

#include <gtest/gtest.h>

using namespace vasim;
using namespace vasim::control;

namespace {

const char* kHello = R"({"type":"HELLO","protocol_version":"vasim/1"})";
const char* kSpin = R"({"type":"SET_FIELD","axis":[1,0,0],"magnitude_mT":20,"frequency_rpm":8400,"sense":1})";

SessionCore make_core(const std::string& initial = "straight_teleop") {
    return SessionCore(scan_catalog(test::source_dir() / "fixtures" / "scenarios"), initial);
}

json reply(SessionCore& core, SessionCore::ClientId id, const std::string& text) {
    return json::parse(core.handle(id, text));
}

std::string error_code(const json& j) { return j.value("code", std::string("<none>")); }

} // namespace

TEST(Session, CatalogIsSortedAndComplete) {
    const auto core = make_core();
    const auto names = core.scenario_names();
    EXPECT_TRUE(std::is_sorted(names.begin(), names.end()));
    EXPECT_NE(std::find(names.begin(), names.end(), "pulmonary_branch"), names.end());
    EXPECT_THROW(make_core("no_such_scenario"), ValidationError);
    EXPECT_THROW(scan_catalog("/nonexistent/dir"), IoError);
}

TEST(Session, HandshakeGrantsTokenToFirstClient) {
    auto core = make_core();
    const auto a = core.connect();
    const auto b = core.connect();
    const auto ack_a = reply(core, a, kHello);
    EXPECT_EQ(ack_a["type"], "HELLO_ACK");
    EXPECT_EQ(ack_a["token"], true);
    EXPECT_EQ(ack_a["active_scenario"], "straight_teleop");
    EXPECT_EQ(ack_a["protocol_version"], "vasim/1");
    EXPECT_EQ(reply(core, b, kHello)["token"], false);
    EXPECT_EQ(core.token_holder(), std::optional<int>(a));
}

TEST(Session, CommandsBeforeHelloAreRefused) {
    auto core = make_core();
    const auto a = core.connect();
    const auto r = reply(core, a, R"({"type":"PAUSE","on":true,"seq":5})");
    EXPECT_EQ(error_code(r), "NO_HANDSHAKE");
    EXPECT_EQ(r["seq"], 5);
    EXPECT_FALSE(core.paused());
}

TEST(Session, VersionMismatch) {
    auto core = make_core();
    const auto a = core.connect();
    EXPECT_EQ(error_code(reply(core, a, R"({"type":"HELLO","protocol_version":"vasim/0"})")), "VERSION_MISMATCH");
    EXPECT_FALSE(core.greeted(a));
}

TEST(Session, TokenRules) {
    auto core = make_core();
    const auto a = core.connect();
    const auto b = core.connect();
    reply(core, a, kHello);
    reply(core, b, kHello);
    EXPECT_EQ(error_code(reply(core, b, kSpin)), "NOT_TOKEN_HOLDER");
    EXPECT_EQ(error_code(reply(core, b, R"({"type":"REQUEST_TOKEN"})")), "TOKEN_HELD");
    EXPECT_EQ(error_code(reply(core, b, R"({"type":"RELEASE_TOKEN"})")), "NOT_TOKEN_HOLDER");
    EXPECT_EQ(reply(core, a, R"({"type":"RELEASE_TOKEN"})")["type"], "ACK");
    EXPECT_EQ(core.token_holder(), std::nullopt);
    EXPECT_EQ(error_code(reply(core, a, kSpin)), "NOT_TOKEN_HOLDER");
    EXPECT_EQ(reply(core, b, R"({"type":"REQUEST_TOKEN"})")["type"], "ACK");
    EXPECT_EQ(reply(core, b, R"({"type":"REQUEST_TOKEN"})")["type"], "ACK");
    EXPECT_EQ(reply(core, b, kSpin)["type"], "ACK");
    core.disconnect(b);
    EXPECT_EQ(core.token_holder(), std::nullopt);
    EXPECT_EQ(reply(core, a, R"({"type":"REQUEST_TOKEN"})")["type"], "ACK");
}

TEST(Session, SpinCommandTakesEffectAtNextTick) {
    auto core = make_core();
    const auto a = core.connect();
    reply(core, a, kHello);
    const auto ack = reply(core, a, R"({"type":"SET_FIELD","axis":[1,0,0],"magnitude_mT":20,"frequency_rpm":8400,"seq":2})");
    EXPECT_EQ(ack["type"], "ACK");
    EXPECT_EQ(ack["ack"], "SET_FIELD");
    EXPECT_EQ(ack["seq"], 2);
    EXPECT_EQ(ack["tick"], 0);
    EXPECT_EQ(core.world().last_field.magnitude, 0.0);
    ASSERT_TRUE(core.advance());
    EXPECT_EQ(core.world().spinner.mode, spinner::Mode::Spin);
    EXPECT_DOUBLE_EQ(core.world().last_field.magnitude, 0.020);
    const auto snap = snapshot_frame(core.snapshot());
    EXPECT_EQ(snap["spinner"]["mode"], "SPIN");
    EXPECT_EQ(snap["tick"], 1);
}

TEST(Session, QueuedCommandsApplyTogetherInArrivalOrder) {
    auto core = make_core();
    const auto a = core.connect();
    reply(core, a, kHello);
    reply(core, a, kSpin);
    reply(core, a, R"({"type":"SET_FIELD","axis":[0,1,0],"magnitude_mT":5,"frequency_rpm":600,"sense":-1})");
    core.advance();
    EXPECT_EQ(core.world().last_field.rotation_axis, Vec3::UnitY());
    EXPECT_DOUBLE_EQ(core.world().last_field.magnitude, 0.005);
    EXPECT_EQ(core.world().last_field.sense, -1);
}

TEST(Session, RejectedCommandChangesNothing) {
    auto core = make_core();
    const auto a = core.connect();
    reply(core, a, kHello);
    const auto before = core.world().source;
    EXPECT_EQ(error_code(reply(core, a,
                               R"({"type":"SET_FIELD","axis":[1,0,0],"magnitude_mT":99,"frequency_rpm":8400})")),
              "RANGE_VIOLATION");
    EXPECT_EQ(error_code(reply(core, a, R"({"type":"MOVE_ARM","translation_mm":[1,0,0]})")), "UNSUPPORTED");
    EXPECT_EQ(error_code(reply(core, a, R"({"type":"TOGGLE_ASPIRATION","on":true})")), "UNSUPPORTED");
    core.advance();
    const auto& coils = std::get<field::HelmholtzSource>(core.world().source);
    EXPECT_EQ(coils.magnitude(), std::get<field::HelmholtzSource>(before).magnitude());
    EXPECT_EQ(core.world().spinner.mode, spinner::Mode::Idle);
}

TEST(Session, PauseStopsTheClock) {
    auto core = make_core();
    const auto a = core.connect();
    reply(core, a, kHello);
    reply(core, a, R"({"type":"PAUSE","on":true})");
    EXPECT_FALSE(core.advance());
    EXPECT_EQ(core.world().tick, 0);
    EXPECT_TRUE(snapshot_frame(core.snapshot())["paused"].get<bool>());
    reply(core, a, R"({"type":"PAUSE","on":false})");
    EXPECT_TRUE(core.advance());
}

TEST(Session, TicksStayMonotonicAcrossResetAndSelect) {
    auto core = make_core();
    const auto a = core.connect();
    reply(core, a, kHello);
    for (int i = 0; i < 25; ++i) core.advance();
    const auto before = core.session_tick();
    EXPECT_EQ(before, 25);
    const auto reset = reply(core, a, R"({"type":"RESET"})");
    EXPECT_EQ(core.world().tick, 0);
    EXPECT_GT(reset["tick"].get<std::int64_t>(), before);
    EXPECT_EQ(error_code(reply(core, a, R"({"type":"SELECT_SCENARIO","name":"nope"})")), "UNKNOWN_SCENARIO");
    const auto mid = core.session_tick();
    EXPECT_EQ(reply(core, a, R"({"type":"SELECT_SCENARIO","name":"pulmonary_branch"})")["type"], "ACK");
    EXPECT_EQ(core.scenario().name, "pulmonary_branch");
    EXPECT_GT(core.session_tick(), mid);
    EXPECT_GT(core.snapshot().tick, mid);
}

TEST(Session, ScenarioEndIsReportedOnce) {
    auto core = make_core("pulmonary_branch");
    int steps = 0;
    while (core.advance()) ++steps;
    EXPECT_EQ(steps, 1000);
    EXPECT_TRUE(core.finished());
    EXPECT_TRUE(core.take_end());
    EXPECT_FALSE(core.take_end());
    EXPECT_FALSE(core.advance());
}

TEST(Session, SnapshotDrainsEvents) {
    auto core = make_core("pulmonary_branch");
    for (int i = 0; i < 1000; ++i) core.advance();
    const auto first = core.snapshot();
    EXPECT_FALSE(first.events.empty());
    EXPECT_TRUE(core.snapshot().events.empty());
}

TEST(Session, PropertyEveryFrameGetsExactlyOneWellFormedReply) {
    test::Rng rng(91);
    auto core = make_core();
    std::vector<SessionCore::ClientId> clients = {core.connect(), core.connect(), core.connect()};
    const std::vector<std::string> frames = {
        kHello, kSpin, R"({"type":"PAUSE","on":true})", R"({"type":"PAUSE","on":false})",
        R"({"type":"RESET"})", R"({"type":"REQUEST_TOKEN"})", R"({"type":"RELEASE_TOKEN"})",
        R"({"type":"SELECT_SCENARIO","name":"straight_teleop"})", R"({"type":"MOVE_ARM"})", R"({"type":"X"})",
        R"({"type":"SET_FIELD","axis":[1,0,0],"magnitude_mT":51,"frequency_rpm":1})", "][", "{}",
        R"({"type":"HELLO","protocol_version":"vasim/9"})"};
    std::int64_t last_tick = 0;
    for (int k = 0; k < 3000; ++k) {
        const auto id = clients[static_cast<std::size_t>(rng.integer(0, 2))];
        std::string text = frames[static_cast<std::size_t>(rng.integer(0, static_cast<int>(frames.size()) - 1))];
        const bool with_seq = text.front() == '{' && text.size() > 2 && rng.coin();
        if (with_seq) text.insert(1, "\"seq\":" + std::to_string(k) + ",");
        const auto r = reply(core, id, text);
        const auto type = r.at("type").get<std::string>();
        EXPECT_TRUE(type == "HELLO_ACK" || type == "ACK" || type == "ERROR") << text;
        if (with_seq) EXPECT_EQ(r.value("seq", -1), k) << text;
        if (r.contains("tick")) {
            EXPECT_GE(r["tick"].get<std::int64_t>(), last_tick);
            last_tick = r["tick"].get<std::int64_t>();
        }
        if (rng.integer(0, 3) == 0) core.advance();
        if (rng.integer(0, 200) == 0) {
            core.disconnect(id);
            std::replace(clients.begin(), clients.end(), id, core.connect());
        }
        EXPECT_GE(core.session_tick(), last_tick);
    }
}
