#include <doctest.h>

#include "portalvr/stream/protocol.hpp"
#include "portalvr/stream/server.hpp"
#include "portalvr/stream/simulation.hpp"
#include "portalvr/test_scenes.hpp"

#include "transition.hpp"

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <string>
#include <thread>
#include <vector>

using namespace portalvr;
using namespace portalvr::stream;

namespace {

std::span<const std::uint8_t> as_bytes(const std::vector<std::uint8_t>& v) { return {v.data(), v.size()}; }

std::vector<std::uint8_t> raw(std::uint8_t type, const std::string& body) {
    std::vector<std::uint8_t> out{type};
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

InputEvent move_event(double forward, double strafe) {
    InputEvent e;
    e.kind = InputKind::move;
    e.move = Vec2(forward, strafe);
    return e;
}

InputEvent look_event(double yaw, double pitch) {
    InputEvent e;
    e.kind = InputKind::look;
    e.yaw = yaw;
    e.pitch = pitch;
    return e;
}

InputEvent toggle_event(Toggle t, std::optional<bool> value = std::nullopt) {
    InputEvent e;
    e.kind = InputKind::toggle;
    e.toggle = t;
    e.value = value;
    return e;
}

StereoRig simple_rig() {
    StereoRig rig;
    rig.head.position = Vec3(0, 1.6, 0);
    rig.space = SpaceId{1};
    return rig;
}

Vec3 facing(const StereoRig& rig) { return rig.head.orientation * Vec3(0, 0, -1); }

SimulationConfig small_config() {
    SimulationConfig c;
    c.width = 96;
    c.height = 96;
    return c;
}

}  // namespace

TEST_CASE("frame message round trip") {
    FrameMessage m;
    m.frame_index = 0x0102030405060708ull;
    m.width = 512;
    m.height = 256;
    m.flags = flag_portal_box | flag_instanced;
    m.crc32 = 0xdeadbeef;
    m.metrics_json = R"({"frame":7})";
    m.png = {1, 2, 3, 4, 5};
    const auto bytes = encode_frame_message(m);
    CHECK(bytes.front() == kFrameMessage);
    CHECK(bytes.size() == 1 + 8 + 4 * 4 + 4 + m.metrics_json.size() + 4 + m.png.size());
    CHECK(bytes[1] == 0x08);  // little-endian
    const FrameMessage d = decode_frame_message(as_bytes(bytes));
    CHECK(d.frame_index == m.frame_index);
    CHECK(d.width == m.width);
    CHECK(d.height == m.height);
    CHECK(d.flags == m.flags);
    CHECK(d.crc32 == m.crc32);
    CHECK(d.metrics_json == m.metrics_json);
    CHECK(d.png == m.png);
}

TEST_CASE("frame message decode errors") {
    FrameMessage m;
    m.metrics_json = "{}";
    m.png = {9, 9};
    auto bytes = encode_frame_message(m);
    for (std::size_t n = 0; n < bytes.size(); ++n) {
        std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(n));
        CHECK_THROWS_AS(decode_frame_message(as_bytes(cut)), ProtocolError);
    }
    auto trailing = bytes;
    trailing.push_back(0);
    CHECK_THROWS_AS(decode_frame_message(as_bytes(trailing)), ProtocolError);
    auto wrong = bytes;
    wrong[0] = kInputMessage;
    CHECK_THROWS_AS(decode_frame_message(as_bytes(wrong)), ProtocolError);
}

TEST_CASE("input message round trip") {
    std::vector<InputEvent> events{move_event(0.5, -0.25), look_event(0.1, -0.2), toggle_event(Toggle::stencil),
                                   toggle_event(Toggle::freeze_left_eye_debug, true)};
    InputEvent respawn;
    respawn.kind = InputKind::respawn;
    respawn.timestamp_ms = 1234.5;
    events.push_back(respawn);
    for (const InputEvent& e : events) {
        const auto bytes = encode_input_message(e);
        CHECK(bytes.front() == kInputMessage);
        const InputEvent d = decode_input_message(as_bytes(bytes));
        CHECK(d.kind == e.kind);
        CHECK(d.move.isApprox(e.move));
        CHECK(d.yaw == doctest::Approx(e.yaw));
        CHECK(d.pitch == doctest::Approx(e.pitch));
        if (e.kind == InputKind::toggle) {
            CHECK(d.toggle == e.toggle);
            CHECK(d.value == e.value);
        }
        CHECK(d.timestamp_ms == doctest::Approx(e.timestamp_ms));
    }
}

TEST_CASE("input json accepts the documented shapes") {
    const InputEvent m = input_from_json(R"({"kind":"move","move":[1,0],"t":5})");
    CHECK(m.kind == InputKind::move);
    CHECK(m.move.x() == 1.0);
    CHECK(m.timestamp_ms == 5.0);
    const InputEvent t = input_from_json(R"({"kind":"toggle","toggle":"hidden-area","value":false})");
    CHECK(t.toggle == Toggle::hidden_area);
    CHECK(t.value == false);
    CHECK(input_from_json(R"({"kind":"toggle","toggle":"portal-box"})").value == std::nullopt);
    CHECK(input_from_json(R"({"kind":"respawn"})").kind == InputKind::respawn);
    CHECK(to_string(Toggle::freeze_left_eye_debug) == "freeze-left-eye-debug");
}

TEST_CASE("move input is clamped to unit length") {
    const InputEvent m = input_from_json(R"({"kind":"move","move":[3,4]})");
    CHECK(m.move.norm() == doctest::Approx(1.0));
    CHECK(m.move.x() == doctest::Approx(0.6));
    CHECK(m.move.y() == doctest::Approx(0.8));
}

TEST_CASE("input decode errors") {
    const std::vector<std::string> bad{
        "not json",
        R"([1,2])",
        R"({"move":[1,0]})",
        R"({"kind":"jump"})",
        R"({"kind":"move"})",
        R"({"kind":"move","move":[1]})",
        R"({"kind":"move","move":["a",0]})",
        R"({"kind":"look","yaw":"left","pitch":0})",
        R"({"kind":"toggle","toggle":"wireframe"})",
        R"({"kind":"toggle","toggle":"stencil","value":3})",
        R"({"kind":"look","yaw":1e400,"pitch":0})",
    };
    for (const std::string& s : bad) {
        INFO(s);
        CHECK_THROWS_AS(decode_input_message(as_bytes(raw(kInputMessage, s))), ProtocolError);
    }
    CHECK_THROWS_AS(decode_input_message({}), ProtocolError);
    CHECK_THROWS_AS(decode_input_message(as_bytes(raw(kAckMessage, R"({"kind":"respawn"})"))), ProtocolError);
}

TEST_CASE("ack message round trip") {
    const AckMessage a{Toggle::instanced, true, 42};
    const auto bytes = encode_ack_message(a);
    CHECK(bytes.front() == kAckMessage);
    const AckMessage d = decode_ack_message(as_bytes(bytes));
    CHECK(d.toggle == a.toggle);
    CHECK(d.value == a.value);
    CHECK(d.frame_index == a.frame_index);
    const auto j = nlohmann::json::parse(bytes.begin() + 1, bytes.end());
    CHECK(j.at("toggle") == "instanced");
    CHECK(j.at("frame") == 42);
    CHECK_THROWS_AS(decode_ack_message(as_bytes(raw(kAckMessage, R"({"toggle":"x","value":true,"frame":1})"))),
                    ProtocolError);
    CHECK_THROWS_AS(decode_ack_message(as_bytes(raw(kFrameMessage, "{}"))), ProtocolError);
}

TEST_CASE("crc32 matches the standard check value") {
    const std::vector<Rgba8> px{{'1', '2', '3', '4'}, {'5', '6', '7', '8'}};
    CHECK(crc32_rgba(px) == 0x9ae0daafu);
    CHECK(crc32_rgba({}) == 0u);
}

TEST_CASE("png round trip is lossless") {
    std::vector<Rgba8> px;
    for (int y = 0; y < 7; ++y) {
        for (int x = 0; x < 13; ++x) {
            px.push_back({static_cast<std::uint8_t>(x * 19), static_cast<std::uint8_t>(y * 37),
                          static_cast<std::uint8_t>(x * y), static_cast<std::uint8_t>(255 - x)});
        }
    }
    const auto png = encode_png(px, 13, 7);
    REQUIRE(png.size() > 8);
    CHECK(png[1] == 'P');
    std::uint32_t w = 0, h = 0;
    const auto back = decode_png(as_bytes(png), w, h);
    CHECK(w == 13);
    CHECK(h == 7);
    CHECK(back == px);
    CHECK(crc32_rgba(back) == crc32_rgba(px));

    auto broken = png;
    broken.resize(broken.size() / 2);
    CHECK_THROWS_AS(decode_png(as_bytes(broken), w, h), ProtocolError);
    const std::vector<std::uint8_t> junk{1, 2, 3};
    CHECK_THROWS_AS(decode_png(as_bytes(junk), w, h), ProtocolError);
}

TEST_CASE("apply_inputs with an empty batch leaves the rig unchanged") {
    ToggleState toggles;
    const StereoRig rig = simple_rig();
    const InputOutcome out = apply_inputs(rig, {}, 1.0 / 30.0, 1.5, toggles);
    CHECK(out.rig.head.position == rig.head.position);
    CHECK(out.rig.head.orientation.coeffs() == rig.head.orientation.coeffs());
    CHECK(out.acks.empty());
    CHECK_FALSE(out.respawn);
}

TEST_CASE("apply_inputs turns and walks") {
    ToggleState toggles;
    const StereoRig rig = simple_rig();

    const std::vector<InputEvent> turn{look_event(kPi, 0.0)};
    const InputOutcome turned = apply_inputs(rig, turn, 1.0 / 30.0, 1.5, toggles);
    CHECK((facing(turned.rig) - Vec3(0, 0, 1)).norm() < 1e-9);
    CHECK(turned.rig.head.position == rig.head.position);

    const std::vector<InputEvent> walk{move_event(1.0, 0.0)};
    const InputOutcome walked = apply_inputs(rig, walk, 1.0, 1.5, toggles);
    CHECK((walked.rig.head.position - Vec3(0, 1.6, -1.5)).norm() < 1e-12);

    const std::vector<InputEvent> strafe{move_event(0.0, 1.0)};
    CHECK((apply_inputs(rig, strafe, 1.0, 2.0, toggles).rig.head.position - Vec3(2, 1.6, 0)).norm() < 1e-12);

    const std::vector<InputEvent> two_moves{move_event(1.0, 0.0), move_event(-1.0, 0.0)};
    CHECK((apply_inputs(rig, two_moves, 1.0, 1.0, toggles).rig.head.position - Vec3(0, 1.6, 1)).norm() < 1e-12);

    const std::vector<InputEvent> turn_then_walk{look_event(kPi / 2, 0.0), move_event(1.0, 0.0)};
    CHECK((apply_inputs(rig, turn_then_walk, 1.0, 1.0, toggles).rig.head.position - Vec3(-1, 1.6, 0)).norm() < 1e-9);
}

TEST_CASE("apply_inputs clamps pitch and keeps walking level") {
    ToggleState toggles;
    const StereoRig rig = simple_rig();
    const std::vector<InputEvent> up{look_event(0.0, kPi)};
    const InputOutcome out = apply_inputs(rig, up, 1.0 / 30.0, 1.5, toggles);
    CHECK(ypr_degrees_from_quat(out.rig.head.orientation).y() == doctest::Approx(89.9).epsilon(1e-6));
    const std::vector<InputEvent> down{look_event(0.0, -kPi)};
    CHECK(ypr_degrees_from_quat(apply_inputs(rig, down, 0.1, 1.5, toggles).rig.head.orientation).y() ==
          doctest::Approx(-89.9).epsilon(1e-6));

    StereoRig pitched = out.rig;
    const std::vector<InputEvent> walk{move_event(1.0, 0.0)};
    const Vec3 p = apply_inputs(pitched, walk, 1.0, 1.0, toggles).rig.head.position;
    CHECK(p.y() == doctest::Approx(1.6));
    CHECK((p - Vec3(0, 1.6, -1)).norm() < 1e-9);
}

TEST_CASE("apply_inputs toggles and respawn") {
    ToggleState toggles;
    const StereoRig rig = simple_rig();
    const std::vector<InputEvent> events{toggle_event(Toggle::stencil), toggle_event(Toggle::portal_box, true),
                                         toggle_event(Toggle::portal_box)};
    const InputOutcome out = apply_inputs(rig, events, 0.0, 1.5, toggles);
    REQUIRE(out.acks.size() == 3);
    CHECK(out.acks[0].toggle == Toggle::stencil);
    CHECK(out.acks[0].value);
    CHECK(out.acks[1].value);
    CHECK_FALSE(out.acks[2].value);
    CHECK(toggles.stencil);
    CHECK_FALSE(toggles.portal_box);
    CHECK(toggles.mode() == RenderMode::stencil_multi_pass);
    CHECK(toggles.flags() == flag_stencil);

    InputEvent respawn;
    respawn.kind = InputKind::respawn;
    const std::vector<InputEvent> r{respawn};
    CHECK(apply_inputs(rig, r, 0.1, 1.5, toggles).respawn);
}

TEST_CASE("simulation frames decode to the advertised pixels") {
    Simulation sim(build_walkthrough_scene().scene, small_config());
    const TickResult r = sim.tick({}, 1.0 / 30.0);
    CHECK(r.message.frame_index == 0);
    CHECK(r.message.width == 192);
    CHECK(r.message.height == 96);
    CHECK(r.message.flags == flag_portal_box);
    std::uint32_t w = 0, h = 0;
    const auto px = decode_png(as_bytes(r.message.png), w, h);
    CHECK(px == sim.last_pixels());
    CHECK(crc32_rgba(px) == r.message.crc32);
    const auto j = nlohmann::json::parse(r.message.metrics_json);
    CHECK(j.at("space") == 1);
    CHECK(j.at("passes") == 6);
    CHECK(j.at("mode") == "naive");
    CHECK(sim.frame_index() == 1);
}

TEST_CASE("replayed walk changes space once and is deterministic") {
    auto replay = [] {
        Simulation sim(build_walkthrough_scene().scene, small_config());
        std::vector<std::uint32_t> spaces;
        std::vector<std::uint32_t> crcs;
        const std::vector<InputEvent> walk{move_event(1.0, 0.0)};
        for (int i = 0; i < 40; ++i) {
            const TickResult r = sim.tick(walk, 1.0 / 30.0);
            spaces.push_back(nlohmann::json::parse(r.message.metrics_json).at("space").get<std::uint32_t>());
            crcs.push_back(r.message.crc32);
        }
        return std::pair{spaces, crcs};
    };
    const auto [spaces, crcs] = replay();
    int changes = 0;
    for (std::size_t i = 1; i < spaces.size(); ++i) changes += spaces[i] != spaces[i - 1] ? 1 : 0;
    CHECK(changes == 1);
    CHECK(spaces.front() == 1);
    CHECK(spaces.back() == 2);
    const auto again = replay();
    CHECK(again.first == spaces);
    CHECK(again.second == crcs);
}

TEST_CASE("respawn restores the start pose and space") {
    Simulation sim(build_walkthrough_scene().scene, small_config());
    const StereoRig start = sim.rig();
    const std::vector<InputEvent> walk{move_event(1.0, 0.0)};
    sim.tick(walk, 1.2);
    CHECK(sim.rig().space == SpaceId{2});
    InputEvent respawn;
    respawn.kind = InputKind::respawn;
    const std::vector<InputEvent> r{respawn};
    sim.tick(r, 1.0 / 30.0);
    CHECK(sim.rig().space == start.space);
    CHECK(sim.rig().head.position == start.head.position);
}

TEST_CASE("portal box toggle decides whether hidden geometry shows during an oblique pass") {
    auto walk = [](bool box) {
        Simulation sim(build_walkthrough_scene().scene, small_config());
        const std::vector<InputEvent> setup{toggle_event(Toggle::portal_box, box), move_event(0.0, 1.0)};
        sim.tick(setup, 0.8);  // head at x = 1.2, z = 1.2
        const std::vector<InputEvent> turn{look_event(kPi / 4, 0.0)};
        sim.tick(turn, 0.0);
        const std::vector<InputEvent> step{move_event(1.0, 0.0)};
        std::size_t violations = 0;
        int crossings = 0;
        for (int i = 0; i < 130; ++i) {
            const TickResult r = sim.tick(step, 0.01);
            crossings += static_cast<int>(r.crossings.size());
            violations += transition::check_frame(sim.scene(), sim.rig(), sim.last_target());
        }
        CHECK(crossings == 1);
        return violations;
    };
    CHECK(walk(true) == 0);
    CHECK(walk(false) > 0);
}

TEST_CASE("left eye debug view shows space ids, right eye stays shaded") {
    SimulationConfig config = small_config();
    Simulation plain(build_walkthrough_scene().scene, config);
    plain.tick({}, 0.0);
    Simulation debug(build_walkthrough_scene().scene, config);
    const std::vector<InputEvent> on{toggle_event(Toggle::freeze_left_eye_debug, true)};
    const TickResult r = debug.tick(on, 0.0);
    CHECK((r.message.flags & flag_left_eye_debug) != 0);
    REQUIRE(r.acks.size() == 1);
    CHECK(r.acks[0].frame_index == 0);

    const raster::StereoTarget& out = debug.last_target();
    const int fw = out.frame().width();
    std::size_t differing_left = 0;
    for (int y = 0; y < out.eye_height(); ++y) {
        for (int x = 0; x < fw; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * fw + x;
            if (x < out.eye_width()) {
                CHECK(debug.last_pixels()[i] == space_color(out.frame().space_ids()[i]));
                differing_left += debug.last_pixels()[i] == plain.last_pixels()[i] ? 0 : 1;
            } else {
                CHECK(debug.last_pixels()[i] == plain.last_pixels()[i]);
            }
        }
    }
    CHECK(differing_left > 0);
}

namespace {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

struct Client {
    net::io_context ioc;
    websocket::stream<tcp::socket> ws{ioc};

    explicit Client(std::uint16_t port) {
        tcp::resolver resolver(ioc);
        net::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws.handshake("127.0.0.1", "/");
        ws.binary(true);
    }
    ~Client() {
        beast::error_code ec;
        ws.close(websocket::close_code::normal, ec);
    }
    std::vector<std::uint8_t> read() {
        beast::flat_buffer buffer;
        ws.read(buffer);
        const auto* p = static_cast<const std::uint8_t*>(buffer.cdata().data());
        return {p, p + buffer.size()};
    }
    void send(const InputEvent& e) {
        const auto bytes = encode_input_message(e);
        ws.write(net::buffer(bytes));
    }
};

std::pair<unsigned, std::string> http_get(std::uint16_t port, const std::string& target) {
    net::io_context ioc;
    beast::tcp_stream stream(ioc);
    tcp::resolver resolver(ioc);
    stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
    http::request<http::empty_body> req{http::verb::get, target, 11};
    req.set(http::field::host, "127.0.0.1");
    http::write(stream, req);
    beast::flat_buffer buffer;
    http::response<http::string_body> res;
    http::read(stream, buffer, res);
    beast::error_code ec;
    stream.socket().shutdown(tcp::socket::shutdown_both, ec);
    return {res.result_int(), res.body()};
}

ServerConfig test_server_config() {
    ServerConfig c;
    c.port = 0;
    c.fps = 30.0;
    return c;
}

}  // namespace

TEST_CASE("server streams verifiable frames and acknowledges toggles") {
    StreamServer server(Simulation(build_walkthrough_scene().scene, small_config()), test_server_config());
    server.start();
    REQUIRE(server.port() != 0);
    Client client(server.port());

    std::uint64_t last_frame = 0;
    for (int i = 0; i < 3; ++i) {
        const auto bytes = client.read();
        REQUIRE(bytes.front() == kFrameMessage);
        const FrameMessage m = decode_frame_message(as_bytes(bytes));
        std::uint32_t w = 0, h = 0;
        const auto px = decode_png(as_bytes(m.png), w, h);
        CHECK(w == m.width);
        CHECK(h == m.height);
        CHECK(crc32_rgba(px) == m.crc32);
        if (i > 0) CHECK(m.frame_index > last_frame);
        last_frame = m.frame_index;
    }

    client.send(toggle_event(Toggle::stencil));
    std::optional<AckMessage> ack;
    int frames_after = 0;
    while (!ack && frames_after < 10) {
        const auto bytes = client.read();
        if (bytes.front() == kAckMessage) {
            ack = decode_ack_message(as_bytes(bytes));
        } else {
            ++frames_after;
        }
    }
    REQUIRE(ack.has_value());
    CHECK(ack->toggle == Toggle::stencil);
    CHECK(ack->value);
    CHECK(frames_after <= 2);
    const FrameMessage next = decode_frame_message(as_bytes(client.read()));
    CHECK(next.frame_index == ack->frame_index);
    CHECK((next.flags & flag_stencil) != 0);
    CHECK(nlohmann::json::parse(next.metrics_json).at("mode") == "stencil");

    const auto [status, body] = http_get(server.port(), "/healthz");
    CHECK(status == 200);
    CHECK(body.rfind("ok frames=", 0) == 0);
    CHECK(body.find("clients=1") != std::string::npos);
    CHECK(http_get(server.port(), "/nope").first == 404);
    server.stop();
}

TEST_CASE("only the first client steers") {
    StreamServer server(Simulation(build_walkthrough_scene().scene, small_config()), test_server_config());
    server.start();
    Client first(server.port());
    first.read();
    Client second(server.port());
    second.read();
    CHECK(server.client_count() == 2);

    second.send(toggle_event(Toggle::instanced));
    for (int i = 0; i < 6; ++i) {
        const auto bytes = first.read();
        CHECK(bytes.front() == kFrameMessage);
        if (bytes.front() == kFrameMessage) {
            CHECK((decode_frame_message(as_bytes(bytes)).flags & flag_instanced) == 0);
        }
    }
    server.stop();
}

TEST_CASE("a busy port is reported") {
    StreamServer first(Simulation(build_walkthrough_scene().scene, small_config()), test_server_config());
    first.start();
    ServerConfig c = test_server_config();
    c.port = first.port();
    StreamServer second(Simulation(build_walkthrough_scene().scene, small_config()), c);
    CHECK_THROWS_AS(second.start(), std::runtime_error);
    first.stop();
}
