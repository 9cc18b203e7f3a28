#include "portalvr/stream/protocol.hpp"

#include <json.hpp>
#include <png.h>
#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace portalvr::stream {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

struct Reader {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (bytes.size() - pos < n) throw ProtocolError("truncated message");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[pos++]) << (8 * i);
        return v;
    }
    std::span<const std::uint8_t> take(std::size_t n) {
        need(n);
        auto s = bytes.subspan(pos, n);
        pos += n;
        return s;
    }
};

std::uint8_t expect_type(std::span<const std::uint8_t> bytes, std::uint8_t type) {
    if (bytes.empty()) throw ProtocolError("empty message");
    if (bytes[0] != type) throw ProtocolError("unexpected message type " + std::to_string(bytes[0]));
    return bytes[0];
}

const std::pair<Toggle, std::string_view> kToggleNames[] = {
    {Toggle::portal_box, "portal-box"},
    {Toggle::stencil, "stencil"},
    {Toggle::instanced, "instanced"},
    {Toggle::hidden_area, "hidden-area"},
    {Toggle::freeze_left_eye_debug, "freeze-left-eye-debug"},
};

Toggle parse_toggle(const std::string& name) {
    for (const auto& [t, n] : kToggleNames) {
        if (n == name) return t;
    }
    throw ProtocolError("unknown toggle '" + name + "'");
}

}  // namespace

std::string_view to_string(Toggle t) {
    for (const auto& [tt, n] : kToggleNames) {
        if (tt == t) return n;
    }
    return "?";
}

std::vector<std::uint8_t> encode_frame_message(const FrameMessage& msg) {
    std::vector<std::uint8_t> out;
    out.reserve(33 + msg.metrics_json.size() + msg.png.size());
    out.push_back(kFrameMessage);
    put_u64(out, msg.frame_index);
    put_u32(out, msg.width);
    put_u32(out, msg.height);
    put_u32(out, msg.flags);
    put_u32(out, msg.crc32);
    put_u32(out, static_cast<std::uint32_t>(msg.metrics_json.size()));
    out.insert(out.end(), msg.metrics_json.begin(), msg.metrics_json.end());
    put_u32(out, static_cast<std::uint32_t>(msg.png.size()));
    out.insert(out.end(), msg.png.begin(), msg.png.end());
    return out;
}

FrameMessage decode_frame_message(std::span<const std::uint8_t> bytes) {
    expect_type(bytes, kFrameMessage);
    Reader r{bytes, 1};
    FrameMessage m;
    m.frame_index = r.u64();
    m.width = r.u32();
    m.height = r.u32();
    m.flags = r.u32();
    m.crc32 = r.u32();
    auto json = r.take(r.u32());
    m.metrics_json.assign(json.begin(), json.end());
    auto png = r.take(r.u32());
    m.png.assign(png.begin(), png.end());
    if (r.pos != bytes.size()) throw ProtocolError("trailing bytes in frame message");
    return m;
}

std::uint32_t crc32_rgba(std::span<const Rgba8> pixels) {
    static_assert(sizeof(Rgba8) == 4);
    uLong crc = crc32(0L, Z_NULL, 0);
    const auto* data = reinterpret_cast<const Bytef*>(pixels.data());
    std::size_t left = pixels.size() * 4;
    while (left > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
        crc = crc32(crc, data, chunk);
        data += chunk;
        left -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_png(std::span<const Rgba8> pixels, std::uint32_t width, std::uint32_t height) {
    if (pixels.size() != static_cast<std::size_t>(width) * height) throw ProtocolError("pixel count does not match dimensions");
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = width;
    image.height = height;
    image.format = PNG_FORMAT_RGBA;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
        throw ProtocolError(std::string("png encode failed: ") + image.message);
    }
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
        throw ProtocolError(std::string("png encode failed: ") + image.message);
    }
    out.resize(size);
    return out;
}

std::vector<Rgba8> decode_png(std::span<const std::uint8_t> png, std::uint32_t& width, std::uint32_t& height) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, png.data(), png.size())) {
        throw ProtocolError(std::string("png decode failed: ") + image.message);
    }
    image.format = PNG_FORMAT_RGBA;
    std::vector<Rgba8> pixels(static_cast<std::size_t>(image.width) * image.height);
    if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
        png_image_free(&image);
        throw ProtocolError(std::string("png decode failed: ") + image.message);
    }
    width = image.width;
    height = image.height;
    return pixels;
}

std::string input_to_json(const InputEvent& e) {
    nlohmann::json j;
    switch (e.kind) {
        case InputKind::move:
            j["kind"] = "move";
            j["move"] = {e.move.x(), e.move.y()};
            break;
        case InputKind::look:
            j["kind"] = "look";
            j["yaw"] = e.yaw;
            j["pitch"] = e.pitch;
            break;
        case InputKind::toggle:
            j["kind"] = "toggle";
            j["toggle"] = std::string(to_string(e.toggle));
            if (e.value) j["value"] = *e.value;
            break;
        case InputKind::respawn: j["kind"] = "respawn"; break;
    }
    if (e.timestamp_ms != 0.0) j["t"] = e.timestamp_ms;
    return j.dump();
}

InputEvent input_from_json(std::string_view text) {
    try {
        const nlohmann::json j = nlohmann::json::parse(text);
        InputEvent e;
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "move") {
            e.kind = InputKind::move;
            const auto& m = j.at("move");
            e.move = Vec2(m.at(0).get<double>(), m.at(1).get<double>());
            if (!std::isfinite(e.move.x()) || !std::isfinite(e.move.y())) throw ProtocolError("non-finite move");
            const double n = e.move.norm();
            if (n > 1.0) e.move /= n;
        } else if (kind == "look") {
            e.kind = InputKind::look;
            e.yaw = j.value("yaw", 0.0);
            e.pitch = j.value("pitch", 0.0);
            if (!std::isfinite(e.yaw) || !std::isfinite(e.pitch)) throw ProtocolError("non-finite look");
        } else if (kind == "toggle") {
            e.kind = InputKind::toggle;
            e.toggle = parse_toggle(j.at("toggle").get<std::string>());
            if (j.contains("value")) e.value = j.at("value").get<bool>();
        } else if (kind == "respawn") {
            e.kind = InputKind::respawn;
        } else {
            throw ProtocolError("unknown input kind '" + kind + "'");
        }
        e.timestamp_ms = j.value("t", 0.0);
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw ProtocolError(std::string("bad input event: ") + ex.what());
    }
}

std::vector<std::uint8_t> encode_input_message(const InputEvent& e) {
    const std::string json = input_to_json(e);
    std::vector<std::uint8_t> out;
    out.push_back(kInputMessage);
    out.insert(out.end(), json.begin(), json.end());
    return out;
}

InputEvent decode_input_message(std::span<const std::uint8_t> bytes) {
    expect_type(bytes, kInputMessage);
    return input_from_json(std::string_view(reinterpret_cast<const char*>(bytes.data()) + 1, bytes.size() - 1));
}

std::vector<std::uint8_t> encode_ack_message(const AckMessage& a) {
    nlohmann::json j{{"toggle", std::string(to_string(a.toggle))}, {"value", a.value}, {"frame", a.frame_index}};
    const std::string s = j.dump();
    std::vector<std::uint8_t> out;
    out.push_back(kAckMessage);
    out.insert(out.end(), s.begin(), s.end());
    return out;
}

AckMessage decode_ack_message(std::span<const std::uint8_t> bytes) {
    expect_type(bytes, kAckMessage);
    try {
        const auto j = nlohmann::json::parse(std::string_view(reinterpret_cast<const char*>(bytes.data()) + 1, bytes.size() - 1));
        AckMessage a;
        a.toggle = parse_toggle(j.at("toggle").get<std::string>());
        a.value = j.at("value").get<bool>();
        a.frame_index = j.at("frame").get<std::uint64_t>();
        return a;
    } catch (const nlohmann::json::exception& ex) {
        throw ProtocolError(std::string("bad ack: ") + ex.what());
    }
}

}  // namespace portalvr::stream
