#pragma once

#include "portalvr/scene.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

/// Wire protocol. Every WebSocket message is binary; byte 0 is the type.
///
///   0x01 frame (server -> client), little-endian:
///        u8  type | u64 frame_index | u32 width | u32 height | u32 flags |
///        u32 crc32 of the raw RGBA bytes (row-major, 4 bytes per pixel) |
///        u32 n | n bytes metrics JSON | u32 m | m bytes PNG (RGBA8, side-by-side stereo)
///   0x02 input (client -> server): u8 type | UTF-8 JSON, one of
///        {"kind":"move","move":[forward,strafe]}
///        {"kind":"look","yaw":rad,"pitch":rad}
///        {"kind":"toggle","toggle":"portal-box"|"stencil"|"instanced"|"hidden-area"|"freeze-left-eye-debug","value"?:bool}
///        {"kind":"respawn"}
///        each with an optional client timestamp "t" (ms).
///   0x03 ack (server -> client): u8 type | UTF-8 JSON {"toggle":name,"value":bool,"frame":index}
namespace portalvr::stream {

inline constexpr std::uint8_t kFrameMessage = 0x01;
inline constexpr std::uint8_t kInputMessage = 0x02;
inline constexpr std::uint8_t kAckMessage = 0x03;

class ProtocolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum ModeFlag : std::uint32_t {
    flag_portal_box = 1u << 0,
    flag_stencil = 1u << 1,
    flag_instanced = 1u << 2,
    flag_hidden_area = 1u << 3,
    flag_left_eye_debug = 1u << 4,
};

struct FrameMessage {
    std::uint64_t frame_index = 0;
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::uint32_t flags = 0;
    std::uint32_t crc32 = 0;
    std::string metrics_json;
    std::vector<std::uint8_t> png;
};

std::vector<std::uint8_t> encode_frame_message(const FrameMessage& msg);
/// Throws ProtocolError on truncated or mistyped input.
FrameMessage decode_frame_message(std::span<const std::uint8_t> bytes);

std::uint32_t crc32_rgba(std::span<const Rgba8> pixels);
std::vector<std::uint8_t> encode_png(std::span<const Rgba8> pixels, std::uint32_t width, std::uint32_t height);
/// Throws ProtocolError on malformed data.
std::vector<Rgba8> decode_png(std::span<const std::uint8_t> png, std::uint32_t& width, std::uint32_t& height);

enum class InputKind { move, look, toggle, respawn };
enum class Toggle { portal_box, stencil, instanced, hidden_area, freeze_left_eye_debug };

[[nodiscard]] std::string_view to_string(Toggle t);

struct InputEvent {
    InputKind kind = InputKind::move;
    Vec2 move = Vec2::Zero();  ///< (forward, strafe); clamped to length <= 1 on decode
    double yaw = 0.0;          ///< radians, positive turns left
    double pitch = 0.0;        ///< radians, positive looks up
    Toggle toggle = Toggle::portal_box;
    std::optional<bool> value;  ///< explicit toggle state; flips when absent
    double timestamp_ms = 0.0;
};

std::string input_to_json(const InputEvent& e);
/// Throws ProtocolError on malformed JSON or unknown kinds.
InputEvent input_from_json(std::string_view json);
std::vector<std::uint8_t> encode_input_message(const InputEvent& e);
InputEvent decode_input_message(std::span<const std::uint8_t> bytes);

struct AckMessage {
    Toggle toggle = Toggle::portal_box;
    bool value = false;
    std::uint64_t frame_index = 0;
};
std::vector<std::uint8_t> encode_ack_message(const AckMessage& a);
AckMessage decode_ack_message(std::span<const std::uint8_t> bytes);

}  // namespace portalvr::stream
