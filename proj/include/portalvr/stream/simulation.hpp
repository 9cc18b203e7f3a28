#pragma once

#include "portalvr/scheduler.hpp"
#include "portalvr/stream/protocol.hpp"

#include <span>

namespace portalvr::stream {

struct ToggleState {
    bool portal_box = true;
    bool stencil = false;
    bool instanced = false;
    bool hidden_area = false;
    bool left_eye_debug = false;  ///< left eye shows the space-id buffer in false color

    [[nodiscard]] std::uint32_t flags() const;
    [[nodiscard]] RenderMode mode() const;
    [[nodiscard]] bool get(Toggle t) const;
    void set(Toggle t, bool v);
};

struct InputOutcome {
    StereoRig rig;                   ///< head moved, not yet teleported
    bool respawn = false;
    std::vector<AckMessage> acks;    ///< frame_index left at 0
};

/// Look deltas are applied first (pitch clamped inside +-89.9 deg, roll
/// dropped), then the last move of the batch translates the head on the
/// horizontal plane in the new facing at `speed` m/s for `dt` seconds.
/// Toggles update `toggles`. An empty batch returns the rig unchanged.
InputOutcome apply_inputs(const StereoRig& rig, std::span<const InputEvent> events, double dt, double speed,
                          ToggleState& toggles);

struct SimulationConfig {
    int width = 256;   ///< per eye
    int height = 256;
    double speed = 1.5;  ///< m/s
    int workers = 1;
    ToggleState toggles;
    bool frustum_cull = false;
};

struct TickResult {
    FrameMessage message;
    FrameMetrics metrics;
    std::vector<CrossingEvent> crossings;
    std::vector<AckMessage> acks;
};

/// Deterministic frame loop body: inputs -> motion -> teleports -> plan ->
/// raster -> encoded frame. No networking; the server and replay tests share it.
class Simulation {
public:
    Simulation(Scene scene, SimulationConfig config);

    TickResult tick(std::span<const InputEvent> events, double dt);

    [[nodiscard]] const Scene& scene() const { return scene_; }
    [[nodiscard]] const StereoRig& rig() const { return rig_; }
    [[nodiscard]] const ToggleState& toggles() const { return toggles_; }
    [[nodiscard]] std::uint64_t frame_index() const { return frame_index_; }
    [[nodiscard]] const SimulationConfig& config() const { return config_; }
    /// RGBA pixels of the last frame as sent (after the debug overlay).
    [[nodiscard]] const std::vector<Rgba8>& last_pixels() const { return pixels_; }
    [[nodiscard]] const raster::StereoTarget& last_target() const { return renderer_.output(); }

private:
    Scene scene_;
    SimulationConfig config_;
    StereoRig rig_;
    StereoRig spawn_;
    ToggleState toggles_;
    FrameRenderer renderer_;
    std::uint64_t frame_index_ = 0;
    std::vector<Rgba8> pixels_;
};

/// False color used for space ids in debug views (0 = black).
Rgba8 space_color(std::uint32_t space_id);

}  // namespace portalvr::stream
