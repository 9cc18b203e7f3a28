#include "portalvr/stream/simulation.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace portalvr::stream {

std::uint32_t ToggleState::flags() const {
    std::uint32_t f = 0;
    if (portal_box) f |= flag_portal_box;
    if (stencil) f |= flag_stencil;
    if (instanced) f |= flag_instanced;
    if (hidden_area) f |= flag_hidden_area;
    if (left_eye_debug) f |= flag_left_eye_debug;
    return f;
}

RenderMode ToggleState::mode() const {
    if (stencil) return instanced ? RenderMode::stencil_instanced : RenderMode::stencil_multi_pass;
    return instanced ? RenderMode::instanced_single_pass : RenderMode::naive_multi_pass;
}

bool ToggleState::get(Toggle t) const {
    switch (t) {
        case Toggle::portal_box: return portal_box;
        case Toggle::stencil: return stencil;
        case Toggle::instanced: return instanced;
        case Toggle::hidden_area: return hidden_area;
        case Toggle::freeze_left_eye_debug: return left_eye_debug;
    }
    return false;
}

void ToggleState::set(Toggle t, bool v) {
    switch (t) {
        case Toggle::portal_box: portal_box = v; break;
        case Toggle::stencil: stencil = v; break;
        case Toggle::instanced: instanced = v; break;
        case Toggle::hidden_area: hidden_area = v; break;
        case Toggle::freeze_left_eye_debug: left_eye_debug = v; break;
    }
}

InputOutcome apply_inputs(const StereoRig& rig, std::span<const InputEvent> events, double dt, double speed,
                          ToggleState& toggles) {
    InputOutcome out;
    out.rig = rig;
    double d_yaw = 0.0, d_pitch = 0.0;
    bool looked = false;
    const InputEvent* move = nullptr;
    for (const InputEvent& e : events) {
        switch (e.kind) {
            case InputKind::look:
                d_yaw += e.yaw;
                d_pitch += e.pitch;
                looked = true;
                break;
            case InputKind::move: move = &e; break;
            case InputKind::toggle: {
                const bool v = e.value.value_or(!toggles.get(e.toggle));
                toggles.set(e.toggle, v);
                out.acks.push_back({e.toggle, v, 0});
                break;
            }
            case InputKind::respawn: out.respawn = true; break;
        }
    }

    if (looked) {
        const Vec3 ypr = ypr_degrees_from_quat(rig.head.orientation);
        const double yaw = ypr.x() + rad_to_deg(d_yaw);
        const double pitch = std::clamp(ypr.y() + rad_to_deg(d_pitch), -89.9, 89.9);
        out.rig.head.orientation = quat_from_ypr_degrees(yaw, pitch, 0.0);
    }
    if (move != nullptr && dt > 0.0) {
        Vec3 fwd = out.rig.head.orientation * Vec3(0, 0, -1);
        fwd.y() = 0.0;
        fwd = fwd.norm() < 1e-9 ? Vec3(0, 0, -1) : Vec3(fwd.normalized());
        const Vec3 right(-fwd.z(), 0.0, fwd.x());
        Vec2 m = move->move;
        if (m.norm() > 1.0) m.normalize();
        out.rig.head.position += speed * dt * (m.x() * fwd + m.y() * right);
    }
    return out;
}

Rgba8 space_color(std::uint32_t id) {
    if (id == 0) return {0, 0, 0, 255};
    static const Rgba8 palette[] = {{230, 25, 75, 255},  {60, 180, 75, 255},  {0, 130, 200, 255},  {255, 225, 25, 255},
                                    {245, 130, 48, 255}, {145, 30, 180, 255}, {70, 240, 240, 255}, {240, 50, 230, 255}};
    return palette[(id - 1) % 8];
}

Simulation::Simulation(Scene scene, SimulationConfig config)
    : scene_(std::move(scene)), config_(config), toggles_(config.toggles), renderer_(config.width, config.height) {
    validate_scene(scene_);
    renderer_.set_workers(config.workers);
    rig_ = scene_.rig;
    rig_.projection.aspect = static_cast<double>(config.width) / static_cast<double>(config.height);
    spawn_ = rig_;
}

TickResult Simulation::tick(std::span<const InputEvent> events, double dt) {
    TickResult result;
    InputOutcome in = apply_inputs(rig_, events, dt, config_.speed, toggles_);
    if (in.respawn) {
        rig_ = spawn_;
    } else {
        FrameStepResult step = frame_step(scene_, rig_, in.rig.head);
        rig_ = step.rig;
        result.crossings = std::move(step.events);
    }

    PlanOptions options;
    options.frustum_cull = config_.frustum_cull;
    options.portal_box = toggles_.portal_box;
    options.hidden_area_mask = toggles_.hidden_area;
    result.metrics = renderer_.render(scene_, rig_, toggles_.mode(), options);
    result.metrics.frame_index = frame_index_;

    const raster::StereoTarget& out = renderer_.output();
    const raster::FrameTarget& frame = out.frame();
    pixels_.assign(frame.color().begin(), frame.color().end());
    if (toggles_.left_eye_debug) {
        const raster::Viewport vp = out.viewport(Eye::left);
        for (int y = vp.y; y < vp.y + vp.height; ++y) {
            for (int x = vp.x; x < vp.x + vp.width; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * frame.width() + static_cast<std::size_t>(x);
                pixels_[i] = space_color(frame.space_ids()[i]);
            }
        }
    }

    FrameMessage& msg = result.message;
    msg.frame_index = frame_index_;
    msg.width = static_cast<std::uint32_t>(frame.width());
    msg.height = static_cast<std::uint32_t>(frame.height());
    msg.flags = toggles_.flags();
    msg.crc32 = crc32_rgba(pixels_);
    msg.png = encode_png(pixels_, msg.width, msg.height);
    const Vec3 ypr = ypr_degrees_from_quat(rig_.head.orientation);
    const FrameMetrics& m = result.metrics;
    nlohmann::json j{{"frame", frame_index_},
                     {"mode", std::string(to_string(toggles_.mode()))},
                     {"passes", m.pass_count},
                     {"executed_passes", m.executed_passes},
                     {"fragments", m.totals.fragments_shaded},
                     {"triangles", m.totals.triangles_submitted},
                     {"frame_ms", m.total_ms},
                     {"plan_ms", m.plan_ms},
                     {"raster_ms", m.raster_ms},
                     {"space", rig_.space.value},
                     {"crossings", result.crossings.size()},
                     {"head", {{"position", {rig_.head.position.x(), rig_.head.position.y(), rig_.head.position.z()}},
                               {"ypr_deg", {ypr.x(), ypr.y(), ypr.z()}}}}};
    msg.metrics_json = j.dump();

    for (AckMessage a : in.acks) {
        a.frame_index = frame_index_;
        result.acks.push_back(a);
    }
    ++frame_index_;
    return result;
}

}  // namespace portalvr::stream
