#pragma once

#include "portalvr/portal_math.hpp"
#include "portalvr/raster.hpp"

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace portalvr {

enum class RenderMode { naive_multi_pass, stencil_multi_pass, instanced_single_pass, stencil_instanced };

[[nodiscard]] std::string_view to_string(RenderMode mode);
/// Accepts "naive", "stencil", "instanced", "stencil-instanced".
[[nodiscard]] std::optional<RenderMode> parse_render_mode(std::string_view name);
[[nodiscard]] constexpr bool is_instanced(RenderMode m) {
    return m == RenderMode::instanced_single_pass || m == RenderMode::stencil_instanced;
}
[[nodiscard]] constexpr bool uses_stencil(RenderMode m) {
    return m == RenderMode::stencil_multi_pass || m == RenderMode::stencil_instanced;
}

enum class PassPurpose { stencil_mark, portal_view, main_scene, hidden_area_mask };
enum class PassEye { left, right, both_instanced };

[[nodiscard]] std::string_view to_string(PassPurpose p);
[[nodiscard]] std::string_view to_string(PassEye e);

struct RenderPass {
    PassPurpose purpose = PassPurpose::main_scene;
    PassEye eye = PassEye::left;
    /// World -> view per eye (virtual eye for portal views); only the pass's
    /// own eye is meaningful unless the pass is instanced.
    std::array<RigidTransform, 2> view;
    /// Per-eye projection; portal views carry the partner plane as oblique plane.
    std::array<Projection, 2> projection;
    SpaceId space;                  ///< space whose geometry the pass draws
    std::optional<PortalId> portal;  ///< portal-view passes
    std::uint8_t stencil_ref = 0;   ///< 0 for the main scene, k + 1 for planned portal k
    int slot = -1;                   ///< planned portal index (offscreen target in non-stencil modes)
};

struct PlanOptions {
    bool frustum_cull = false;
    bool hidden_area_mask = false;
    bool oblique_clip = true;
    bool portal_box = true;  ///< draw portals as boxes; quads otherwise
};

struct FramePlan {
    RenderMode mode = RenderMode::naive_multi_pass;
    PlanOptions options;
    std::vector<RenderPass> passes;
    std::vector<PortalId> portals;  ///< planned portals; index k has stencil reference k + 1
    std::vector<PortalId> visible;  ///< visible_portals() at planning time
    SpaceId space;                  ///< rig space (main-scene space)
    Vec3 head = Vec3::Zero();       ///< head position, orders draws front to back
    std::uint64_t scene_signature = 0;

    /// Passes counted by the pass law (hidden-area-mask passes excluded).
    [[nodiscard]] std::size_t pass_count() const;
    [[nodiscard]] bool is_visible(PortalId id) const;
};

/// 2 + 2N, 4 + 2N, 1 + N or 2 + N.
[[nodiscard]] std::size_t pass_law(RenderMode mode, std::size_t planned_portals);

/// Enabled portals whose quad intersects either eye frustum. Conservative:
/// occlusion is left to depth/stencil.
std::vector<PortalId> visible_portals(const Scene& scene, const StereoRig& rig);

/// Most portals a plan can hold (stencil 255 is reserved for rejected pixels).
inline constexpr std::size_t kMaxPlannedPortals = 254;

/// Thrown by plan_passes (too many portals) and execute_plan (plan/scene mismatch).
class PlanError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Ordered passes for one frame. Without frustum culling every enabled portal
/// is planned. Portal-view passes precede the main pass of their eye.
FramePlan plan_passes(const Scene& scene, const StereoRig& rig, RenderMode mode, const PlanOptions& options = {});
FramePlan plan_passes(const Scene& scene, const StereoRig& rig, RenderMode mode, bool frustum_cull);

/// One line per pass: index, purpose, eye, space, portal, stencil reference.
std::string dump_plan(const FramePlan& plan);

/// Cheap structural fingerprint used to reject plans built for another scene.
std::uint64_t scene_signature(const Scene& scene);

struct PassMetrics {
    PassPurpose purpose = PassPurpose::main_scene;
    PassEye eye = PassEye::left;
    std::optional<PortalId> portal;
    raster::RasterCounters counters;
    double ms = 0.0;
};

struct FrameMetrics {
    std::uint64_t frame_index = 0;
    double total_ms = 0.0;
    double plan_ms = 0.0;
    double raster_ms = 0.0;
    std::size_t pass_count = 0;       ///< pass-law count
    std::size_t executed_passes = 0;  ///< including hidden-area-mask passes
    raster::RasterCounters totals;
    /// Color fragments of single-eye passes, per eye (instanced passes excluded).
    std::array<std::uint64_t, 2> color_fragments_per_eye{0, 0};
    std::uint64_t masked_pixels = 0;
    SpaceId space;
    std::vector<PassMetrics> passes;

    [[nodiscard]] std::uint64_t fragments_shaded() const { return totals.fragments_shaded; }
    [[nodiscard]] std::uint64_t triangles_submitted() const { return totals.triangles_submitted; }
};

/// Owns the side-by-side output target and the offscreen portal-view targets.
class FrameRenderer {
public:
    FrameRenderer(int eye_width, int eye_height);

    [[nodiscard]] const raster::StereoTarget& output() const { return main_; }
    [[nodiscard]] int eye_width() const { return main_.eye_width(); }
    [[nodiscard]] int eye_height() const { return main_.eye_height(); }

    void set_workers(int workers);
    void set_clear_color(Rgba8 c) { clear_color_ = c; }
    [[nodiscard]] Rgba8 clear_color() const { return clear_color_; }

    /// Executes `plan` against `scene`. Throws PlanError when the plan was
    /// built for a different scene.
    FrameMetrics execute(const FramePlan& plan, const Scene& scene);

    /// Plans and executes, timing both.
    FrameMetrics render(const Scene& scene, const StereoRig& rig, RenderMode mode, const PlanOptions& options = {});

private:
    raster::StereoTarget& offscreen(std::size_t slot);

    raster::StereoTarget main_;
    std::vector<raster::StereoTarget> offscreen_;
    Rgba8 clear_color_{18, 18, 24, 255};
    int workers_ = 1;
};

FrameMetrics execute_plan(const FramePlan& plan, const Scene& scene, FrameRenderer& renderer);

struct FrameStepResult {
    StereoRig rig;
    std::vector<CrossingEvent> events;  ///< in t order; t refers to the original segment
};

/// Moves the head from `prev_head` to `new_head` (both in the rig's current
/// space). Crossings of enabled portals in the current space teleport the
/// whole rig; the rest of the segment continues in the destination space.
FrameStepResult frame_step(const Scene& scene, const StereoRig& rig, const Vec3& prev_head, const Pose& new_head,
                           int max_crossings = 8);
/// Same, starting from rig.head.
FrameStepResult frame_step(const Scene& scene, const StereoRig& rig, const Pose& new_head, int max_crossings = 8);

}  // namespace portalvr
