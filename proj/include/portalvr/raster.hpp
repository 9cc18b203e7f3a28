#pragma once

#include "portalvr/scene.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace portalvr::raster {

/// Sub-pixel precision of snapped vertex positions (8 bits, 1/256 px).
inline constexpr int kSubpixelBits = 8;
inline constexpr std::int64_t kSubpixelScale = std::int64_t{1} << kSubpixelBits;

/// Stencil value that marks pixels no later pass may shade.
inline constexpr std::uint8_t kStencilReject = 255;

struct Viewport {
    int x = 0, y = 0, width = 0, height = 0;
    friend bool operator==(const Viewport&, const Viewport&) = default;
};

enum class Compare { always, equal, not_equal };
enum class StencilOp { keep, replace };
enum class DepthTest { less, equal };

/// Per-draw depth/stencil/color state.
struct StencilPolicy {
    Compare compare = Compare::always;
    std::uint8_t reference = 0;
    StencilOp on_pass = StencilOp::keep;
    std::uint8_t write_value = 0;  ///< value written by StencilOp::replace
    bool color_write = true;
    bool depth_write = true;
    DepthTest depth_test = DepthTest::less;

    /// Color + depth, stencil ignored.
    static StencilPolicy permissive() { return {}; }
    /// Writes `ref` into the stencil where the geometry is nearest; no color.
    static StencilPolicy mark_only(std::uint8_t ref) {
        return {Compare::always, ref, StencilOp::replace, ref, false, true, DepthTest::less};
    }
    /// Color only where the stencil equals `ref`.
    static StencilPolicy masked(std::uint8_t ref) {
        return {Compare::equal, ref, StencilOp::keep, ref, true, true, DepthTest::less};
    }
};

struct RasterCounters {
    std::uint64_t fragments_shaded = 0;            ///< fragments that wrote color
    std::uint64_t fragments_depth_stencil_only = 0;  ///< passed, but color writes were off
    std::uint64_t fragments_stencil_rejected = 0;
    std::uint64_t fragments_depth_rejected = 0;
    std::uint64_t triangles_submitted = 0;
    std::uint64_t triangles_culled = 0;

    RasterCounters& operator+=(const RasterCounters& o);
    friend RasterCounters operator-(RasterCounters a, const RasterCounters& b);
    friend bool operator==(const RasterCounters&, const RasterCounters&) = default;
};

struct PixelSample {
    Rgba8 color;
    float depth = 0.0f;
    std::uint8_t stencil = 0;
    std::uint32_t space_id = 0;
};

/// Color (RGBA8), depth (view-space distance, float), 8-bit stencil and a
/// debug space-id channel, plus fragment/triangle counters.
class FrameTarget {
public:
    static constexpr float kFarDepth = std::numeric_limits<float>::infinity();

    FrameTarget() = default;
    FrameTarget(int width, int height);

    [[nodiscard]] int width() const { return width_; }
    [[nodiscard]] int height() const { return height_; }
    [[nodiscard]] Viewport full_viewport() const { return {0, 0, width_, height_}; }

    /// Resets every buffer and the counters.
    void clear(Rgba8 color);
    /// Resets buffers inside `vp` only; counters untouched.
    void clear_region(const Viewport& vp, Rgba8 color);
    /// Resets depth to far where the stencil equals `ref` inside `vp`.
    void clear_depth_where_stencil(const Viewport& vp, std::uint8_t ref);

    /// Throws std::out_of_range outside the target.
    [[nodiscard]] PixelSample read_pixel(int x, int y) const;

    [[nodiscard]] std::span<const Rgba8> color() const { return color_; }
    [[nodiscard]] std::span<const float> depth() const { return depth_; }
    [[nodiscard]] std::span<const std::uint8_t> stencil() const { return stencil_; }
    [[nodiscard]] std::span<const std::uint32_t> space_ids() const { return space_; }

    [[nodiscard]] const RasterCounters& counters() const { return counters_; }
    void reset_counters() { counters_ = {}; }

    /// Worker count for intra-draw parallelism over disjoint row bands.
    void set_workers(int workers) { workers_ = workers < 1 ? 1 : workers; }
    [[nodiscard]] int workers() const { return workers_; }

private:
    friend struct TargetAccess;

    int width_ = 0;
    int height_ = 0;
    int workers_ = 1;
    std::vector<Rgba8> color_;
    std::vector<float> depth_;
    std::vector<std::uint8_t> stencil_;
    std::vector<std::uint32_t> space_;
    RasterCounters counters_;
};

/// Side-by-side stereo target: left eye in columns [0, W), right in [W, 2W).
class StereoTarget {
public:
    StereoTarget() = default;
    StereoTarget(int eye_width, int eye_height) : frame_(2 * eye_width, eye_height), eye_width_(eye_width) {}

    [[nodiscard]] FrameTarget& frame() { return frame_; }
    [[nodiscard]] const FrameTarget& frame() const { return frame_; }
    [[nodiscard]] int eye_width() const { return eye_width_; }
    [[nodiscard]] int eye_height() const { return frame_.height(); }
    [[nodiscard]] Viewport viewport(Eye eye) const {
        return {eye == Eye::left ? 0 : eye_width_, 0, eye_width_, frame_.height()};
    }

private:
    FrameTarget frame_;
    int eye_width_ = 0;
};

/// Rasterizes `mesh` seen through `view` (world -> view space, camera looking
/// down -Z) into `viewport`.
///
/// Triangles are back-face culled in view space (when the mesh asks for it),
/// clipped as polygons against the near/far planes, a 2x guard band and the
/// projection's oblique plane, snapped to 1/256 px and filled with the
/// top-left rule. Fragments are depth-tested, then stencil-tested. Color
/// writes store the triangle color and the mesh's space id, except for
/// portal-surface meshes with a `surface_source`, which copy color and space
/// id from that target at the same pixel.
void draw_mesh(FrameTarget& target, const Mesh& mesh, const RigidTransform& view, const Projection& proj,
               const StencilPolicy& policy, const Viewport& viewport, const FrameTarget* surface_source = nullptr);

/// Per-eye projections for an instanced draw (oblique planes differ per eye).
struct StereoProjection {
    Projection left;
    Projection right;
};

/// Traverses the mesh once and emits every triangle into both viewports.
/// Output is byte-identical to two draw_mesh calls; triangles_submitted is
/// counted once per triangle, triangles_culled once per culled instance.
void draw_mesh_instanced_stereo(StereoTarget& target, const Mesh& mesh, const RigidTransform& left_view,
                                const RigidTransform& right_view, const StereoProjection& proj,
                                const StencilPolicy& policy, const FrameTarget* surface_source = nullptr);

/// Mask triangle in normalized viewport coordinates: x right, y down, [0, 1].
struct MaskTriangle {
    std::array<Vec2, 3> v;
};

/// Writes kStencilReject under the mask; returns the number of covered pixels.
std::uint64_t apply_hidden_area_mask(FrameTarget& target, const Viewport& viewport, std::span<const MaskTriangle> mask);

/// Rounded-corner lens mask: the region outside a superellipse inscribed in the viewport.
std::vector<MaskTriangle> make_lens_mask(int segments_per_corner = 8, double exponent = 4.0);

}  // namespace portalvr::raster
