#include "portalvr/raster.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace portalvr::raster {

RasterCounters& RasterCounters::operator+=(const RasterCounters& o) {
    fragments_shaded += o.fragments_shaded;
    fragments_depth_stencil_only += o.fragments_depth_stencil_only;
    fragments_stencil_rejected += o.fragments_stencil_rejected;
    fragments_depth_rejected += o.fragments_depth_rejected;
    triangles_submitted += o.triangles_submitted;
    triangles_culled += o.triangles_culled;
    return *this;
}

RasterCounters operator-(RasterCounters a, const RasterCounters& b) {
    a.fragments_shaded -= b.fragments_shaded;
    a.fragments_depth_stencil_only -= b.fragments_depth_stencil_only;
    a.fragments_stencil_rejected -= b.fragments_stencil_rejected;
    a.fragments_depth_rejected -= b.fragments_depth_rejected;
    a.triangles_submitted -= b.triangles_submitted;
    a.triangles_culled -= b.triangles_culled;
    return a;
}

FrameTarget::FrameTarget(int width, int height) : width_(width), height_(height) {
    if (width <= 0 || height <= 0) throw std::invalid_argument("frame target needs positive dimensions");
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    color_.resize(n);
    depth_.resize(n);
    stencil_.resize(n);
    space_.resize(n);
    clear(Rgba8{0, 0, 0, 255});
}

void FrameTarget::clear(Rgba8 color) {
    std::fill(color_.begin(), color_.end(), color);
    std::fill(depth_.begin(), depth_.end(), kFarDepth);
    std::fill(stencil_.begin(), stencil_.end(), std::uint8_t{0});
    std::fill(space_.begin(), space_.end(), 0u);
    counters_ = {};
}

void FrameTarget::clear_region(const Viewport& vp, Rgba8 color) {
    for (int y = vp.y; y < vp.y + vp.height; ++y) {
        const auto row = static_cast<std::size_t>(y) * static_cast<std::size_t>(width_);
        for (int x = vp.x; x < vp.x + vp.width; ++x) {
            const std::size_t i = row + static_cast<std::size_t>(x);
            color_[i] = color;
            depth_[i] = kFarDepth;
            stencil_[i] = 0;
            space_[i] = 0;
        }
    }
}

void FrameTarget::clear_depth_where_stencil(const Viewport& vp, std::uint8_t ref) {
    for (int y = vp.y; y < vp.y + vp.height; ++y) {
        const auto row = static_cast<std::size_t>(y) * static_cast<std::size_t>(width_);
        for (int x = vp.x; x < vp.x + vp.width; ++x) {
            const std::size_t i = row + static_cast<std::size_t>(x);
            if (stencil_[i] == ref) depth_[i] = kFarDepth;
        }
    }
}

PixelSample FrameTarget::read_pixel(int x, int y) const {
    if (x < 0 || y < 0 || x >= width_ || y >= height_) throw std::out_of_range("pixel outside frame target");
    const std::size_t i = static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    return {color_[i], depth_[i], stencil_[i], space_[i]};
}

struct TargetAccess {
    static std::vector<Rgba8>& color(FrameTarget& t) { return t.color_; }
    static std::vector<float>& depth(FrameTarget& t) { return t.depth_; }
    static std::vector<std::uint8_t>& stencil(FrameTarget& t) { return t.stencil_; }
    static std::vector<std::uint32_t>& space(FrameTarget& t) { return t.space_; }
    static RasterCounters& counters(FrameTarget& t) { return t.counters_; }
};

namespace {

constexpr double kGuardBand = 2.0;

// Screen-space triangle ready for scan conversion (viewport-local coordinates).
struct SetupTri {
    std::array<std::int64_t, 3> x{}, y{};  // snapped, area > 0 orientation
    std::array<std::int64_t, 3> bias{};    // 1 for top-left edges
    int min_px = 0, max_px = -1, min_py = 0, max_py = -1;
    // View depth at pixel center: plane_c / (kx * ndc_x + ky * ndc_y + kz).
    double kx = 0, ky = 0, kz = 0, plane_c = 0;
    Rgba8 color;
};

struct DrawSetup {
    Viewport vp;
    std::vector<SetupTri> tris;
};

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

using Polygon = std::vector<Vec3>;

void clip_polygon(Polygon& poly, const Vec3& n, double d, Polygon& scratch) {
    scratch.clear();
    const std::size_t count = poly.size();
    for (std::size_t i = 0; i < count; ++i) {
        const Vec3& a = poly[i];
        const Vec3& b = poly[(i + 1) % count];
        const double da = n.dot(a) + d;
        const double db = n.dot(b) + d;
        if (da >= 0) scratch.push_back(a);
        if ((da >= 0) != (db >= 0)) {
            const double t = da / (da - db);
            scratch.push_back(a + t * (b - a));
        }
    }
    poly.swap(scratch);
}

// Adds one screen triangle; returns false when it has zero snapped area.
bool emit_screen_triangle(const std::array<std::int64_t, 2>& p0, const std::array<std::int64_t, 2>& p1,
                          const std::array<std::int64_t, 2>& p2, const Viewport& vp, SetupTri proto,
                          std::vector<SetupTri>& out) {
    std::array<std::array<std::int64_t, 2>, 3> p{p0, p1, p2};
    std::int64_t area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
    if (area2 == 0) return false;
    if (area2 < 0) std::swap(p[1], p[2]);

    for (int k = 0; k < 3; ++k) {
        const auto& a = p[static_cast<std::size_t>(k)];
        const auto& b = p[static_cast<std::size_t>((k + 1) % 3)];
        const std::int64_t dx = b[0] - a[0];
        const std::int64_t dy = b[1] - a[1];
        proto.x[static_cast<std::size_t>(k)] = a[0];
        proto.y[static_cast<std::size_t>(k)] = a[1];
        proto.bias[static_cast<std::size_t>(k)] = ((dy == 0 && dx > 0) || dy < 0) ? 1 : 0;
    }
    const std::int64_t half = kSubpixelScale / 2;
    const std::int64_t lo_x = std::min({p[0][0], p[1][0], p[2][0]});
    const std::int64_t hi_x = std::max({p[0][0], p[1][0], p[2][0]});
    const std::int64_t lo_y = std::min({p[0][1], p[1][1], p[2][1]});
    const std::int64_t hi_y = std::max({p[0][1], p[1][1], p[2][1]});
    // Pixel i has its center at i * scale + scale / 2.
    proto.min_px = static_cast<int>(std::max<std::int64_t>(0, -floor_div(-(lo_x - half), kSubpixelScale)));
    proto.max_px = static_cast<int>(std::min<std::int64_t>(vp.width - 1, floor_div(hi_x - half, kSubpixelScale)));
    proto.min_py = static_cast<int>(std::max<std::int64_t>(0, -floor_div(-(lo_y - half), kSubpixelScale)));
    proto.max_py = static_cast<int>(std::min<std::int64_t>(vp.height - 1, floor_div(hi_y - half, kSubpixelScale)));
    if (proto.min_px > proto.max_px || proto.min_py > proto.max_py) return true;  // off-viewport, not degenerate
    out.push_back(proto);
    return true;
}

// Transforms, culls and clips one triangle into screen triangles.
void setup_triangle(const Triangle& tri, bool cull_backfaces, const RigidTransform& view, const Projection& proj,
                    const Viewport& vp, std::vector<SetupTri>& out, RasterCounters& counters, Polygon& poly,
                    Polygon& scratch) {
    const Vec3 v0 = view.apply_point(tri.v[0]);
    const Vec3 v1 = view.apply_point(tri.v[1]);
    const Vec3 v2 = view.apply_point(tri.v[2]);
    const Vec3 normal = (v1 - v0).cross(v2 - v0);
    const double facing = -normal.dot(v0);  // > 0 when the counter-clockwise side faces the eye
    if (cull_backfaces && !(facing > 0.0)) {
        ++counters.triangles_culled;
        return;
    }

    poly.assign({v0, v1, v2});
    const double tx = proj.tan_half_x();
    const double ty = proj.tan_half_y();
    clip_polygon(poly, Vec3(0, 0, -1), -proj.near, scratch);
    if (poly.size() >= 3) clip_polygon(poly, Vec3(0, 0, 1), proj.far, scratch);
    if (poly.size() >= 3) clip_polygon(poly, Vec3(1, 0, -kGuardBand * tx), 0.0, scratch);
    if (poly.size() >= 3) clip_polygon(poly, Vec3(-1, 0, -kGuardBand * tx), 0.0, scratch);
    if (poly.size() >= 3) clip_polygon(poly, Vec3(0, 1, -kGuardBand * ty), 0.0, scratch);
    if (poly.size() >= 3) clip_polygon(poly, Vec3(0, -1, -kGuardBand * ty), 0.0, scratch);
    if (poly.size() >= 3 && proj.oblique_plane) clip_polygon(poly, proj.oblique_plane->normal, proj.oblique_plane->offset, scratch);
    if (poly.size() < 3) {
        ++counters.triangles_culled;
        return;
    }

    SetupTri proto;
    proto.color = tri.color;
    proto.kx = normal.x() * tx;
    proto.ky = normal.y() * ty;
    proto.kz = -normal.z();
    proto.plane_c = normal.dot(v0);

    const double w = static_cast<double>(vp.width);
    const double h = static_cast<double>(vp.height);
    std::vector<std::array<std::int64_t, 2>> screen;
    screen.reserve(poly.size());
    for (const Vec3& p : poly) {
        const double depth = -p.z();
        const double ndc_x = p.x() / (depth * tx);
        const double ndc_y = p.y() / (depth * ty);
        const double sx = (ndc_x + 1.0) * 0.5 * w;
        const double sy = (1.0 - ndc_y) * 0.5 * h;
        screen.push_back({std::llround(sx * static_cast<double>(kSubpixelScale)),
                          std::llround(sy * static_cast<double>(kSubpixelScale))});
    }

    bool any = false;
    for (std::size_t i = 1; i + 1 < screen.size(); ++i) {
        any = emit_screen_triangle(screen[0], screen[i], screen[i + 1], vp, proto, out) || any;
    }
    if (!any) ++counters.triangles_culled;
}

bool stencil_passes(Compare c, std::uint8_t value, std::uint8_t ref) {
    switch (c) {
        case Compare::always: return true;
        case Compare::equal: return value == ref;
        case Compare::not_equal: return value != ref;
    }
    return false;
}

struct ShadeContext {
    FrameTarget* target;
    const StencilPolicy* policy;
    const FrameTarget* surface_source;
    std::uint32_t space_id;
};

void raster_rows(const ShadeContext& ctx, const DrawSetup& setup, int row_begin, int row_end, RasterCounters& counters) {
    FrameTarget& target = *ctx.target;
    auto& color = TargetAccess::color(target);
    auto& depth = TargetAccess::depth(target);
    auto& stencil = TargetAccess::stencil(target);
    auto& space = TargetAccess::space(target);
    const StencilPolicy& pol = *ctx.policy;
    const Viewport& vp = setup.vp;
    const double inv_w = 2.0 / static_cast<double>(vp.width);
    const double inv_h = 2.0 / static_cast<double>(vp.height);
    const auto stride = static_cast<std::size_t>(target.width());
    const std::int64_t half = kSubpixelScale / 2;

    for (const SetupTri& t : setup.tris) {
        const int y0 = std::max(t.min_py, row_begin);
        const int y1 = std::min(t.max_py, row_end - 1);
        if (y0 > y1) continue;

        std::array<std::int64_t, 3> step_x{}, row_e{};
        const std::int64_t px0 = static_cast<std::int64_t>(t.min_px) * kSubpixelScale + half;
        const std::int64_t py0 = static_cast<std::int64_t>(y0) * kSubpixelScale + half;
        std::array<std::int64_t, 3> step_y{};
        for (std::size_t k = 0; k < 3; ++k) {
            const std::size_t n = (k + 1) % 3;
            const std::int64_t dx = t.x[n] - t.x[k];
            const std::int64_t dy = t.y[n] - t.y[k];
            row_e[k] = dx * (py0 - t.y[k]) - dy * (px0 - t.x[k]) + t.bias[k];
            step_x[k] = -dy * kSubpixelScale;
            step_y[k] = dx * kSubpixelScale;
        }

        for (int py = y0; py <= y1; ++py) {
            std::array<std::int64_t, 3> e = row_e;
            const double ndc_y = 1.0 - (static_cast<double>(py) + 0.5) * inv_h;
            const double row_den = t.ky * ndc_y + t.kz;
            const std::size_t row_index = static_cast<std::size_t>(vp.y + py) * stride + static_cast<std::size_t>(vp.x);
            for (int px = t.min_px; px <= t.max_px; ++px) {
                if (e[0] > 0 && e[1] > 0 && e[2] > 0) {
                    const double ndc_x = (static_cast<double>(px) + 0.5) * inv_w - 1.0;
                    const float z = static_cast<float>(t.plane_c / (t.kx * ndc_x + row_den));
                    const std::size_t idx = row_index + static_cast<std::size_t>(px);
                    float& dz = depth[idx];
                    const bool depth_ok = std::isfinite(z) && z > 0.0f &&
                                          (pol.depth_test == DepthTest::less ? z < dz : z == dz);
                    if (!depth_ok) {
                        ++counters.fragments_depth_rejected;
                    } else if (!stencil_passes(pol.compare, stencil[idx], pol.reference)) {
                        ++counters.fragments_stencil_rejected;
                    } else {
                        if (pol.depth_write) dz = z;
                        if (pol.on_pass == StencilOp::replace) stencil[idx] = pol.write_value;
                        if (pol.color_write) {
                            if (ctx.surface_source != nullptr) {
                                color[idx] = ctx.surface_source->color()[idx];
                                space[idx] = ctx.surface_source->space_ids()[idx];
                            } else {
                                color[idx] = t.color;
                                space[idx] = ctx.space_id;
                            }
                            ++counters.fragments_shaded;
                        } else {
                            ++counters.fragments_depth_stencil_only;
                        }
                    }
                }
                e[0] += step_x[0];
                e[1] += step_x[1];
                e[2] += step_x[2];
            }
            row_e[0] += step_y[0];
            row_e[1] += step_y[1];
            row_e[2] += step_y[2];
        }
    }
}

void execute_setups(FrameTarget& target, std::span<const DrawSetup> setups, const Mesh& mesh, const StencilPolicy& policy,
                    const FrameTarget* surface_source) {
    if (surface_source != nullptr &&
        (surface_source->width() != target.width() || surface_source->height() != target.height())) {
        throw std::invalid_argument("surface source must match the target dimensions");
    }
    const FrameTarget* source = mesh.material == Material::portal_surface ? surface_source : nullptr;
    const ShadeContext ctx{&target, &policy, source, mesh.space.value};
    RasterCounters& total = TargetAccess::counters(target);

    std::size_t work = 0;
    for (const DrawSetup& s : setups) {
        for (const SetupTri& t : s.tris) {
            work += static_cast<std::size_t>(t.max_px - t.min_px + 1) * static_cast<std::size_t>(t.max_py - t.min_py + 1);
        }
    }
    const int workers = std::min(target.workers(), target.height());
    if (workers <= 1 || work < 16384) {
        RasterCounters c;
        for (const DrawSetup& s : setups) raster_rows(ctx, s, 0, target.height(), c);
        total += c;
        return;
    }

    // Disjoint row bands; every band walks triangles in submission order, so
    // the per-pixel result does not depend on the band split.
    std::vector<RasterCounters> partial(static_cast<std::size_t>(workers));
    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(workers));
    const int rows = target.height();
    for (int w = 0; w < workers; ++w) {
        const int r0 = rows * w / workers;
        const int r1 = rows * (w + 1) / workers;
        threads.emplace_back([&, w, r0, r1] {
            for (const DrawSetup& s : setups) {
                // Setups use viewport-local rows.
                raster_rows(ctx, s, r0 - s.vp.y, r1 - s.vp.y, partial[static_cast<std::size_t>(w)]);
            }
        });
    }
    for (std::thread& t : threads) t.join();
    for (const RasterCounters& c : partial) total += c;
}

void check_viewport(const FrameTarget& target, const Viewport& vp) {
    if (vp.width <= 0 || vp.height <= 0 || vp.x < 0 || vp.y < 0 || vp.x + vp.width > target.width() ||
        vp.y + vp.height > target.height()) {
        throw std::invalid_argument("viewport lies outside the frame target");
    }
}

}  // namespace

void draw_mesh(FrameTarget& target, const Mesh& mesh, const RigidTransform& view, const Projection& proj,
               const StencilPolicy& policy, const Viewport& viewport, const FrameTarget* surface_source) {
    check_viewport(target, viewport);
    RasterCounters& counters = TargetAccess::counters(target);
    std::array<DrawSetup, 1> setup{DrawSetup{viewport, {}}};
    setup[0].tris.reserve(mesh.triangles.size());
    Polygon poly, scratch;
    for (const Triangle& tri : mesh.triangles) {
        ++counters.triangles_submitted;
        setup_triangle(tri, mesh.cull_backfaces, view, proj, viewport, setup[0].tris, counters, poly, scratch);
    }
    execute_setups(target, setup, mesh, policy, surface_source);
}

void draw_mesh_instanced_stereo(StereoTarget& target, const Mesh& mesh, const RigidTransform& left_view,
                                const RigidTransform& right_view, const StereoProjection& proj,
                                const StencilPolicy& policy, const FrameTarget* surface_source) {
    FrameTarget& frame = target.frame();
    RasterCounters& counters = TargetAccess::counters(frame);
    std::array<DrawSetup, 2> setup{DrawSetup{target.viewport(Eye::left), {}}, DrawSetup{target.viewport(Eye::right), {}}};
    Polygon poly, scratch;
    for (const Triangle& tri : mesh.triangles) {
        ++counters.triangles_submitted;
        setup_triangle(tri, mesh.cull_backfaces, left_view, proj.left, setup[0].vp, setup[0].tris, counters, poly, scratch);
        setup_triangle(tri, mesh.cull_backfaces, right_view, proj.right, setup[1].vp, setup[1].tris, counters, poly, scratch);
    }
    execute_setups(frame, setup, mesh, policy, surface_source);
}

std::uint64_t apply_hidden_area_mask(FrameTarget& target, const Viewport& viewport, std::span<const MaskTriangle> mask) {
    check_viewport(target, viewport);
    DrawSetup setup{viewport, {}};
    for (const MaskTriangle& m : mask) {
        std::array<std::array<std::int64_t, 2>, 3> p{};
        for (std::size_t k = 0; k < 3; ++k) {
            p[k] = {std::llround(m.v[k].x() * viewport.width * static_cast<double>(kSubpixelScale)),
                    std::llround(m.v[k].y() * viewport.height * static_cast<double>(kSubpixelScale))};
        }
        emit_screen_triangle(p[0], p[1], p[2], viewport, SetupTri{}, setup.tris);
    }

    auto& stencil = TargetAccess::stencil(target);
    const auto stride = static_cast<std::size_t>(target.width());
    const std::int64_t half = kSubpixelScale / 2;
    std::uint64_t masked = 0;
    for (const SetupTri& t : setup.tris) {
        for (int py = t.min_py; py <= t.max_py; ++py) {
            for (int px = t.min_px; px <= t.max_px; ++px) {
                const std::int64_t sx = static_cast<std::int64_t>(px) * kSubpixelScale + half;
                const std::int64_t sy = static_cast<std::int64_t>(py) * kSubpixelScale + half;
                bool inside = true;
                for (std::size_t k = 0; k < 3 && inside; ++k) {
                    const std::size_t n = (k + 1) % 3;
                    const std::int64_t e = (t.x[n] - t.x[k]) * (sy - t.y[k]) - (t.y[n] - t.y[k]) * (sx - t.x[k]) + t.bias[k];
                    inside = e > 0;
                }
                if (!inside) continue;
                const std::size_t idx = static_cast<std::size_t>(viewport.y + py) * stride + static_cast<std::size_t>(viewport.x + px);
                if (stencil[idx] != kStencilReject) {
                    stencil[idx] = kStencilReject;
                    ++masked;
                }
            }
        }
    }
    return masked;
}

std::vector<MaskTriangle> make_lens_mask(int segments_per_corner, double exponent) {
    if (segments_per_corner < 1 || exponent < 2.0) throw std::invalid_argument("lens mask needs >= 1 segment and exponent >= 2");
    std::vector<MaskTriangle> tris;
    auto to_norm = [](double x, double y) { return Vec2(0.5 * (x + 1.0), 0.5 * (1.0 - y)); };
    for (int corner = 0; corner < 4; ++corner) {
        const double sx = (corner == 0 || corner == 3) ? 1.0 : -1.0;
        const double sy = (corner < 2) ? 1.0 : -1.0;
        auto arc = [&](int i) {
            const double theta = 0.5 * kPi * i / segments_per_corner;
            const double c = std::pow(std::cos(theta), 2.0 / exponent);
            const double s = std::pow(std::sin(theta), 2.0 / exponent);
            return to_norm(sx * c, sy * s);
        };
        const Vec2 tip = to_norm(sx, sy);
        for (int i = 0; i < segments_per_corner; ++i) {
            tris.push_back(MaskTriangle{{tip, arc(i), arc(i + 1)}});
        }
    }
    return tris;
}

}  // namespace portalvr::raster
