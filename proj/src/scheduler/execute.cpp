#include "portalvr/scheduler.hpp"

#include <algorithm>
#include <chrono>
#include <limits>

namespace portalvr {

namespace {

using raster::Compare;
using raster::DepthTest;
using raster::StencilOp;
using raster::StencilPolicy;
using raster::kStencilReject;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

struct DrawItem {
    const Mesh* mesh = nullptr;
    int slot = -1;  ///< planned portal index for portal surfaces
    double key = 0.0;
};

// Distance from `eye` to the mesh bounds; meshes enclosing the eye sort last.
double sort_key(const Mesh& m, const Vec3& eye) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (const Triangle& t : m.triangles) {
        for (const Vec3& v : t.v) {
            lo = lo.cwiseMin(v);
            hi = hi.cwiseMax(v);
        }
    }
    if ((eye.array() >= lo.array()).all() && (eye.array() <= hi.array()).all()) {
        return std::numeric_limits<double>::infinity();
    }
    return (eye.cwiseMax(lo).cwiseMin(hi) - eye).norm();
}

// Front-to-back by bounds; stable so ties keep scene order.
void sort_front_to_back(std::vector<DrawItem>& items, const Vec3& eye) {
    for (DrawItem& item : items) item.key = sort_key(*item.mesh, eye);
    std::stable_sort(items.begin(), items.end(), [](const DrawItem& a, const DrawItem& b) { return a.key < b.key; });
}

// Geometry of one space in draw order: opaque meshes, then portal meshes.
struct DrawList {
    std::vector<Mesh> owned;
    std::vector<DrawItem> items;
};

DrawList main_draw_list(const Scene& scene, const FramePlan& plan) {
    DrawList list;
    std::vector<std::pair<Mesh, int>> portal_meshes;
    for (const Portal& p : scene.portals) {
        if (p.space != plan.space) continue;
        int slot = -1;
        for (std::size_t k = 0; k < plan.portals.size(); ++k) {
            if (plan.portals[k] == p.id) slot = static_cast<int>(k);
        }
        if (slot < 0) {
            portal_meshes.emplace_back(make_portal_placeholder(p), -1);
        } else {
            portal_meshes.emplace_back(plan.options.portal_box ? make_portal_box(p) : make_portal_quad(p), slot);
        }
    }
    list.owned.reserve(portal_meshes.size());
    for (auto& [m, slot] : portal_meshes) list.owned.push_back(std::move(m));
    for (const Mesh& m : scene.meshes) {
        if (m.space == plan.space) list.items.push_back({&m, -1});
    }
    for (std::size_t i = 0; i < list.owned.size(); ++i) list.items.push_back({&list.owned[i], portal_meshes[i].second});
    sort_front_to_back(list.items, plan.head);
    return list;
}

// Destination geometry seen through `through`; other portals become placeholders.
DrawList destination_draw_list(const Scene& scene, SpaceId space, PortalId through, const Vec3& eye) {
    DrawList list;
    for (const Portal& p : scene.portals) {
        if (p.space == space && p.id != through) list.owned.push_back(make_portal_placeholder(p));
    }
    for (const Mesh& m : scene.meshes) {
        if (m.space == space) list.items.push_back({&m, -1});
    }
    for (const Mesh& m : list.owned) list.items.push_back({&m, -1});
    sort_front_to_back(list.items, eye);
    return list;
}

StencilPolicy policy(Compare c, std::uint8_t ref, StencilOp op, std::uint8_t write, bool color, bool depth_write, DepthTest test) {
    StencilPolicy p;
    p.compare = c;
    p.reference = ref;
    p.on_pass = op;
    p.write_value = write;
    p.color_write = color;
    p.depth_write = depth_write;
    p.depth_test = test;
    return p;
}

std::vector<Eye> pass_eyes(const RenderPass& pass) {
    if (pass.eye == PassEye::both_instanced) return {Eye::left, Eye::right};
    return {pass.eye == PassEye::left ? Eye::left : Eye::right};
}

void draw(raster::StereoTarget& target, const RenderPass& pass, const Mesh& mesh, const StencilPolicy& pol,
          const raster::FrameTarget* source) {
    if (pass.eye == PassEye::both_instanced) {
        raster::draw_mesh_instanced_stereo(target, mesh, pass.view[0], pass.view[1], {pass.projection[0], pass.projection[1]},
                                           pol, source);
        return;
    }
    const std::size_t e = pass.eye == PassEye::left ? 0 : 1;
    raster::draw_mesh(target.frame(), mesh, pass.view[e], pass.projection[e], pol,
                      target.viewport(e == 0 ? Eye::left : Eye::right), source);
}

}  // namespace

FrameRenderer::FrameRenderer(int eye_width, int eye_height) : main_(eye_width, eye_height) {
    if (eye_width < 1 || eye_height < 1) throw std::invalid_argument("frame renderer needs a positive resolution");
}

void FrameRenderer::set_workers(int workers) {
    workers_ = workers < 1 ? 1 : workers;
    main_.frame().set_workers(workers_);
    for (auto& t : offscreen_) t.frame().set_workers(workers_);
}

raster::StereoTarget& FrameRenderer::offscreen(std::size_t slot) {
    while (offscreen_.size() <= slot) {
        offscreen_.emplace_back(main_.eye_width(), main_.eye_height());
        offscreen_.back().frame().set_workers(workers_);
    }
    return offscreen_[slot];
}

FrameMetrics FrameRenderer::execute(const FramePlan& plan, const Scene& scene) {
    if (plan.scene_signature != scene_signature(scene)) {
        throw PlanError("frame plan was built for a different scene");
    }
    const auto frame_start = Clock::now();
    FrameMetrics metrics;
    metrics.space = plan.space;
    metrics.pass_count = plan.pass_count();
    metrics.executed_passes = plan.passes.size();

    main_.frame().clear(clear_color_);
    const DrawList main_list = main_draw_list(scene, plan);
    const bool stencil = uses_stencil(plan.mode);
    if (!stencil && !plan.portals.empty()) offscreen(plan.portals.size() - 1);
    static const std::vector<raster::MaskTriangle> lens_mask = raster::make_lens_mask();

    for (const RenderPass& pass : plan.passes) {
        const auto pass_start = Clock::now();
        PassMetrics pm;
        pm.purpose = pass.purpose;
        pm.eye = pass.eye;
        pm.portal = pass.portal;
        raster::FrameTarget& frame = main_.frame();
        const raster::RasterCounters main_before = frame.counters();

        switch (pass.purpose) {
            case PassPurpose::hidden_area_mask:
                for (Eye e : pass_eyes(pass)) {
                    metrics.masked_pixels += raster::apply_hidden_area_mask(frame, main_.viewport(e), lens_mask);
                }
                pm.counters = frame.counters() - main_before;
                break;

            case PassPurpose::stencil_mark: {
                const StencilPolicy occluders =
                    policy(Compare::not_equal, kStencilReject, StencilOp::replace, 0, false, true, DepthTest::less);
                for (const DrawItem& item : main_list.items) {
                    if (item.slot < 0) {
                        draw(main_, pass, *item.mesh, occluders, nullptr);
                    } else {
                        const auto ref = static_cast<std::uint8_t>(item.slot + 1);
                        draw(main_, pass, *item.mesh,
                             policy(Compare::not_equal, kStencilReject, StencilOp::replace, ref, false, true, DepthTest::less),
                             nullptr);
                    }
                }
                pm.counters = frame.counters() - main_before;
                break;
            }

            case PassPurpose::portal_view: {
                const Portal& src = *scene.find_portal(*pass.portal);
                const Portal& partner = scene.partner_of(src);
                const DrawList dst =
                    destination_draw_list(scene, pass.space, partner.id, portal_view_transform(src, partner).apply_point(plan.head));
                if (stencil) {
                    for (Eye e : pass_eyes(pass)) frame.clear_depth_where_stencil(main_.viewport(e), pass.stencil_ref);
                    const StencilPolicy depth_only =
                        policy(Compare::equal, pass.stencil_ref, StencilOp::keep, pass.stencil_ref, false, true, DepthTest::less);
                    const StencilPolicy shade =
                        policy(Compare::equal, pass.stencil_ref, StencilOp::replace, kStencilReject, true, false, DepthTest::equal);
                    for (const DrawItem& item : dst.items) draw(main_, pass, *item.mesh, depth_only, nullptr);
                    for (const DrawItem& item : dst.items) draw(main_, pass, *item.mesh, shade, nullptr);
                    pm.counters = frame.counters() - main_before;
                } else {
                    raster::StereoTarget& off = offscreen(static_cast<std::size_t>(pass.slot));
                    for (Eye e : pass_eyes(pass)) off.frame().clear_region(off.viewport(e), clear_color_);
                    const raster::RasterCounters before = off.frame().counters();
                    for (const DrawItem& item : dst.items) draw(off, pass, *item.mesh, StencilPolicy::permissive(), nullptr);
                    pm.counters = off.frame().counters() - before;
                }
                break;
            }

            case PassPurpose::main_scene: {
                if (stencil) {
                    const StencilPolicy shade =
                        policy(Compare::equal, 0, StencilOp::replace, kStencilReject, true, false, DepthTest::equal);
                    for (const DrawItem& item : main_list.items) {
                        if (item.slot < 0) draw(main_, pass, *item.mesh, shade, nullptr);
                    }
                } else {
                    const StencilPolicy shade =
                        policy(Compare::not_equal, kStencilReject, StencilOp::keep, 0, true, true, DepthTest::less);
                    for (const DrawItem& item : main_list.items) {
                        const raster::FrameTarget* source =
                            item.slot < 0 ? nullptr : &offscreen(static_cast<std::size_t>(item.slot)).frame();
                        draw(main_, pass, *item.mesh, shade, source);
                    }
                }
                pm.counters = frame.counters() - main_before;
                break;
            }
        }

        pm.ms = ms_since(pass_start);
        metrics.totals += pm.counters;
        if (pass.eye != PassEye::both_instanced) {
            metrics.color_fragments_per_eye[pass.eye == PassEye::left ? 0 : 1] += pm.counters.fragments_shaded;
        }
        metrics.passes.push_back(pm);
    }

    metrics.raster_ms = ms_since(frame_start);
    metrics.total_ms = metrics.raster_ms;
    return metrics;
}

FrameMetrics FrameRenderer::render(const Scene& scene, const StereoRig& rig, RenderMode mode, const PlanOptions& options) {
    const auto t0 = Clock::now();
    const FramePlan plan = plan_passes(scene, rig, mode, options);
    const double plan_ms = ms_since(t0);
    FrameMetrics m = execute(plan, scene);
    m.plan_ms = plan_ms;
    m.total_ms = ms_since(t0);
    return m;
}

FrameMetrics execute_plan(const FramePlan& plan, const Scene& scene, FrameRenderer& renderer) {
    return renderer.execute(plan, scene);
}

}  // namespace portalvr
