#include "portalvr/scheduler.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace portalvr {

std::string_view to_string(RenderMode mode) {
    switch (mode) {
        case RenderMode::naive_multi_pass: return "naive";
        case RenderMode::stencil_multi_pass: return "stencil";
        case RenderMode::instanced_single_pass: return "instanced";
        case RenderMode::stencil_instanced: return "stencil-instanced";
    }
    return "?";
}

std::optional<RenderMode> parse_render_mode(std::string_view name) {
    for (RenderMode m : {RenderMode::naive_multi_pass, RenderMode::stencil_multi_pass, RenderMode::instanced_single_pass,
                         RenderMode::stencil_instanced}) {
        if (to_string(m) == name) return m;
    }
    return std::nullopt;
}

std::string_view to_string(PassPurpose p) {
    switch (p) {
        case PassPurpose::stencil_mark: return "stencil-mark";
        case PassPurpose::portal_view: return "portal-view";
        case PassPurpose::main_scene: return "main-scene";
        case PassPurpose::hidden_area_mask: return "hidden-area-mask";
    }
    return "?";
}

std::string_view to_string(PassEye e) {
    switch (e) {
        case PassEye::left: return "left";
        case PassEye::right: return "right";
        case PassEye::both_instanced: return "both";
    }
    return "?";
}

std::size_t FramePlan::pass_count() const {
    return static_cast<std::size_t>(std::count_if(passes.begin(), passes.end(), [](const RenderPass& p) {
        return p.purpose != PassPurpose::hidden_area_mask;
    }));
}

bool FramePlan::is_visible(PortalId id) const { return std::find(visible.begin(), visible.end(), id) != visible.end(); }

std::size_t pass_law(RenderMode mode, std::size_t n) {
    switch (mode) {
        case RenderMode::naive_multi_pass: return 2 + 2 * n;
        case RenderMode::stencil_multi_pass: return 4 + 2 * n;
        case RenderMode::instanced_single_pass: return 1 + n;
        case RenderMode::stencil_instanced: return 2 + n;
    }
    return 0;
}

namespace {

bool quad_in_frustum(const Portal& portal, const RigidTransform& view, const Projection& proj) {
    const double hw = 0.5 * portal.width, hh = 0.5 * portal.height;
    std::vector<Vec3> poly{view.apply_point(portal.pose.apply_point({-hw, -hh, 0})),
                           view.apply_point(portal.pose.apply_point({hw, -hh, 0})),
                           view.apply_point(portal.pose.apply_point({hw, hh, 0})),
                           view.apply_point(portal.pose.apply_point({-hw, hh, 0}))};
    const double tx = proj.tan_half_x(), ty = proj.tan_half_y();
    const std::array<std::pair<Vec3, double>, 6> planes{{{Vec3(0, 0, -1), -proj.near},
                                                         {Vec3(0, 0, 1), proj.far},
                                                         {Vec3(1, 0, -tx), 0.0},
                                                         {Vec3(-1, 0, -tx), 0.0},
                                                         {Vec3(0, 1, -ty), 0.0},
                                                         {Vec3(0, -1, -ty), 0.0}}};
    std::vector<Vec3> next;
    for (const auto& [n, d] : planes) {
        next.clear();
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const Vec3& a = poly[i];
            const Vec3& b = poly[(i + 1) % poly.size()];
            const double da = n.dot(a) + d, db = n.dot(b) + d;
            if (da >= 0) next.push_back(a);
            if ((da >= 0) != (db >= 0)) next.push_back(a + (da / (da - db)) * (b - a));
        }
        poly.swap(next);
        if (poly.empty()) return false;
    }
    return true;
}

std::uint64_t mix(std::uint64_t h, std::uint64_t v) {
    h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

}  // namespace

std::vector<PortalId> visible_portals(const Scene& scene, const StereoRig& rig) {
    std::vector<PortalId> out;
    const RigidTransform left = rig.view_matrix(Eye::left);
    const RigidTransform right = rig.view_matrix(Eye::right);
    for (const Portal& p : scene.portals) {
        if (!p.enabled) continue;
        if (quad_in_frustum(p, left, rig.projection) || quad_in_frustum(p, right, rig.projection)) out.push_back(p.id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::uint64_t scene_signature(const Scene& scene) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const Space& s : scene.spaces) h = mix(h, s.id.value);
    for (const Mesh& m : scene.meshes) {
        h = mix(h, m.space.value);
        h = mix(h, m.triangles.size());
    }
    for (const Portal& p : scene.portals) {
        h = mix(h, p.id.value);
        h = mix(h, p.partner.value);
        h = mix(h, p.space.value);
        h = mix(h, p.enabled ? 1 : 0);
    }
    return h;
}

FramePlan plan_passes(const Scene& scene, const StereoRig& rig, RenderMode mode, bool frustum_cull) {
    PlanOptions o;
    o.frustum_cull = frustum_cull;
    return plan_passes(scene, rig, mode, o);
}

FramePlan plan_passes(const Scene& scene, const StereoRig& rig, RenderMode mode, const PlanOptions& options) {
    FramePlan plan;
    plan.mode = mode;
    plan.options = options;
    plan.space = rig.space;
    plan.head = rig.head.position;
    plan.scene_signature = scene_signature(scene);
    plan.visible = visible_portals(scene, rig);

    std::vector<const Portal*> planned;
    for (const Portal& p : scene.portals) {
        if (!p.enabled) continue;
        if (options.frustum_cull && !plan.is_visible(p.id)) continue;
        planned.push_back(&p);
    }
    std::sort(planned.begin(), planned.end(), [](const Portal* a, const Portal* b) { return a->id < b->id; });
    if (planned.size() > kMaxPlannedPortals) {
        throw PlanError("a frame can plan at most " + std::to_string(kMaxPlannedPortals) + " portals, got " +
                        std::to_string(planned.size()));
    }
    for (const Portal* p : planned) plan.portals.push_back(p->id);

    const std::array<RigidTransform, 2> eye_view{rig.view_matrix(Eye::left), rig.view_matrix(Eye::right)};
    const std::array<Projection, 2> eye_proj{rig.projection, rig.projection};

    auto base_pass = [&](PassPurpose purpose, PassEye eye) {
        RenderPass pass;
        pass.purpose = purpose;
        pass.eye = eye;
        pass.view = eye_view;
        pass.projection = eye_proj;
        pass.space = rig.space;
        return pass;
    };

    auto portal_pass = [&](std::size_t k, PassEye eye) {
        const Portal& src = *planned[k];
        const Portal& dst = scene.partner_of(src);
        RenderPass pass = base_pass(PassPurpose::portal_view, eye);
        pass.space = dst.space;
        pass.portal = src.id;
        pass.slot = static_cast<int>(k);
        pass.stencil_ref = static_cast<std::uint8_t>(k + 1);
        // Virtual eye = T * eye, so its view matrix is eye_view * T^-1.
        const RigidTransform t_inv = portal_view_transform(src, dst).inverse();
        const Plane dst_plane = portal_plane(dst);
        for (std::size_t e = 0; e < 2; ++e) {
            pass.view[e] = eye_view[e] * t_inv;
            if (options.oblique_clip) pass.projection[e].oblique_plane = dst_plane.transformed(pass.view[e]);
        }
        return pass;
    };

    const bool stencil = uses_stencil(mode);
    auto emit_eye = [&](PassEye eye) {
        if (options.hidden_area_mask) plan.passes.push_back(base_pass(PassPurpose::hidden_area_mask, eye));
        if (stencil) plan.passes.push_back(base_pass(PassPurpose::stencil_mark, eye));
        for (std::size_t k = 0; k < planned.size(); ++k) plan.passes.push_back(portal_pass(k, eye));
        plan.passes.push_back(base_pass(PassPurpose::main_scene, eye));
    };

    if (is_instanced(mode)) {
        emit_eye(PassEye::both_instanced);
    } else {
        emit_eye(PassEye::left);
        emit_eye(PassEye::right);
    }
    return plan;
}

std::string dump_plan(const FramePlan& plan) {
    std::ostringstream out;
    out << "# mode " << to_string(plan.mode) << ", " << plan.pass_count() << " passes, space " << plan.space.value << "\n";
    for (std::size_t i = 0; i < plan.passes.size(); ++i) {
        const RenderPass& p = plan.passes[i];
        char line[160];
        std::snprintf(line, sizeof line, "%3zu %-16s %-5s space=%u portal=%s ref=%u\n", i,
                      std::string(to_string(p.purpose)).c_str(), std::string(to_string(p.eye)).c_str(), p.space.value,
                      p.portal ? std::to_string(p.portal->value).c_str() : "-", static_cast<unsigned>(p.stencil_ref));
        out << line;
    }
    return out.str();
}

}  // namespace portalvr
