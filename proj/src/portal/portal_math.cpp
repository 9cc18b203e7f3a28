#include "portalvr/portal_math.hpp"

#include "portalvr/geometry.hpp"

#include <cmath>
#include <string>

namespace portalvr {

namespace {

void require_partnered(const Portal& src, const Portal& dst) {
    if (src.partner != dst.id || dst.partner != src.id) {
        throw SceneError(SceneError::Kind::asymmetric_partner,
                         "portals " + std::to_string(src.id.value) + " and " + std::to_string(dst.id.value) + " are not partners");
    }
}

}  // namespace

RigidTransform portal_view_transform(const Portal& src, const Portal& dst) {
    require_partnered(src, dst);
    return dst.pose * RigidTransform::rotation_about_y(kPi) * src.pose.inverse();
}

std::optional<CrossingEvent> detect_crossing(const Vec3& prev_head, const Vec3& next_head, const Portal& portal) {
    const RigidTransform to_local = portal.pose.inverse();
    const Vec3 a = to_local.apply_point(prev_head);
    const Vec3 b = to_local.apply_point(next_head);
    if (!(a.z() >= 0.0 && b.z() < 0.0)) return std::nullopt;

    const double t = a.z() / (a.z() - b.z());
    const Vec3 local = a + t * (b - a);
    constexpr double eps = 1e-9;
    if (std::abs(local.x()) > 0.5 * portal.width + eps || std::abs(local.y()) > 0.5 * portal.height + eps) {
        return std::nullopt;
    }
    return CrossingEvent{portal.id, t, portal.pose.apply_point(Vec3(local.x(), local.y(), 0.0))};
}

Pose teleport(const Pose& head, const Portal& src, const Portal& dst) {
    return transform_pose(portal_view_transform(src, dst), head);
}

Pose teleport(const Pose& head, const Portal& src, const Scene& scene) {
    return teleport(head, src, scene.partner_of(src));
}

Mesh make_portal_box(const Portal& portal) {
    if (!(portal.box_depth > 0.0)) {
        throw SceneError(SceneError::Kind::invalid_dimension, "portal box depth must be positive");
    }
    const double hw = 0.5 * portal.width, hh = 0.5 * portal.height, d = portal.box_depth;
    // Local corners: front (z = 0) and back (z = -d).
    const Vec3 f00(-hw, -hh, 0), f10(hw, -hh, 0), f11(hw, hh, 0), f01(-hw, hh, 0);
    const Vec3 b00(-hw, -hh, -d), b10(hw, -hh, -d), b11(hw, hh, -d), b01(-hw, hh, -d);

    Mesh m;
    m.name = "portal-box-" + std::to_string(portal.id.value);
    m.space = portal.space;
    m.material = Material::portal_surface;
    m.portal = portal.id;
    m.cull_backfaces = true;
    const Rgba8 c = portal.frame_color;
    add_quad(m, f00, f10, f11, f01, c);  // front, normal +Z (outward)
    add_quad(m, b00, b10, b11, b01, c);  // back wall, normal +Z (inward)
    add_quad(m, b00, b01, f01, f00, c);  // left wall, normal +X (inward)
    add_quad(m, b10, f10, f11, b11, c);  // right wall, normal -X (inward)
    add_quad(m, f00, f10, b10, b00, c);  // floor, normal +Y (inward)
    add_quad(m, f01, b01, b11, f11, c);  // ceiling, normal -Y (inward)
    for (Triangle& t : m.triangles) {
        for (Vec3& v : t.v) v = portal.pose.apply_point(v);
    }
    return m;
}

Mesh make_portal_quad(const Portal& portal) {
    Mesh m = make_quad_mesh("portal-quad-" + std::to_string(portal.id.value), portal.space, portal.pose, portal.width,
                            portal.height, portal.frame_color);
    m.material = Material::portal_surface;
    m.portal = portal.id;
    return m;
}

Mesh make_portal_placeholder(const Portal& portal) {
    Mesh m = make_quad_mesh("portal-placeholder-" + std::to_string(portal.id.value), portal.space, portal.pose,
                            portal.width, portal.height, portal.frame_color);
    m.material = Material::portal_placeholder;
    m.portal = portal.id;
    return m;
}

bool eye_inside_box(const Vec3& eye, const Portal& portal) {
    const Vec3 l = portal.pose.inverse().apply_point(eye);
    return l.z() < 0.0 && l.z() > -portal.box_depth && std::abs(l.x()) < 0.5 * portal.width &&
           std::abs(l.y()) < 0.5 * portal.height;
}

Plane portal_plane(const Portal& portal) {
    return Plane::through_point(portal.pose.apply_vector(Vec3::UnitZ()), portal.pose.translation());
}

}  // namespace portalvr
