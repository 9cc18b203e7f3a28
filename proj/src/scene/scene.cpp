#include "portalvr/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace portalvr {

double Projection::tan_half_y() const { return std::tan(0.5 * fov_y); }

Pose StereoRig::eye_pose(Eye eye) const {
    const double half = 0.5 * ipd * (eye == Eye::left ? -1.0 : 1.0);
    Pose p = head;
    p.position = head.position + head.orientation * Vec3(half, 0.0, 0.0);
    return p;
}

const Portal* Scene::find_portal(PortalId id) const {
    auto it = std::find_if(portals.begin(), portals.end(), [id](const Portal& p) { return p.id == id; });
    return it == portals.end() ? nullptr : &*it;
}

Portal* Scene::find_portal(PortalId id) {
    auto it = std::find_if(portals.begin(), portals.end(), [id](const Portal& p) { return p.id == id; });
    return it == portals.end() ? nullptr : &*it;
}

const Space* Scene::find_space(SpaceId id) const {
    auto it = std::find_if(spaces.begin(), spaces.end(), [id](const Space& s) { return s.id == id; });
    return it == spaces.end() ? nullptr : &*it;
}

const Portal& Scene::partner_of(const Portal& p) const {
    const Portal* partner = find_portal(p.partner);
    if (partner == nullptr) {
        throw SceneError(SceneError::Kind::dangling_partner,
                         "portal " + std::to_string(p.id.value) + " has no partner " + std::to_string(p.partner.value));
    }
    return *partner;
}

std::size_t Scene::enabled_portal_count() const {
    return static_cast<std::size_t>(std::count_if(portals.begin(), portals.end(), [](const Portal& p) { return p.enabled; }));
}

namespace {

struct Aabb {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = Vec3::Constant(-std::numeric_limits<double>::infinity());
    bool empty = true;

    void add(const Vec3& p) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
        empty = false;
    }
    [[nodiscard]] bool contains(const Vec3& p, double eps) const {
        return (p.array() >= lo.array() - eps).all() && (p.array() <= hi.array() + eps).all();
    }
};

Aabb space_envelope(const Scene& scene, SpaceId id) {
    Aabb box;
    for (const Mesh& m : scene.meshes) {
        if (m.space != id) continue;
        for (const Triangle& t : m.triangles) {
            for (const Vec3& v : t.v) box.add(v);
        }
    }
    return box;
}

std::string portal_name(const Portal& p) { return "portal " + std::to_string(p.id.value); }

}  // namespace

std::optional<FloorRect> Scene::walkable_region(SpaceId id) const {
    const Space* s = find_space(id);
    if (s == nullptr) return std::nullopt;
    if (s->walkable) return s->walkable;
    const Aabb box = space_envelope(*this, id);
    if (box.empty) return std::nullopt;
    return FloorRect{box.lo.x(), box.lo.z(), box.hi.x(), box.hi.z()};
}

void validate_scene(const Scene& scene) {
    using Kind = SceneError::Kind;

    std::set<std::uint32_t> space_ids;
    for (const Space& s : scene.spaces) {
        if (!space_ids.insert(s.id.value).second) {
            throw SceneError(Kind::parse, "duplicate space id " + std::to_string(s.id.value));
        }
        if (s.walkable && (s.walkable->max_x < s.walkable->min_x || s.walkable->max_z < s.walkable->min_z)) {
            throw SceneError(Kind::invalid_dimension, "space " + std::to_string(s.id.value) + " has an inverted walkable rect");
        }
    }

    for (const Mesh& m : scene.meshes) {
        if (space_ids.count(m.space.value) == 0) {
            throw SceneError(Kind::unknown_reference, "mesh '" + m.name + "' references unknown space " + std::to_string(m.space.value));
        }
        for (const Triangle& t : m.triangles) {
            if (!(t.area() > 1e-12)) {
                throw SceneError(Kind::degenerate_geometry, "mesh '" + m.name + "' contains a degenerate triangle");
            }
        }
    }

    std::set<std::uint32_t> portal_ids;
    for (const Portal& p : scene.portals) {
        if (!portal_ids.insert(p.id.value).second) {
            throw SceneError(Kind::parse, "duplicate " + portal_name(p));
        }
    }
    for (const Portal& p : scene.portals) {
        if (portal_ids.count(p.partner.value) == 0) {
            throw SceneError(Kind::dangling_partner, portal_name(p) + " references missing partner " + std::to_string(p.partner.value));
        }
    }

    const double min_depth = 0.5 * scene.rig.ipd + scene.rig.projection.near;
    for (const Portal& p : scene.portals) {
        if (!(p.width > 0.0) || !(p.height > 0.0) || !(p.box_depth > 0.0)) {
            throw SceneError(Kind::invalid_dimension, portal_name(p) + " has non-positive dimensions");
        }
        if (space_ids.count(p.space.value) == 0) {
            throw SceneError(Kind::unknown_reference, portal_name(p) + " references unknown space " + std::to_string(p.space.value));
        }
        const Portal* partner = scene.find_portal(p.partner);
        if (partner->partner != p.id || partner->id == p.id) {
            throw SceneError(Kind::asymmetric_partner, portal_name(p) + " partnering is not symmetric");
        }
        if (p.box_depth <= min_depth) {
            throw SceneError(Kind::box_too_shallow, portal_name(p) + " box depth must exceed ipd/2 + near");
        }
        const Aabb env = space_envelope(scene, p.space);
        if (!env.empty) {
            for (double sx : {-0.5, 0.5}) {
                for (double sy : {-0.5, 0.5}) {
                    const Vec3 corner = p.pose.apply_point(Vec3(sx * p.width, sy * p.height, 0.0));
                    if (!env.contains(corner, 1e-6)) {
                        throw SceneError(Kind::out_of_envelope, portal_name(p) + " quad leaves its space's geometry envelope");
                    }
                }
            }
        }
    }

    if (scene.tracked_bounds.max_x < scene.tracked_bounds.min_x || scene.tracked_bounds.max_z < scene.tracked_bounds.min_z) {
        throw SceneError(Kind::invalid_dimension, "tracked bounds are inverted");
    }
    if (!(scene.rig.ipd > 0.0) || !(scene.rig.projection.near > 0.0) || !(scene.rig.projection.far > scene.rig.projection.near)) {
        throw SceneError(Kind::invalid_dimension, "rig ipd/near/far are invalid");
    }
    if (!scene.spaces.empty() && space_ids.count(scene.rig.space.value) == 0) {
        throw SceneError(Kind::unknown_reference, "rig starts in unknown space " + std::to_string(scene.rig.space.value));
    }
}

void set_portal_enabled_in_place(Scene& scene, PortalId id, bool enabled) {
    Portal* p = scene.find_portal(id);
    if (p == nullptr) {
        throw SceneError(SceneError::Kind::unknown_portal, "unknown portal " + std::to_string(id.value));
    }
    p->enabled = enabled;
    if (Portal* partner = scene.find_portal(p->partner)) {
        partner->enabled = enabled;
    }
}

Scene set_portal_enabled(Scene scene, PortalId id, bool enabled) {
    set_portal_enabled_in_place(scene, id, enabled);
    return scene;
}

}  // namespace portalvr
