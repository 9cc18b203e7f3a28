#pragma once

#include "portalvr/math.hpp"

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace portalvr {

struct SpaceId {
    std::uint32_t value = 0;
    friend auto operator<=>(const SpaceId&, const SpaceId&) = default;
};

struct PortalId {
    std::uint32_t value = 0;
    friend auto operator<=>(const PortalId&, const PortalId&) = default;
};

struct Rgba8 {
    std::uint8_t r = 0, g = 0, b = 0, a = 255;
    friend bool operator==(const Rgba8&, const Rgba8&) = default;
};

enum class Eye { left, right };

class SceneError : public std::runtime_error {
public:
    enum class Kind { parse, dangling_partner, asymmetric_partner, invalid_dimension, unknown_reference, degenerate_geometry, out_of_envelope, box_too_shallow, unknown_portal, out_of_range };

    SceneError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    [[nodiscard]] Kind kind() const { return kind_; }

private:
    Kind kind_;
};

enum class Material { opaque, portal_surface, portal_placeholder };

struct Triangle {
    std::array<Vec3, 3> v;
    Rgba8 color;

    [[nodiscard]] double area() const { return 0.5 * (v[1] - v[0]).cross(v[2] - v[0]).norm(); }
};

/// Triangle list. Counter-clockwise (seen from the front) is the front face.
struct Mesh {
    std::string name;
    SpaceId space;
    std::vector<Triangle> triangles;
    bool cull_backfaces = true;
    Material material = Material::opaque;
    std::optional<PortalId> portal;  ///< set for portal_surface / portal_placeholder
};

/// Axis-aligned rectangle on the floor plane (x/z, meters).
struct FloorRect {
    double min_x = 0.0, min_z = 0.0, max_x = 0.0, max_z = 0.0;

    [[nodiscard]] bool contains(double x, double z, double eps = 1e-9) const {
        return x >= min_x - eps && x <= max_x + eps && z >= min_z - eps && z <= max_z + eps;
    }
    friend bool operator==(const FloorRect&, const FloorRect&) = default;
};

struct Space {
    SpaceId id;
    std::string name;
    std::optional<FloorRect> walkable;  ///< defaults to the xz envelope of the space's meshes
};

/// Oriented rectangular opening. Local frame: origin at the quad center, +Z is
/// the front normal (pointing into the space the portal is viewed from), +Y up.
struct Portal {
    PortalId id;
    PortalId partner;
    SpaceId space;
    RigidTransform pose;
    double width = 1.0;
    double height = 2.0;
    double box_depth = 0.5;
    bool enabled = true;
    Rgba8 frame_color{200, 40, 40, 255};
};

struct Projection {
    double fov_y = deg_to_rad(90.0);  ///< vertical field of view, radians
    double aspect = 1.0;
    double near = 0.05;
    double far = 100.0;
    /// Extra clip plane in view space; geometry with n.p + d < 0 is clipped.
    std::optional<Plane> oblique_plane;

    [[nodiscard]] double tan_half_y() const;
    [[nodiscard]] double tan_half_x() const { return tan_half_y() * aspect; }
};

/// Head pose plus interpupillary distance. Eye poses are always derived from
/// the head; they are never stored.
struct StereoRig {
    Pose head;
    double ipd = 0.064;
    Projection projection;
    SpaceId space;  ///< the space the head is currently in

    [[nodiscard]] Pose eye_pose(Eye eye) const;
    [[nodiscard]] RigidTransform view_matrix(Eye eye) const { return eye_pose(eye).to_transform().inverse(); }
};

struct Scene {
    std::vector<Space> spaces;
    std::vector<Mesh> meshes;
    std::vector<Portal> portals;
    FloorRect tracked_bounds;
    StereoRig rig;

    [[nodiscard]] const Portal* find_portal(PortalId id) const;
    [[nodiscard]] Portal* find_portal(PortalId id);
    [[nodiscard]] const Space* find_space(SpaceId id) const;
    [[nodiscard]] const Portal& partner_of(const Portal& p) const;
    [[nodiscard]] std::size_t enabled_portal_count() const;
    /// Walkable floor region of a space (explicit or derived from its meshes).
    [[nodiscard]] std::optional<FloorRect> walkable_region(SpaceId id) const;
};

/// Checks every scene invariant; throws SceneError on the first violation.
void validate_scene(const Scene& scene);

/// Enables or disables a portal together with its partner.
Scene set_portal_enabled(Scene scene, PortalId id, bool enabled);
void set_portal_enabled_in_place(Scene& scene, PortalId id, bool enabled);

}  // namespace portalvr
