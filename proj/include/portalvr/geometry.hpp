#pragma once

#include "portalvr/scene.hpp"

#include <string>

namespace portalvr {

/// Appends quad a-b-c-d (counter-clockwise seen from its front) as two triangles.
void add_quad(Mesh& mesh, const Vec3& a, const Vec3& b, const Vec3& c, const Vec3& d, Rgba8 color);

/// Axis-aligned box. `inward` flips every face so the box is seen from inside (rooms).
Mesh make_box_mesh(std::string name, SpaceId space, const Vec3& center, const Vec3& size, Rgba8 color, bool inward = false);

/// Single rectangle in the xy-plane of `pose`, front face +Z.
Mesh make_quad_mesh(std::string name, SpaceId space, const RigidTransform& pose, double width, double height, Rgba8 color);

/// Closed n-gon prism standing on `base_center` (used for bowl-like occluders).
Mesh make_prism_mesh(std::string name, SpaceId space, const Vec3& base_center, double radius, double height, int sides, Rgba8 color);

void append_triangles(Mesh& dst, const Mesh& src);

}  // namespace portalvr
