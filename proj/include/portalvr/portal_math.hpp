#pragma once

#include "portalvr/scene.hpp"

#include <optional>

namespace portalvr {

/// Head-center crossing of a portal plane, front (+Z) to back.
struct CrossingEvent {
    PortalId portal;
    double t = 0.0;  ///< parameter along the head's motion segment, in [0, 1]
    Vec3 entry;      ///< world-space point on the portal plane
};

/// Maps viewpoints in `src`'s space to the matching virtual viewpoint behind
/// `dst`: dst.pose * Ry(pi) * src.pose^-1. Throws SceneError if the portals are
/// not partners.
RigidTransform portal_view_transform(const Portal& src, const Portal& dst);

/// Front-to-back crossing of the segment prev -> next through the portal quad.
/// Being exactly on the plane counts as not yet crossed.
std::optional<CrossingEvent> detect_crossing(const Vec3& prev_head, const Vec3& next_head, const Portal& portal);

/// Moves a pose through `src` to its partner `dst`.
Pose teleport(const Pose& head, const Portal& src, const Portal& dst);
/// Same, looking up the partner in `scene`.
Pose teleport(const Pose& head, const Portal& src, const Scene& scene);

/// Box extruded `box_depth` behind the portal quad, tagged as a portal surface.
/// The front face (the quad) faces outward; the five remaining faces face into
/// the box. With back-face culling the quad is visible only from outside while
/// an eye inside the box sees the inner walls and, through the quad, the space
/// in front of it.
Mesh make_portal_box(const Portal& portal);

/// The bare quad as a portal surface (plane-only portal, no box).
Mesh make_portal_quad(const Portal& portal);

/// Opaque stand-in for a portal that is disabled or not rendered.
Mesh make_portal_placeholder(const Portal& portal);

/// Strict interior test against the portal's box volume.
bool eye_inside_box(const Vec3& eye, const Portal& portal);

/// Plane of the portal quad with the normal along the portal's front (+Z).
Plane portal_plane(const Portal& portal);

}  // namespace portalvr
