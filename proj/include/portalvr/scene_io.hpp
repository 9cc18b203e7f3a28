#pragma once

#include "portalvr/scene.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace portalvr {

/// Parses a JSON scene document and validates it. Throws SceneError.
///
/// Top-level keys:
///   spaces          [{id, name, walkable?: {min:[x,z], max:[x,z]}}]
///   meshes          [{name?, space, color?:[r,g,b(,a)], cull_backfaces?, and either
///                     primitive: "box" {center, size, inward?} |
///                                "quad" {center, size:[w,h], ypr_deg?} |
///                                "prism" {center, radius, height, sides?}
///                     or triangles: [[x0,y0,z0, x1,y1,z1, x2,y2,z2], ...] with
///                     optional face_colors: [[r,g,b,a], ...]}]
///   portals         [{id, partner, space, position, ypr_deg | rotation (row-major 3x3),
///                     width, height, box_depth?, enabled?, color?}]
///   tracked_bounds  {min:[x,z], max:[x,z]}
///   rig             {space, position, ypr_deg | quat:[w,x,y,z], ipd, fov_deg, aspect?, near, far}
Scene load_scene(std::string_view document);
Scene load_scene_file(const std::filesystem::path& path);

/// Writes a document that load_scene reads back to an identical Scene
/// (meshes are written as explicit triangle lists, orientations exactly).
std::string save_scene(const Scene& scene);
void save_scene_file(const Scene& scene, const std::filesystem::path& path);

}  // namespace portalvr
