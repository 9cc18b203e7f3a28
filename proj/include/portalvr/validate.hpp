#pragma once

#include "portalvr/scene.hpp"

#include <string>
#include <vector>

namespace portalvr {

struct SpaceValidation {
    SpaceId space;
    bool reachable = false;
    bool contained = false;
    RigidTransform to_real;           ///< space coordinates -> start-space coordinates
    std::size_t samples = 0;
    std::size_t samples_outside = 0;
    std::vector<std::string> violations;
};

struct ValidationReport {
    std::vector<SpaceValidation> spaces;
    bool all_reachable = true;
    bool all_contained = true;

    [[nodiscard]] bool ok() const { return all_reachable && all_contained; }
    [[nodiscard]] const SpaceValidation* find(SpaceId id) const;
};

/// Reachability from the rig's space over enabled portals, and containment of
/// every reachable space's walkable region in tracked_bounds once mapped into
/// real (start-space) coordinates along the first breadth-first portal path.
/// The region is sampled on a grid of `grid_step` meters including its edges.
ValidationReport validate_impossible_space(const Scene& scene, double grid_step = 0.05);

}  // namespace portalvr
