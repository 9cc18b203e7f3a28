#include "portalvr/validate.hpp"

#include "portalvr/portal_math.hpp"

#include <cmath>
#include <deque>
#include <map>

namespace portalvr {

const SpaceValidation* ValidationReport::find(SpaceId id) const {
    for (const SpaceValidation& s : spaces) {
        if (s.space == id) return &s;
    }
    return nullptr;
}

namespace {

std::vector<double> grid_axis(double lo, double hi, double step) {
    std::vector<double> out;
    const auto n = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(lo + static_cast<double>(i) * step);
    if (out.empty() || out.back() < hi) out.push_back(hi);
    return out;
}

}  // namespace

ValidationReport validate_impossible_space(const Scene& scene, double grid_step) {
    if (!(grid_step > 0.0)) grid_step = 0.05;

    std::map<std::uint32_t, RigidTransform> to_real;
    std::deque<SpaceId> queue;
    to_real.emplace(scene.rig.space.value, RigidTransform::identity());
    queue.push_back(scene.rig.space);
    while (!queue.empty()) {
        const SpaceId here = queue.front();
        queue.pop_front();
        const RigidTransform here_to_real = to_real.at(here.value);
        for (const Portal& p : scene.portals) {
            if (!p.enabled || p.space != here) continue;
            const Portal* partner = scene.find_portal(p.partner);
            if (partner == nullptr || !partner->enabled) continue;
            if (to_real.count(partner->space.value) != 0) continue;
            to_real.emplace(partner->space.value, here_to_real * portal_view_transform(*partner, p));
            queue.push_back(partner->space);
        }
    }

    ValidationReport report;
    for (const Space& space : scene.spaces) {
        SpaceValidation v;
        v.space = space.id;
        auto it = to_real.find(space.id.value);
        v.reachable = it != to_real.end();
        if (!v.reachable) {
            v.violations.push_back("not reachable from space " + std::to_string(scene.rig.space.value));
            report.all_reachable = false;
            report.all_contained = false;
            report.spaces.push_back(std::move(v));
            continue;
        }
        v.to_real = it->second;
        const std::optional<FloorRect> region = scene.walkable_region(space.id);
        if (!region) {
            v.contained = true;
            report.spaces.push_back(std::move(v));
            continue;
        }
        for (double x : grid_axis(region->min_x, region->max_x, grid_step)) {
            for (double z : grid_axis(region->min_z, region->max_z, grid_step)) {
                const Vec3 real = v.to_real.apply_point(Vec3(x, 0.0, z));
                ++v.samples;
                if (!scene.tracked_bounds.contains(real.x(), real.z(), 1e-9)) {
                    if (v.samples_outside == 0) {
                        v.violations.push_back("walkable point (" + std::to_string(x) + ", " + std::to_string(z) +
                                               ") maps outside the tracked bounds");
                    }
                    ++v.samples_outside;
                }
            }
        }
        v.contained = v.samples_outside == 0;
        if (!v.contained) report.all_contained = false;
        report.spaces.push_back(std::move(v));
    }
    return report;
}

}  // namespace portalvr
