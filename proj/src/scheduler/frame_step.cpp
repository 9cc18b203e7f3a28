#include "portalvr/scheduler.hpp"

namespace portalvr {

FrameStepResult frame_step(const Scene& scene, const StereoRig& rig, const Vec3& prev_head, const Pose& new_head,
                           int max_crossings) {
    FrameStepResult result;
    result.rig = rig;
    result.rig.head = new_head;

    Vec3 start = prev_head;
    double t_start = 0.0;  // position of `start` on the original segment
    for (int n = 0; n < max_crossings; ++n) {
        const Vec3 end = result.rig.head.position;
        std::optional<CrossingEvent> best;
        const Portal* best_portal = nullptr;
        for (const Portal& p : scene.portals) {
            if (!p.enabled || p.space != result.rig.space) continue;
            const Portal* partner = scene.find_portal(p.partner);
            if (partner == nullptr || !partner->enabled) continue;
            auto ev = detect_crossing(start, end, p);
            if (ev && (!best || ev->t < best->t)) {
                best = ev;
                best_portal = &p;
            }
        }
        if (!best) break;

        const Portal& dst = scene.partner_of(*best_portal);
        const RigidTransform t = portal_view_transform(*best_portal, dst);
        CrossingEvent event = *best;
        event.t = t_start + best->t * (1.0 - t_start);
        result.events.push_back(event);

        result.rig.head = transform_pose(t, result.rig.head);
        result.rig.space = dst.space;
        start = t.apply_point(best->entry);
        t_start = event.t;
    }
    return result;
}

FrameStepResult frame_step(const Scene& scene, const StereoRig& rig, const Pose& new_head, int max_crossings) {
    return frame_step(scene, rig, rig.head.position, new_head, max_crossings);
}

}  // namespace portalvr
