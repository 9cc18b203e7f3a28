#include "portalvr/bench.hpp"

#include "portalvr/image_io.hpp"
#include "portalvr/scene_io.hpp"
#include "portalvr/test_scenes.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace portalvr::bench {

std::string_view to_string(Trajectory t) {
    switch (t) {
        case Trajectory::fixed: return "fixed";
        case Trajectory::orbit: return "orbit";
        case Trajectory::walk: return "walk";
    }
    return "?";
}

std::optional<Trajectory> parse_trajectory(std::string_view name) {
    for (Trajectory t : {Trajectory::fixed, Trajectory::orbit, Trajectory::walk}) {
        if (to_string(t) == name) return t;
    }
    return std::nullopt;
}

void BenchConfig::validate() const {
    if (frames < 1) throw BenchError("frames must be >= 1");
    if (width < 16 || height < 16) throw BenchError("resolution must be at least 16x16 per eye");
    if (!scene_file && (test_pairs < 0 || test_pairs > 3)) throw BenchError("test scene pairs must be 0..3");
    if (capture_every < 0) throw BenchError("capture interval must be >= 0");
}

std::string BenchConfig::scene_label() const {
    return scene_file ? scene_file->filename().string() : "test:" + std::to_string(test_pairs);
}

Scene load_bench_scene(const BenchConfig& config) {
    config.validate();
    try {
        return config.scene_file ? load_scene_file(*config.scene_file) : build_test_scene(config.test_pairs);
    } catch (const SceneError& e) {
        throw BenchError(std::string("scene: ") + e.what());
    }
}

namespace {

using Clock = std::chrono::steady_clock;

Vec3 horizontal_forward(const Quat& q) {
    Vec3 f = q * Vec3(0, 0, -1);
    f.y() = 0.0;
    const double n = f.norm();
    return n > 1e-12 ? Vec3(f / n) : Vec3(0, 0, -1);
}

// Start pose of an oblique walk through the first enabled portal of the rig's space.
struct Walk {
    Pose start;
    SpaceId space;
    double step = 0.0;
};

Walk plan_walk(const Scene& scene, int frames) {
    const Portal* portal = nullptr;
    for (const Portal& p : scene.portals) {
        if (p.enabled && p.space == scene.rig.space) {
            portal = &p;
            break;
        }
    }
    Walk w{scene.rig.head, scene.rig.space, 0.0};
    if (portal == nullptr) return w;

    constexpr double kEntryDeg = 40.0;
    constexpr double kLength = 2.4;
    const double a = deg_to_rad(kEntryDeg);
    const Vec3 local_dir(std::sin(a), 0.0, -std::cos(a));
    const Vec3 head_local = portal->pose.inverse().apply_point(scene.rig.head.position);
    const double limit = 0.5 * portal->height - 0.05;
    const Vec3 cross_local(0.0, std::clamp(head_local.y(), -limit, limit), 0.0);
    const Vec3 start_local = cross_local - 0.5 * kLength * local_dir;

    const Vec3 start = portal->pose.apply_point(start_local);
    const Vec3 dir = portal->pose.apply_vector(local_dir);
    w.start.position = start;
    w.start.orientation = Quat(Eigen::AngleAxisd(std::atan2(-dir.x(), -dir.z()), Vec3::UnitY()));
    w.step = frames > 1 ? kLength / static_cast<double>(frames - 1) : 0.0;
    return w;
}

}  // namespace

BenchSeries run_bench(const BenchConfig& config) { return run_bench(config, load_bench_scene(config)); }

BenchSeries run_bench(const BenchConfig& config, const Scene& scene) {
    config.validate();
    BenchSeries series;
    series.config = config;
    series.portals = scene.enabled_portal_count();

    FrameRenderer renderer(config.width, config.height);
    renderer.set_workers(config.workers);

    StereoRig rig = scene.rig;
    rig.projection.aspect = static_cast<double>(config.width) / static_cast<double>(config.height);
    const Pose origin = rig.head;

    std::mt19937_64 rng(config.seed);
    const double phase = std::uniform_real_distribution<double>(0.0, 2.0 * kPi)(rng);
    constexpr double kOrbitRadius = 0.3;

    Walk walk;
    if (config.trajectory == Trajectory::walk) {
        walk = plan_walk(scene, config.frames);
        rig.head = walk.start;
        rig.space = walk.space;
    }

    series.frames.reserve(static_cast<std::size_t>(config.frames));
    for (int f = 0; f < config.frames; ++f) {
        const auto t0 = Clock::now();
        switch (config.trajectory) {
            case Trajectory::fixed: break;
            case Trajectory::orbit: {
                const double phi = phase + 2.0 * kPi * f / config.frames;
                rig.head.position = origin.position + kOrbitRadius * Vec3(std::cos(phi), 0.0, std::sin(phi));
                break;
            }
            case Trajectory::walk:
                if (f > 0) {
                    Pose next = rig.head;
                    next.position += walk.step * horizontal_forward(rig.head.orientation);
                    rig = frame_step(scene, rig, next).rig;
                }
                break;
        }
        const double step_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

        FrameRecord rec;
        rec.metrics = renderer.render(scene, rig, config.mode, config.options);
        rec.metrics.frame_index = static_cast<std::uint64_t>(f);
        rec.metrics.plan_ms += step_ms;
        rec.metrics.total_ms += step_ms;
        rec.head = rig.head;
        if (config.capture_every > 0 && f % config.capture_every == 0) {
            const raster::FrameTarget& frame = renderer.output().frame();
            rec.image = raster::encode_image(frame, frame.full_viewport());
        }
        series.frames.push_back(std::move(rec));
    }
    return series;
}

BenchSummary summarize(const BenchSeries& s) {
    BenchSummary out;
    out.portals = s.portals;
    out.mode = s.config.mode;
    if (s.frames.empty()) return out;
    for (const FrameRecord& r : s.frames) {
        out.frame_ms += r.metrics.total_ms;
        out.plan_ms += r.metrics.plan_ms;
        out.raster_ms += r.metrics.raster_ms;
        out.passes += static_cast<double>(r.metrics.pass_count);
        out.fragments += static_cast<double>(r.metrics.fragments_shaded());
    }
    const double n = static_cast<double>(s.frames.size());
    out.frame_ms /= n;
    out.plan_ms /= n;
    out.raster_ms /= n;
    out.passes /= n;
    out.fragments /= n;
    out.fps = out.frame_ms > 0.0 ? 1000.0 / out.frame_ms : 0.0;
    return out;
}

std::string format_frames_csv(std::span<const BenchSeries> series) {
    std::ostringstream out;
    out << "scene,mode,trajectory,portals,frame,space,total_ms,plan_ms,raster_ms,passes,executed_passes,"
           "triangles_submitted,triangles_culled,fragments_shaded,fragments_depth_stencil_only,"
           "fragments_stencil_rejected,fragments_depth_rejected,color_left,color_right,masked_pixels,head_x,head_y,head_z\n";
    char buf[512];
    for (const BenchSeries& s : series) {
        for (const FrameRecord& r : s.frames) {
            const FrameMetrics& m = r.metrics;
            const raster::RasterCounters& c = m.totals;
            std::snprintf(buf, sizeof buf,
                          "%s,%s,%s,%zu,%llu,%u,%.4f,%.4f,%.4f,%zu,%zu,%llu,%llu,%llu,%llu,%llu,%llu,%llu,%llu,%llu,%.6f,%.6f,%.6f\n",
                          s.config.scene_label().c_str(), std::string(to_string(s.config.mode)).c_str(),
                          std::string(to_string(s.config.trajectory)).c_str(), s.portals,
                          static_cast<unsigned long long>(m.frame_index), m.space.value, m.total_ms, m.plan_ms, m.raster_ms,
                          m.pass_count, m.executed_passes, static_cast<unsigned long long>(c.triangles_submitted),
                          static_cast<unsigned long long>(c.triangles_culled),
                          static_cast<unsigned long long>(c.fragments_shaded),
                          static_cast<unsigned long long>(c.fragments_depth_stencil_only),
                          static_cast<unsigned long long>(c.fragments_stencil_rejected),
                          static_cast<unsigned long long>(c.fragments_depth_rejected),
                          static_cast<unsigned long long>(m.color_fragments_per_eye[0]),
                          static_cast<unsigned long long>(m.color_fragments_per_eye[1]),
                          static_cast<unsigned long long>(m.masked_pixels), r.head.position.x(), r.head.position.y(),
                          r.head.position.z());
            out << buf;
        }
    }
    return out.str();
}

std::string format_summary_matrix(std::span<const BenchSummary> summaries) {
    std::vector<std::size_t> columns{0, 2, 4, 6};
    std::map<std::size_t, const BenchSummary*> by_portals;
    for (const BenchSummary& s : summaries) {
        by_portals[s.portals] = &s;
        if (std::find(columns.begin(), columns.end(), s.portals) == columns.end()) columns.push_back(s.portals);
    }
    std::ostringstream out;
    out << "metric";
    for (std::size_t c : columns) out << ',' << c;
    out << '\n';

    using Getter = double (*)(const BenchSummary&);
    const std::pair<const char*, Getter> rows[] = {
        {"fps", [](const BenchSummary& s) { return s.fps; }},
        {"frame_ms", [](const BenchSummary& s) { return s.frame_ms; }},
        {"plan_ms", [](const BenchSummary& s) { return s.plan_ms; }},
        {"raster_ms", [](const BenchSummary& s) { return s.raster_ms; }},
        {"passes", [](const BenchSummary& s) { return s.passes; }},
        {"fragments", [](const BenchSummary& s) { return s.fragments; }},
    };
    char buf[64];
    for (const auto& [name, get] : rows) {
        out << name;
        for (std::size_t c : columns) {
            out << ',';
            auto it = by_portals.find(c);
            if (it == by_portals.end()) continue;
            std::snprintf(buf, sizeof buf, "%.4f", get(*it->second));
            out << buf;
        }
        out << '\n';
    }
    out << "# timings are specific to this machine and software rasterizer; pass and fragment counts are deterministic\n";
    return out.str();
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw BenchError("cannot write " + path.string());
    f << text;
    if (!f) throw BenchError("failed writing " + path.string());
}

}  // namespace

void emit_csv(std::span<const BenchSeries> series, std::span<const BenchSummary> summaries, const std::filesystem::path& path) {
    if (series.empty() || summaries.empty()) throw BenchError("nothing to write: empty benchmark series");
    for (const BenchSeries& s : series) {
        if (s.frames.empty()) throw BenchError("nothing to write: empty benchmark series");
    }
    write_text(path, format_frames_csv(series));
    std::filesystem::path summary = path;
    summary.replace_filename(path.stem().string() + "_summary.csv");
    write_text(summary, format_summary_matrix(summaries));
}

std::size_t emit_frames(const BenchSeries& series, const std::filesystem::path& directory, int every) {
    if (every < 1) throw BenchError("frame interval must be >= 1");
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) throw BenchError("cannot create " + directory.string() + ": " + ec.message());
    std::size_t written = 0;
    for (const FrameRecord& r : series.frames) {
        if (r.metrics.frame_index % static_cast<std::uint64_t>(every) != 0) continue;
        if (r.image.empty()) throw BenchError("frame " + std::to_string(r.metrics.frame_index) + " was not captured");
        char name[96];
        std::snprintf(name, sizeof name, "frame_%05llu_%s.ppm", static_cast<unsigned long long>(r.metrics.frame_index),
                      std::string(to_string(series.config.mode)).c_str());
        write_text(directory / name, r.image);
        ++written;
    }
    return written;
}

}  // namespace portalvr::bench
