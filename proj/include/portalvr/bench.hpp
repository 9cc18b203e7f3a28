#pragma once

#include "portalvr/scheduler.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace portalvr::bench {

class BenchError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Trajectory { fixed, orbit, walk };

[[nodiscard]] std::string_view to_string(Trajectory t);
[[nodiscard]] std::optional<Trajectory> parse_trajectory(std::string_view name);

struct BenchConfig {
    int test_pairs = 3;                              ///< used when scene_file is empty
    std::optional<std::filesystem::path> scene_file;
    RenderMode mode = RenderMode::naive_multi_pass;
    int frames = 60;
    int width = 256;   ///< per eye
    int height = 256;
    Trajectory trajectory = Trajectory::fixed;
    std::uint64_t seed = 1;
    PlanOptions options;
    int workers = 1;
    int capture_every = 0;  ///< keep an encoded stereo image every k frames (0 = none)

    /// Throws BenchError on frames < 1, resolution below 16x16 or bad pairs.
    void validate() const;
    [[nodiscard]] std::string scene_label() const;
};

struct FrameRecord {
    FrameMetrics metrics;
    Pose head;
    std::string image;  ///< binary PPM of the stereo frame, when captured
};

struct BenchSeries {
    BenchConfig config;
    std::size_t portals = 0;  ///< enabled portals in the scene
    std::vector<FrameRecord> frames;
};

struct BenchSummary {
    std::size_t portals = 0;
    RenderMode mode = RenderMode::naive_multi_pass;
    double fps = 0.0;
    double frame_ms = 0.0;
    double plan_ms = 0.0;
    double raster_ms = 0.0;
    double passes = 0.0;
    double fragments = 0.0;  ///< color fragments per frame
};

/// Loads or builds the configured scene.
Scene load_bench_scene(const BenchConfig& config);

/// Renders config.frames frames along the trajectory. Counts are deterministic;
/// timings are not.
BenchSeries run_bench(const BenchConfig& config);
BenchSeries run_bench(const BenchConfig& config, const Scene& scene);

BenchSummary summarize(const BenchSeries& series);

/// Long-form per-frame CSV, one row per frame.
std::string format_frames_csv(std::span<const BenchSeries> series);
/// Matrix with header `metric,0,2,4,6` and rows fps, frame_ms, plan_ms,
/// raster_ms, passes, fragments, followed by a '#' footer line.
std::string format_summary_matrix(std::span<const BenchSummary> summaries);

/// Writes the per-frame CSV to `path` and the matrix next to it
/// (`<stem>_summary.csv`). Throws BenchError on empty input or unwritable paths.
void emit_csv(std::span<const BenchSeries> series, std::span<const BenchSummary> summaries, const std::filesystem::path& path);

/// Writes captured images of every k-th frame as
/// `frame_<index>_<mode>.ppm`; returns the number written.
std::size_t emit_frames(const BenchSeries& series, const std::filesystem::path& directory, int every);

}  // namespace portalvr::bench
